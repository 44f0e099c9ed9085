#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "divseg/divseg.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitNumeric = 2;

struct Failure {
  divseg_status status;
  std::string message;
};

int exit_code(divseg_status s) {
  if (s == DIVSEG_OK) return kExitOk;
  return s == DIVSEG_ERR_NUMERIC ? kExitNumeric : kExitInvalid;
}

void check(divseg_status s, const std::string& what) {
  if (s != DIVSEG_OK) {
    throw Failure{s, what + ": " + divseg_status_name(s) + ": " + divseg_last_error()};
  }
}

// Owning wrappers around the C handles.
template <class T, void (*Free)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Free(p); }
};
using Config = Handle<divseg_config, divseg_config_free>;
using Model = Handle<divseg_model, divseg_model_free>;
using Report = Handle<divseg_report, divseg_report_free>;

std::string take(char* s) {
  std::string out = s ? s : "";
  divseg_string_free(s);
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  f << text;
  if (!f.flush()) throw Failure{DIVSEG_ERR_IO, "cannot write " + path.string()};
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Failure{DIVSEG_ERR_IO, "cannot read " + path.string()};
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";
  unsigned jobs = 1;
};

void add_common(CLI::App* cmd, Common& c, bool with_format, bool with_jobs) {
  cmd->add_option("--config", c.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--seed", c.seed, "Override the config seed");
  cmd->add_option("--out", c.out, "Output directory");
  if (with_format) {
    cmd->add_option("--format", c.format, "Table format")->check(CLI::IsMember({"csv", "markdown"}));
  }
  if (with_jobs) cmd->add_option("--jobs", c.jobs, "Worker threads")->check(CLI::Range(1u, 1024u));
}

void load_config(const Common& c, Config& cfg) {
  if (c.config.empty()) {
    check(divseg_config_default(&cfg.p), "config");
  } else {
    check(divseg_config_load(c.config.c_str(), &cfg.p), "config " + c.config);
  }
  if (c.seed) check(divseg_config_set_seed(cfg.p, *c.seed), "config");
  if (!c.out.empty()) check(divseg_config_set_out_dir(cfg.p, c.out.c_str()), "config");
}

fs::path out_dir(const Config& cfg) {
  char* s = nullptr;
  check(divseg_config_out_dir(cfg.p, &s), "config");
  return take(s);
}

std::string extension(const std::string& format) { return format == "csv" ? "csv" : "md"; }

void emit(const Report& r, const std::string& format, const fs::path& stem) {
  char* s = nullptr;
  check(divseg_report_to_json(r.p, &s), "report");
  write_text(stem.string() + ".json", take(s));
  check(divseg_report_emit(r.p, format.c_str(), &s), "report");
  const std::string table = take(s);
  write_text(stem.string() + "." + extension(format), table);
  std::cout << table;
}

void on_epoch(const divseg_epoch* e, void*) {
  std::fprintf(stderr, "epoch %llu dice=%.6f mi=%.6f hd=%.6f total=%.6f\n",
               static_cast<unsigned long long>(e->epoch), e->dice, e->mi, e->hd, e->total);
}

int gen_data(const Common& c) {
  Config cfg;
  load_config(Common{c.config, c.seed, "", c.format, c.jobs}, cfg);
  // For gen-data, --out names the dataset root.
  if (!c.out.empty()) check(divseg_config_set_data_root(cfg.p, c.out.c_str()), "config");
  check(divseg_generate_data(cfg.p), "gen-data");
  return kExitOk;
}

int train(const Common& c) {
  Config cfg;
  load_config(c, cfg);
  Model model;
  check(divseg_train(cfg.p, on_epoch, nullptr, &model.p), "train");
  const fs::path dir = out_dir(cfg);
  fs::create_directories(dir);
  check(divseg_model_save(model.p, (dir / "checkpoint.bin").c_str()), "save checkpoint");
  char* s = nullptr;
  check(divseg_model_train_log_csv(model.p, &s), "train log");
  write_text(dir / "train_log.csv", take(s));
  check(divseg_config_to_json(cfg.p, &s), "config");
  write_text(dir / "config.json", take(s));
  std::cerr << "wrote " << (dir / "checkpoint.bin").string() << "\n";
  return kExitOk;
}

int eval(const Common& c, const std::string& checkpoint) {
  Config cfg;
  load_config(c, cfg);
  const fs::path dir = out_dir(cfg);
  const fs::path ckpt = checkpoint.empty() ? dir / "checkpoint.bin" : fs::path(checkpoint);
  Model model;
  check(divseg_model_load(cfg.p, ckpt.c_str(), &model.p), "load " + ckpt.string());
  Report rep;
  check(divseg_evaluate(cfg.p, model.p, c.jobs, &rep.p), "eval");
  emit(rep, c.format, dir / "report");
  return kExitOk;
}

struct AblateSink {
  explicit AblateSink(fs::path d) : dir(std::move(d)) {}
  fs::path dir;
  std::mutex mu;
  std::optional<Failure> error;
};

void on_variant(size_t, const char* label, const divseg_model* m, void* user) {
  auto& sink = *static_cast<AblateSink*>(user);
  try {
    const fs::path d = sink.dir / label;
    fs::create_directories(d);
    check(divseg_model_save(m, (d / "checkpoint.bin").c_str()), "save checkpoint");
    char* s = nullptr;
    check(divseg_model_train_log_csv(m, &s), "train log");
    write_text(d / "train_log.csv", take(s));
    std::lock_guard lock(sink.mu);
    std::cerr << "variant " << label << " done\n";
  } catch (const Failure& f) {
    std::lock_guard lock(sink.mu);
    if (!sink.error) sink.error = f;
  }
}

int ablate(const Common& c, const std::string& axis) {
  Config cfg;
  load_config(c, cfg);
  AblateSink sink{out_dir(cfg) / ("ablate_" + axis)};
  Report rep;
  check(divseg_ablate(cfg.p, axis.c_str(), c.jobs, on_variant, &sink, &rep.p), "ablate " + axis);
  if (sink.error) throw *sink.error;
  emit(rep, c.format, sink.dir / "comparison");
  return kExitOk;
}

int gradcheck(const Common& c) {
  int passed = 0;
  char* s = nullptr;
  check(divseg_gradcheck(c.seed.value_or(0), &passed, &s), "gradcheck");
  const std::string text = take(s);
  std::cout << text;
  if (!c.out.empty()) write_text(fs::path(c.out) / "gradcheck.txt", text);
  return passed ? kExitOk : kExitNumeric;
}

int report(const Common& c, const std::string& input) {
  Report rep;
  check(divseg_report_from_json(read_text(input).c_str(), &rep.p), "report " + input);
  char* s = nullptr;
  check(divseg_report_emit(rep.p, c.format.c_str(), &s), "report");
  const std::string table = take(s);
  if (!c.out.empty()) {
    write_text(fs::path(c.out) / (fs::path(input).stem().string() + "." + extension(c.format)), table);
  }
  std::cout << table;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Missing-modality brain tumour segmentation benchmark on synthetic phantoms"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(divseg_version()));

  Common gen_c, train_c, eval_c, ablate_c, grad_c, report_c;
  std::string checkpoint, axis, input;

  auto* gen_cmd = app.add_subcommand("gen-data", "Write a phantom dataset and manifests");
  add_common(gen_cmd, gen_c, false, false);
  auto* train_cmd = app.add_subcommand("train", "Train a model; writes checkpoint.bin and train_log.csv");
  add_common(train_cmd, train_c, false, false);
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate all 15 modality subsets on the test split");
  add_common(eval_cmd, eval_c, true, true);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint (default <out>/checkpoint.bin)");
  auto* ablate_cmd = app.add_subcommand("ablate", "Train and compare the variants of one ablation axis");
  add_common(ablate_cmd, ablate_c, true, true);
  ablate_cmd->add_option("--axis", axis, "Ablation axis")
      ->required()
      ->check(CLI::IsMember({"divergence_family", "alpha_sweep", "loss_components"}));
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
  grad_cmd->add_option("--seed", grad_c.seed, "Seed for inputs and sampled coordinates");
  grad_cmd->add_option("--out", grad_c.out, "Also write gradcheck.txt here");
  auto* report_cmd = app.add_subcommand("report", "Re-emit a saved report.json as a table");
  report_cmd->add_option("input", input, "report.json or comparison.json")->required()->check(CLI::ExistingFile);
  report_cmd->add_option("--format", report_c.format)->check(CLI::IsMember({"csv", "markdown"}));
  report_cmd->add_option("--out", report_c.out, "Also write the table here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*gen_cmd) return gen_data(gen_c);
    if (*train_cmd) return train(train_c);
    if (*eval_cmd) return eval(eval_c, checkpoint);
    if (*ablate_cmd) return ablate(ablate_c, axis);
    if (*grad_cmd) return gradcheck(grad_c);
    if (*report_cmd) return report(report_c, input);
  } catch (const Failure& f) {
    std::cerr << "error: " << f.message << "\n";
    return exit_code(f.status);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  }
  return kExitInvalid;
}
