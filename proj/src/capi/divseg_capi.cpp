#include "divseg/divseg.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <variant>

#include "bench/ablate.hpp"
#include "bench/config.hpp"
#include "bench/evaluate.hpp"
#include "bench/gradcheck.hpp"
#include "bench/report.hpp"
#include "bench/trainer.hpp"
#include "common/error.hpp"
#include "common/file_io.hpp"
#include "netmodel/params.hpp"
#include "phantom/dataset.hpp"

using namespace divseg;

struct divseg_config {
  bench::ExperimentConfig cfg;
};

struct divseg_model {
  net::ModelParams params;
  std::vector<bench::EpochLog> log;
};

struct divseg_report {
  std::variant<bench::DiceReport, bench::ComparisonReport> value;
};

namespace {

thread_local std::string last_error;

divseg_status status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return DIVSEG_ERR_CONFIG;
    case ErrorKind::Parse: return DIVSEG_ERR_PARSE;
    case ErrorKind::Io: return DIVSEG_ERR_IO;
    case ErrorKind::InvalidShape: return DIVSEG_ERR_SHAPE;
    case ErrorKind::Domain: return DIVSEG_ERR_DOMAIN;
    case ErrorKind::Contract: return DIVSEG_ERR_CONTRACT;
    case ErrorKind::Numeric: return DIVSEG_ERR_NUMERIC;
  }
  return DIVSEG_ERR_INTERNAL;
}

template <class F>
divseg_status guarded(F&& fn) {
  last_error.clear();
  try {
    fn();
    return DIVSEG_OK;
  } catch (const Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown exception";
  }
  return DIVSEG_ERR_INTERNAL;
}

divseg_status argument_error(const char* what) {
  last_error = what;
  return DIVSEG_ERR_ARGUMENT;
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<phantom::Sample> load_split(const std::string& manifest) {
  return phantom::load_samples(phantom::load_manifest(manifest));
}

}  // namespace

#define DIVSEG_REQUIRE(cond) \
  if (!(cond)) return argument_error("null argument: " #cond)

extern "C" {

const char* divseg_version(void) { return "0.1.0"; }

const char* divseg_status_name(divseg_status s) {
  switch (s) {
    case DIVSEG_OK: return "ok";
    case DIVSEG_ERR_ARGUMENT: return "argument error";
    case DIVSEG_ERR_CONFIG: return "config error";
    case DIVSEG_ERR_PARSE: return "parse error";
    case DIVSEG_ERR_IO: return "io error";
    case DIVSEG_ERR_SHAPE: return "shape error";
    case DIVSEG_ERR_DOMAIN: return "domain error";
    case DIVSEG_ERR_CONTRACT: return "contract error";
    case DIVSEG_ERR_NUMERIC: return "numeric error";
    case DIVSEG_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* divseg_last_error(void) { return last_error.c_str(); }

void divseg_string_free(char* s) { std::free(s); }

divseg_status divseg_config_default(divseg_config** out) {
  DIVSEG_REQUIRE(out);
  return guarded([&] { *out = new divseg_config{}; });
}

divseg_status divseg_config_load(const char* path, divseg_config** out) {
  DIVSEG_REQUIRE(path && out);
  return guarded([&] { *out = new divseg_config{bench::load_config(path)}; });
}

divseg_status divseg_config_from_json(const char* json, divseg_config** out) {
  DIVSEG_REQUIRE(json && out);
  return guarded([&] { *out = new divseg_config{bench::config_from_json(json)}; });
}

divseg_status divseg_config_set_seed(divseg_config* c, uint64_t seed) {
  DIVSEG_REQUIRE(c);
  c->cfg.seed = seed;
  return DIVSEG_OK;
}

divseg_status divseg_config_seed(const divseg_config* c, uint64_t* out) {
  DIVSEG_REQUIRE(c && out);
  *out = c->cfg.seed;
  return DIVSEG_OK;
}

divseg_status divseg_config_set_out_dir(divseg_config* c, const char* dir) {
  DIVSEG_REQUIRE(c && dir);
  return guarded([&] {
    if (!*dir) throw ConfigError("out_dir must not be empty");
    c->cfg.out_dir = dir;
  });
}

divseg_status divseg_config_set_data_root(divseg_config* c, const char* root) {
  DIVSEG_REQUIRE(c && root);
  return guarded([&] {
    if (!*root) throw ConfigError("data.root must not be empty");
    c->cfg.data.root = root;
  });
}

divseg_status divseg_config_out_dir(const divseg_config* c, char** out) {
  DIVSEG_REQUIRE(c && out);
  return guarded([&] { *out = dup(c->cfg.out_dir); });
}

divseg_status divseg_config_to_json(const divseg_config* c, char** out) {
  DIVSEG_REQUIRE(c && out);
  return guarded([&] { *out = dup(bench::config_to_json(c->cfg)); });
}

void divseg_config_free(divseg_config* c) { delete c; }

divseg_status divseg_generate_data(const divseg_config* c) {
  DIVSEG_REQUIRE(c);
  return guarded([&] {
    const auto& d = c->cfg.data;
    c->cfg.validate();
    phantom::make_dataset(d.n_train, d.n_test, c->cfg.seed, d.root, d.dims);
  });
}

divseg_status divseg_train(const divseg_config* c, divseg_epoch_fn on_epoch, void* user,
                           divseg_model** out) {
  DIVSEG_REQUIRE(c && out);
  return guarded([&] {
    c->cfg.validate();
    const auto train_set = load_split(c->cfg.data.train_path());
    bench::EpochCallback cb;
    if (on_epoch) {
      cb = [&](const bench::EpochLog& e) {
        const divseg_epoch ce{e.epoch, e.dice, e.mi, e.hd, e.total};
        on_epoch(&ce, user);
      };
    }
    auto r = bench::train(c->cfg, train_set, cb);
    *out = new divseg_model{std::move(r.params), std::move(r.log)};
  });
}

divseg_status divseg_model_load(const divseg_config* c, const char* path, divseg_model** out) {
  DIVSEG_REQUIRE(c && path && out);
  return guarded([&] { *out = new divseg_model{net::load_checkpoint(path, c->cfg.arch), {}}; });
}

divseg_status divseg_model_save(const divseg_model* m, const char* path) {
  DIVSEG_REQUIRE(m && path);
  return guarded([&] { net::save_checkpoint(path, m->params); });
}

divseg_status divseg_model_train_log_csv(const divseg_model* m, char** out) {
  DIVSEG_REQUIRE(m && out);
  return guarded([&] { *out = dup(bench::train_log_csv(m->log)); });
}

divseg_status divseg_model_param_count(const divseg_model* m, size_t* out) {
  DIVSEG_REQUIRE(m && out);
  *out = m->params.count();
  return DIVSEG_OK;
}

void divseg_model_free(divseg_model* m) { delete m; }

divseg_status divseg_evaluate(const divseg_config* c, const divseg_model* m, uint32_t jobs,
                              divseg_report** out) {
  DIVSEG_REQUIRE(c && m && out);
  return guarded([&] {
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    const auto test_set = load_split(c->cfg.data.test_path());
    *out = new divseg_report{
        bench::evaluate_subsets(bench::model_predictor(m->params), test_set, jobs, "model")};
  });
}

divseg_status divseg_ablate(const divseg_config* c, const char* axis, uint32_t jobs,
                            divseg_variant_fn on_variant, void* user, divseg_report** out) {
  DIVSEG_REQUIRE(c && axis && out);
  return guarded([&] {
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    const auto a = bench::parse_axis(axis);
    c->cfg.validate();
    const auto train_set = load_split(c->cfg.data.train_path());
    const auto test_set = load_split(c->cfg.data.test_path());
    bench::VariantCallback cb;
    if (on_variant) {
      cb = [&](std::size_t i, const bench::Variant& v, const bench::TrainResult& r) {
        const divseg_model m{r.params, r.log};
        on_variant(i, v.label.c_str(), &m, user);
      };
    }
    auto outcome = bench::run_ablation(c->cfg, a, train_set, test_set, jobs, cb);
    *out = new divseg_report{std::move(outcome.report)};
  });
}

divseg_status divseg_report_from_json(const char* json, divseg_report** out) {
  DIVSEG_REQUIRE(json && out);
  return guarded([&] {
    const std::string text = json;
    if (bench::saved_report_kind(text) == "subsets") {
      *out = new divseg_report{bench::report_from_json(text)};
    } else {
      *out = new divseg_report{bench::comparison_from_json(text)};
    }
  });
}

divseg_status divseg_report_load(const char* path, divseg_report** out) {
  DIVSEG_REQUIRE(path && out);
  std::string text;
  const divseg_status s = guarded([&] { text = read_file(path); });
  if (s != DIVSEG_OK) return s;
  return divseg_report_from_json(text.c_str(), out);
}

divseg_status divseg_report_to_json(const divseg_report* r, char** out) {
  DIVSEG_REQUIRE(r && out);
  return guarded([&] {
    *out = dup(std::visit(
        [](const auto& v) {
          if constexpr (std::is_same_v<std::decay_t<decltype(v)>, bench::DiceReport>) {
            return bench::report_to_json(v);
          } else {
            return bench::comparison_to_json(v);
          }
        },
        r->value));
  });
}

divseg_status divseg_report_emit(const divseg_report* r, const char* format, char** out) {
  DIVSEG_REQUIRE(r && format && out);
  return guarded([&] {
    const auto f = bench::parse_format(format);
    *out = dup(std::visit(
        [f](const auto& v) {
          if constexpr (std::is_same_v<std::decay_t<decltype(v)>, bench::DiceReport>) {
            return bench::emit_table(v, f);
          } else {
            return bench::emit_comparison(v, f);
          }
        },
        r->value));
  });
}

divseg_status divseg_report_grand_average(const divseg_report* r, size_t variant, double* out) {
  DIVSEG_REQUIRE(r && out);
  return guarded([&] {
    if (const auto* d = std::get_if<bench::DiceReport>(&r->value)) {
      *out = d->grand_average();
      return;
    }
    const auto& cmp = std::get<bench::ComparisonReport>(r->value);
    if (variant >= cmp.rows.size()) throw ContractError("variant index out of range");
    *out = cmp.rows[variant].report.grand_average();
  });
}

divseg_status divseg_report_variant_count(const divseg_report* r, size_t* out) {
  DIVSEG_REQUIRE(r && out);
  if (const auto* cmp = std::get_if<bench::ComparisonReport>(&r->value)) {
    *out = cmp->rows.size();
  } else {
    *out = 1;
  }
  return DIVSEG_OK;
}

void divseg_report_free(divseg_report* r) { delete r; }

divseg_status divseg_gradcheck(uint64_t seed, int* passed, char** text) {
  DIVSEG_REQUIRE(passed && text);
  return guarded([&] {
    const auto rep = bench::run_gradcheck(bench::default_cases(seed), seed);
    *passed = rep.passed() ? 1 : 0;
    *text = dup(bench::format_gradcheck(rep));
  });
}

}  // extern "C"
