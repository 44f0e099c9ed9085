#include "bench/config.hpp"

#include <cmath>
#include <set>

#include "common/error.hpp"
#include "common/file_io.hpp"
#include "distill/mi_transfer.hpp"
#include "json.hpp"
#include "phantom/dataset.hpp"

namespace divseg::bench {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::string& where, std::set<std::string> known) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (!known.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

}  // namespace

std::string DataConfig::train_path() const {
  return train_manifest.empty() ? phantom::manifest_path(root, "train") : train_manifest;
}

std::string DataConfig::test_path() const {
  return test_manifest.empty() ? phantom::manifest_path(root, "test") : test_manifest;
}

void ExperimentConfig::validate() const {
  arch.validate();
  if (!(loss.alpha > 1.0) || !std::isfinite(loss.alpha)) {
    throw ConfigError("loss.alpha must be > 1");
  }
  if (optim.epochs < 1) throw ConfigError("optim.epochs must be >= 1");
  if (optim.batch_size < 1) throw ConfigError("optim.batch_size must be >= 1");
  if (!(optim.lr > 0)) throw ConfigError("optim.lr must be positive");
  if (optim.weight_decay < 0) throw ConfigError("optim.weight_decay must be >= 0");
  if (!(optim.beta1 >= 0 && optim.beta1 < 1 && optim.beta2 >= 0 && optim.beta2 < 1)) {
    throw ConfigError("optim betas must lie in [0, 1)");
  }
  if (!(optim.eps > 0)) throw ConfigError("optim.eps must be positive");
  if (loss.lambda_mi < 0 || loss.lambda_hd < 0) throw ConfigError("loss lambdas must be >= 0");
  if (!(loss.label_smoothing > 0 && loss.label_smoothing < 1)) {
    throw ConfigError("loss.label_smoothing must lie in (0, 1)");
  }
  if (loss.gammas && loss.gammas->size() != arch.levels()) {
    throw ConfigError("loss.gammas needs one weight per level (" +
                      std::to_string(arch.levels()) + ")");
  }
  if (data.n_train < 1 || data.n_test < 1) throw ConfigError("data.n_train and n_test must be >= 1");
  const std::size_t align = std::size_t(1) << (arch.levels() - 1);
  for (std::size_t e : {data.dims.d, data.dims.h, data.dims.w}) {
    if (e < 8 || e % align != 0) {
      throw ConfigError("data.dims must be >= 8 and divisible by " + std::to_string(align));
    }
  }
}

std::vector<double> ExperimentConfig::gammas() const {
  return loss.gammas ? *loss.gammas : distill::gamma_schedule(static_cast<int>(arch.levels()));
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c;
  reject_unknown(j, "config", {"seed", "data", "arch", "loss", "optim", "out_dir"});
  read(j, "seed", c.seed, "config");
  read(j, "out_dir", c.out_dir, "config");
  if (j.contains("data")) {
    const json& d = j["data"];
    reject_unknown(d, "data", {"root", "train_manifest", "test_manifest", "n_train", "n_test", "dims"});
    read(d, "root", c.data.root, "data");
    read(d, "train_manifest", c.data.train_manifest, "data");
    read(d, "test_manifest", c.data.test_manifest, "data");
    read(d, "n_train", c.data.n_train, "data");
    read(d, "n_test", c.data.n_test, "data");
    std::vector<std::size_t> dims{c.data.dims.d, c.data.dims.h, c.data.dims.w};
    read(d, "dims", dims, "data");
    if (dims.size() != 3) throw ConfigError("data.dims must have 3 entries");
    c.data.dims = {dims[0], dims[1], dims[2]};
  }
  if (j.contains("arch")) {
    const json& a = j["arch"];
    reject_unknown(a, "arch", {"channels", "classes", "groups", "norm_eps"});
    read(a, "channels", c.arch.channels, "arch");
    read(a, "classes", c.arch.classes, "arch");
    read(a, "groups", c.arch.groups, "arch");
    read(a, "norm_eps", c.arch.norm_eps, "arch");
  }
  if (j.contains("loss")) {
    const json& l = j["loss"];
    reject_unknown(l, "loss", {"divergence", "alpha", "lambda_mi", "lambda_hd", "gammas",
                               "label_smoothing"});
    std::string kind = div::to_string(c.loss.divergence);
    read(l, "divergence", kind, "loss");
    c.loss.divergence = div::parse_divergence(kind);
    read(l, "alpha", c.loss.alpha, "loss");
    read(l, "lambda_mi", c.loss.lambda_mi, "loss");
    read(l, "lambda_hd", c.loss.lambda_hd, "loss");
    read(l, "label_smoothing", c.loss.label_smoothing, "loss");
    if (l.contains("gammas") && !l["gammas"].is_null()) {
      std::vector<double> g;
      read(l, "gammas", g, "loss");
      c.loss.gammas = g;
    }
  }
  if (j.contains("optim")) {
    const json& o = j["optim"];
    reject_unknown(o, "optim", {"lr", "weight_decay", "beta1", "beta2", "eps", "epochs", "batch_size"});
    read(o, "lr", c.optim.lr, "optim");
    read(o, "weight_decay", c.optim.weight_decay, "optim");
    read(o, "beta1", c.optim.beta1, "optim");
    read(o, "beta2", c.optim.beta2, "optim");
    read(o, "eps", c.optim.eps, "optim");
    read(o, "epochs", c.optim.epochs, "optim");
    read(o, "batch_size", c.optim.batch_size, "optim");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return config_from_json(text);
}

std::string config_to_json(const ExperimentConfig& c) {
  json j{
      {"seed", c.seed},
      {"out_dir", c.out_dir},
      {"data",
       {{"root", c.data.root},
        {"train_manifest", c.data.train_manifest},
        {"test_manifest", c.data.test_manifest},
        {"n_train", c.data.n_train},
        {"n_test", c.data.n_test},
        {"dims", {c.data.dims.d, c.data.dims.h, c.data.dims.w}}}},
      {"arch",
       {{"channels", c.arch.channels},
        {"classes", c.arch.classes},
        {"groups", c.arch.groups},
        {"norm_eps", c.arch.norm_eps}}},
      {"loss",
       {{"divergence", div::to_string(c.loss.divergence)},
        {"alpha", c.loss.alpha},
        {"lambda_mi", c.loss.lambda_mi},
        {"lambda_hd", c.loss.lambda_hd},
        {"gammas", c.loss.gammas ? json(*c.loss.gammas) : json(nullptr)},
        {"label_smoothing", c.loss.label_smoothing}}},
      {"optim",
       {{"lr", c.optim.lr},
        {"weight_decay", c.optim.weight_decay},
        {"beta1", c.optim.beta1},
        {"beta2", c.optim.beta2},
        {"eps", c.optim.eps},
        {"epochs", c.optim.epochs},
        {"batch_size", c.optim.batch_size}}},
  };
  return j.dump(2) + "\n";
}

}  // namespace divseg::bench
