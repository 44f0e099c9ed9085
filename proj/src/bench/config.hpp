#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "divergences/divergence.hpp"
#include "netmodel/params.hpp"
#include "phantom/phantom.hpp"

namespace divseg::bench {

struct DataConfig {
  std::string root = "data";
  std::string train_manifest;  // empty: <root>/train_manifest.json
  std::string test_manifest;   // empty: <root>/test_manifest.json
  std::size_t n_train = 40;
  std::size_t n_test = 10;
  phantom::Dims dims;

  std::string train_path() const;
  std::string test_path() const;
};

struct LossConfig {
  div::Divergence divergence = div::Divergence::Holder;
  double alpha = 1.1;
  double lambda_mi = 1.0;
  double lambda_hd = 1.0;
  std::optional<std::vector<double>> gammas;  // default k/K
  double label_smoothing = div::kLabelSmoothing;
};

struct OptimConfig {
  double lr = 8e-4;
  double weight_decay = 1e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t epochs = 60;
  std::size_t batch_size = 4;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DataConfig data;
  net::ArchConfig arch;
  LossConfig loss;
  OptimConfig optim;
  std::string out_dir = "out";

  // Throws ConfigError naming the offending field.
  void validate() const;
  std::vector<double> gammas() const;
};

// Missing keys keep their defaults; unknown keys and wrong types are
// ConfigErrors.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string config_to_json(const ExperimentConfig& c);

}  // namespace divseg::bench
