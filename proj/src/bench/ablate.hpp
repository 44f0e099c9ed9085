#pragma once

#include <functional>
#include <vector>

#include "bench/config.hpp"
#include "bench/report.hpp"
#include "bench/trainer.hpp"

namespace divseg::bench {

struct Variant {
  std::string label;  // file-name friendly, e.g. "holder_a1.10", "dice+mi"
  ExperimentConfig config;
  bool use_mi = true;
  bool use_hd = true;
};

inline constexpr double kAlphaSweep[] = {1.05, 1.08, 1.10, 1.15, 1.20};

// Variants in table row order: the five f-divergences then Hölder; the five
// alphas ascending; dice, dice+MI, dice+HD, dice+MI+HD. Every variant keeps
// the base seed and dataset.
std::vector<Variant> ablation_variants(const ExperimentConfig& base, AblationAxis axis);

struct AblationOutcome {
  ComparisonReport report;
  std::vector<TrainResult> runs;  // parallel to report.rows
};

// Called from worker threads when jobs > 1.
using VariantCallback = std::function<void(std::size_t index, const Variant&, const TrainResult&)>;

// Trains and evaluates each variant. Variants fan out over `jobs` threads
// (each trains single-threaded); output does not depend on `jobs`.
AblationOutcome run_ablation(const ExperimentConfig& base, AblationAxis axis,
                             const std::vector<phantom::Sample>& train_set,
                             const std::vector<phantom::Sample>& test_set, std::size_t jobs = 1,
                             const VariantCallback& on_done = {});

}  // namespace divseg::bench
