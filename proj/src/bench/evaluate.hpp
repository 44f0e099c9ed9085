#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "netmodel/modality.hpp"
#include "netmodel/params.hpp"
#include "phantom/phantom.hpp"

namespace divseg::bench {

inline constexpr std::size_t kRegions = 3;  // WT, TC, ET

struct SubsetRow {
  std::string subset;  // table label, e.g. "T1c,Fl"
  unsigned mask_bits = 0;
  std::array<double, kRegions> dsc{};  // mean over test samples, in [0, 1]
  // Sample/region pairs where both prediction and truth were empty.
  std::size_t empty_regions = 0;
};

// Mean test DSC per modality subset, rows in canonical table order.
struct DiceReport {
  std::string method;
  std::vector<SubsetRow> rows;

  std::array<double, kRegions> region_average() const;
  double grand_average() const;
  // Region-averaged DSC over subsets with 3, 2, 1 and 0 missing modalities.
  std::array<double, 4> by_missing_count() const;
};

// Logits [J,D,H,W] for one sample under a mask.
using Predictor = std::function<nd::Tensor(const phantom::Sample&, net::ModalityMask)>;

Predictor model_predictor(const net::ModelParams& params);

// Runs all 15 subsets, fanning out over `jobs` threads; the result does not
// depend on `jobs`.
DiceReport evaluate_subsets(const Predictor& predict, const std::vector<phantom::Sample>& test_set,
                            std::size_t jobs = 1, std::string method = "model");

// Runs fn(0..n-1) on up to `jobs` threads. Exceptions are rethrown after all
// workers stop (the lowest failing index wins).
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn);

}  // namespace divseg::bench
