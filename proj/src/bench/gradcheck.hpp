#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "ndtensor/ops.hpp"

namespace divseg::bench {

inline constexpr double kGradTolerance = 1e-4;
// Below this magnitude a gradient is compared on an absolute scale; central
// differences of an O(1) loss carry roughly 1e-10 of rounding noise.
inline constexpr double kGradFloor = 1e-5;

using GradBuilder = std::function<nd::Var(nd::Tape&, const std::vector<nd::Var>& leaves)>;

struct GradCase {
  std::string suite;  // ndtensor, divergences, distill, segloss, model
  std::string name;
  std::vector<nd::Tensor> inputs;
  GradBuilder build;
  std::size_t coords_per_input = 0;  // 0 checks every coordinate
  double step = 1e-5;
};

struct CaseResult {
  std::string suite;
  std::string name;
  double max_rel_err = 0.0;
  std::size_t checked = 0;
  std::vector<std::string> ops;  // op names recorded by the case
  std::string error;             // set when the case threw
  bool passed = false;
};

struct SuiteResult {
  std::string name;
  double max_rel_err = 0.0;
  std::size_t cases = 0;
  bool passed = true;
};

struct GradcheckReport {
  double tolerance = kGradTolerance;
  std::vector<CaseResult> cases;
  std::vector<SuiteResult> suites;
  std::vector<std::string> covered_ops;  // registered ops some case exercised
  std::vector<std::string> missing_ops;  // registered ops no case exercised

  bool passed() const;
  std::vector<std::string> failures() const;  // names of failing cases
};

// Every differentiable op the tape can record.
const std::vector<std::string>& differentiable_ops();

std::vector<GradCase> default_cases(std::uint64_t seed);

// Central differences in double precision. The error of a coordinate is
// |analytic - numeric| / max(|analytic|, |numeric|, kGradFloor); a coordinate that
// fails is retried once at a tenth of the step, which only matters when the
// first step straddled a relu or abs kink.
GradcheckReport run_gradcheck(const std::vector<GradCase>& cases, std::uint64_t seed,
                              double tolerance = kGradTolerance);

// One line per suite, then coverage and any failing cases.
std::string format_gradcheck(const GradcheckReport& r);

}  // namespace divseg::bench
