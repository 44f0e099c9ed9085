#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "ndtensor/ops.hpp"

namespace divseg::div {

inline constexpr double kProbEps = 1e-7;
inline constexpr double kLabelSmoothing = 0.05;

// Class probabilities, clamped to [kProbEps, 1] on construction. The input must
// sum to 1 within 1e-6; clamping does not renormalize.
class ProbVector {
 public:
  explicit ProbVector(std::vector<double> values);

  const std::vector<double>& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }

 private:
  std::vector<double> values_;
};

struct HolderExponents {
  double alpha;
  double beta;

  // Conjugate pair for alpha > 1.
  static HolderExponents from_alpha(double alpha);
};

enum class Divergence {
  Holder,
  TotalVariation,
  SquaredHellinger,
  KullbackLeibler,
  NeymanChi2,
  JensenShannon,
};

std::string to_string(Divergence kind);
Divergence parse_divergence(std::string_view name);
bool is_f_divergence(Divergence kind);

double hpd(const ProbVector& p, const ProbVector& q, HolderExponents e);
double f_divergence(Divergence kind, const ProbVector& p, const ProbVector& q);

// Mean over voxels of Div(softmax(logits) : labels), both [J,D,H,W], softmax
// over axis 0. Labels are taken as given (already probabilities).
nd::Var voxel_divergence_loss(nd::Var logits, nd::Var label_probs,
                              Divergence kind, HolderExponents e);

// Integer class map [D,H,W] to [J,D,H,W] with 1 - tau on the true class and
// tau/(J-1) elsewhere.
nd::Tensor smooth_one_hot(const nd::Tensor& labels, std::size_t classes,
                          double tau = kLabelSmoothing);

}  // namespace divseg::div
