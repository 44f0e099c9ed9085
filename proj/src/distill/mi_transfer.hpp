#pragma once

#include <cstddef>
#include <vector>

#include "ndtensor/ops.hpp"

namespace divseg::distill {

// gamma_k = k / K for k = 1..K.
std::vector<double> gamma_schedule(int levels);

// One distillation level for one sample. d_f is treated as a constant.
struct FeaturePair {
  nd::Var d_f;
  nd::Var d_m;
};

// Gaussian head q(d_f | d_m): mean from a 1x1x1 conv, per-channel log sigma.
struct HeadVars {
  nd::Var mu_weight;  // [C, C, 1, 1, 1]
  nd::Var mu_bias;    // [C]
  nd::Var log_sigma;  // [C]
};

// Sum over c, d, h, w of log sigma_c + (d_f - mu)^2 / (2 sigma_c^2).
nd::Var variational_nll(nd::Var d_f, nd::Var mu, nd::Var log_sigma);

// pairs[b][k]: sample b, level k. Returns
//   sum_k gamma_k * mean_b(variational_nll(d_f, mu_k(d_m), log_sigma_k)) / N_k
// with N_k the element count of level k.
nd::Var mi_transfer_loss(const std::vector<std::vector<FeaturePair>>& pairs,
                         const std::vector<HeadVars>& heads,
                         const std::vector<double>& gammas);

}  // namespace divseg::distill
