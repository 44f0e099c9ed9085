#pragma once

#include <array>
#include <string>
#include <vector>

#include "ndtensor/ops.hpp"

namespace divseg::seg {

inline constexpr double kDiceEps = 1e-5;

// 1 - (2/J) sum_j (sum_i p_ij y_ij + eps) / (sum_i p_ij^2 + sum_i y_ij^2 + eps)
// over [J, ...] inputs.
nd::Var dice_loss(nd::Var pred_probs, nd::Var one_hot);

struct LossBreakdown {
  double dice = 0.0;
  double mi = 0.0;
  double hd = 0.0;
  double total = 0.0;
  double lambda_mi = 1.0;
  double lambda_hd = 1.0;
};

LossBreakdown total_loss(double dice, double mi, double hd, double lambda_mi = 1.0,
                         double lambda_hd = 1.0);

enum class Region { WT, TC, ET };

struct RegionSpec {
  Region region;
  std::vector<int> classes;

  std::string name() const;
  bool contains(int label) const;
};

// WT = {1,2,3}, TC = {2,3}, ET = {3}, in that order.
const std::array<RegionSpec, 3>& standard_regions();

struct DscResult {
  double value = 1.0;
  bool both_empty = false;
};

// Overlap of the region binarizations of two integer label volumes. Both
// empty counts as perfect agreement.
DscResult dsc_detail(const nd::Tensor& pred_labels, const nd::Tensor& gt_labels,
                     const RegionSpec& region);
double dsc_metric(const nd::Tensor& pred_labels, const nd::Tensor& gt_labels,
                  const RegionSpec& region);

// Class index of the largest logit along axis 0 of [J, ...]; ties go to the
// lowest index.
nd::Tensor argmax_labels(const nd::Tensor& logits);

// Exact one-hot [J, ...] from an integer label volume.
nd::Tensor one_hot(const nd::Tensor& labels, std::size_t classes);

}  // namespace divseg::seg
