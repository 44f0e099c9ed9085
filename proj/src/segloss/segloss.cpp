#include "segloss/segloss.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "common/error.hpp"

namespace divseg::seg {

nd::Var dice_loss(nd::Var pred_probs, nd::Var one_hot) {
  const nd::Shape shape = pred_probs.shape();
  if (shape != one_hot.shape()) {
    throw ShapeError("dice_loss: prediction " + nd::to_string(shape) + " vs labels " +
                     nd::to_string(one_hot.shape()));
  }
  if (shape.size() < 2) throw ShapeError("dice_loss: expected [J, ...] input");
  std::vector<std::size_t> spatial(shape.size() - 1);
  std::iota(spatial.begin(), spatial.end(), 1);

  const nd::Var inter = nd::sum(pred_probs * one_hot, spatial) + kDiceEps;
  const nd::Var denom = nd::sum(pred_probs * pred_probs, spatial) +
                        nd::sum(one_hot * one_hot, spatial) + kDiceEps;
  const double j = double(shape[0]);
  return 1.0 - nd::sum(inter / denom) * (2.0 / j);
}

LossBreakdown total_loss(double dice, double mi, double hd, double lambda_mi,
                         double lambda_hd) {
  return {dice, mi, hd, dice + lambda_mi * mi + lambda_hd * hd, lambda_mi, lambda_hd};
}

std::string RegionSpec::name() const {
  switch (region) {
    case Region::WT: return "WT";
    case Region::TC: return "TC";
    case Region::ET: return "ET";
  }
  return "?";
}

bool RegionSpec::contains(int label) const {
  return std::find(classes.begin(), classes.end(), label) != classes.end();
}

const std::array<RegionSpec, 3>& standard_regions() {
  static const std::array<RegionSpec, 3> regions{{
      {Region::WT, {1, 2, 3}},
      {Region::TC, {2, 3}},
      {Region::ET, {3}},
  }};
  return regions;
}

DscResult dsc_detail(const nd::Tensor& pred_labels, const nd::Tensor& gt_labels,
                     const RegionSpec& region) {
  if (pred_labels.shape() != gt_labels.shape()) {
    throw ShapeError("dsc_metric: prediction " + nd::to_string(pred_labels.shape()) +
                     " vs ground truth " + nd::to_string(gt_labels.shape()));
  }
  std::size_t p = 0, g = 0, both = 0;
  for (std::size_t i = 0; i < pred_labels.numel(); ++i) {
    const bool in_p = region.contains(static_cast<int>(pred_labels[i]));
    const bool in_g = region.contains(static_cast<int>(gt_labels[i]));
    p += in_p;
    g += in_g;
    both += in_p && in_g;
  }
  if (p + g == 0) return {1.0, true};
  return {2.0 * double(both) / double(p + g), false};
}

double dsc_metric(const nd::Tensor& pred_labels, const nd::Tensor& gt_labels,
                  const RegionSpec& region) {
  return dsc_detail(pred_labels, gt_labels, region).value;
}

nd::Tensor argmax_labels(const nd::Tensor& logits) {
  const nd::Shape& s = logits.shape();
  if (s.size() < 2) throw ShapeError("argmax_labels: expected [J, ...] input");
  const std::size_t j = s[0];
  const std::size_t n = logits.numel() / j;
  nd::Tensor out(nd::Shape(s.begin() + 1, s.end()));
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < j; ++c) {
      if (logits[c * n + i] > logits[best * n + i]) best = c;
    }
    out[i] = double(best);
  }
  return out;
}

nd::Tensor one_hot(const nd::Tensor& labels, std::size_t classes) {
  nd::Shape shape{classes};
  shape.insert(shape.end(), labels.shape().begin(), labels.shape().end());
  nd::Tensor out(shape, 0.0);
  const std::size_t n = labels.numel();
  for (std::size_t i = 0; i < n; ++i) {
    const double c = labels[i];
    if (c < 0 || c >= double(classes) || c != std::floor(c)) {
      throw DomainError("one_hot: label " + std::to_string(c) + " out of range");
    }
    out[static_cast<std::size_t>(c) * n + i] = 1.0;
  }
  return out;
}

}  // namespace divseg::seg
