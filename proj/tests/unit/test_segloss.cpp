#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "common/error.hpp"
#include "segloss/segloss.hpp"
#include "support/fd.hpp"
#include "support/prob.hpp"

using namespace divseg;
using namespace divseg::seg;
using nd::Shape;
using nd::Tape;
using nd::Tensor;
using nd::Var;

namespace {

double dice_value(const Tensor& p, const Tensor& y) {
  Tape tape;
  return dice_loss(tape.constant(p), tape.constant(y)).value().item();
}

double dice_loop(const Tensor& p, const Tensor& y) {
  const std::size_t j = p.extent(0), n = p.numel() / j;
  double s = 0.0;
  for (std::size_t c = 0; c < j; ++c) {
    double num = kDiceEps, den = kDiceEps;
    for (std::size_t i = 0; i < n; ++i) {
      num += p[c * n + i] * y[c * n + i];
      den += p[c * n + i] * p[c * n + i] + y[c * n + i] * y[c * n + i];
    }
    s += num / den;
  }
  return 1.0 - 2.0 / double(j) * s;
}

Tensor random_probs(std::size_t j, Shape spatial, std::mt19937_64& rng) {
  Shape shape{j};
  shape.insert(shape.end(), spatial.begin(), spatial.end());
  Tensor t(shape);
  const std::size_t n = t.numel() / j;
  for (std::size_t i = 0; i < n; ++i) {
    auto p = divseg::testing::interior_prob(j, rng);
    for (std::size_t c = 0; c < j; ++c) t[c * n + i] = p[c];
  }
  return t;
}

Tensor labels_from(std::vector<double> v) {
  const std::size_t n = v.size();
  return Tensor({1, 1, n}, std::move(v));
}

}  // namespace

TEST(DiceLoss, PerfectPrediction) {
  Tensor y = one_hot(labels_from({0, 1, 2, 3, 1, 0}), 4);
  EXPECT_NEAR(dice_value(y, y), 0.0, 1e-4);
}

TEST(DiceLoss, DisjointPrediction) {
  Tensor y = one_hot(labels_from({0, 0, 1, 1}), 2);
  Tensor p = one_hot(labels_from({1, 1, 0, 0}), 2);
  EXPECT_NEAR(dice_value(p, y), 1.0, 1e-4);
}

TEST(DiceLoss, AbsentClassTermIsOne) {
  // Class 2 absent in both: its ratio is eps/eps = 1. Present classes that
  // match exactly give (n + eps) / (2n + eps).
  Tensor y = one_hot(labels_from({0, 1, 1, 0}), 3);
  const double present = (2 + kDiceEps) / (4 + kDiceEps);
  EXPECT_NEAR(dice_value(y, y), 1.0 - 2.0 / 3.0 * (2 * present + 1.0), 1e-15);
  Tensor p = one_hot(labels_from({1, 0, 0, 1}), 3);
  const double miss = kDiceEps / (4 + kDiceEps);
  EXPECT_NEAR(dice_value(p, y), 1.0 - 2.0 / 3.0 * (2 * miss + 1.0), 1e-15);
}

TEST(DiceLoss, MatchesLoop) {
  std::mt19937_64 rng(31);
  Tensor p = random_probs(4, {2, 3, 2}, rng);
  Tensor y = random_probs(4, {2, 3, 2}, rng);
  EXPECT_NEAR(dice_value(p, y), dice_loop(p, y), 1e-14);
}

TEST(DiceLoss, ShapeMismatch) {
  Tape tape;
  EXPECT_THROW(dice_loss(tape.constant(Tensor({2, 2, 2})), tape.constant(Tensor({3, 2, 2}))),
               ShapeError);
}

TEST(DiceLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(32);
  Tensor y = one_hot(labels_from({0, 1, 2, 3, 2, 1, 0, 3}), 4);
  for (int t = 0; t < 3; ++t) {
    auto r = divseg::testing::check_gradients(
        {divseg::testing::random_tensor({4, 1, 1, 8}, rng)}, [&](Tape& tape, const std::vector<Var>& v) {
          return dice_loss(nd::softmax(v[0], 0), tape.constant(y));
        });
    EXPECT_GT(r.checked, 0u);
    EXPECT_LT(r.max_rel_err, 1e-4);
  }
}

// Projected gradient descent from interior points approaches the labels.
TEST(DiceLoss, MinimizedAtLabels) {
  std::mt19937_64 rng(33);
  Tensor y = random_probs(3, {1, 1, 4}, rng);
  const double at_y = dice_value(y, y);
  for (int t = 0; t < 200; ++t) {
    Tensor p = random_probs(3, {1, 1, 4}, rng);
    EXPECT_GE(dice_value(p, y), at_y - 1e-12);
  }
  for (int t = 0; t < 20; ++t) {
    Tensor p = y;
    std::uniform_real_distribution<double> u(-0.01, 0.01);
    for (std::size_t i = 0; i < 4; ++i) {
      const double d = u(rng);
      p[0 * 4 + i] += d;
      p[1 * 4 + i] -= d;
    }
    EXPECT_GE(dice_value(p, y), at_y - 1e-12);
  }
}

TEST(TotalLoss, Arithmetic) {
  EXPECT_EQ(total_loss(0.5, 0, 0).total, 0.5);
  EXPECT_EQ(total_loss(0.7, 0.3, 0.4, 0, 0).total, 0.7);
  EXPECT_NEAR(total_loss(0.2, 0.3, 0.1).total, 0.6, 1e-15);
  std::mt19937_64 rng(34);
  std::uniform_real_distribution<double> u(0, 3);
  for (int t = 0; t < 100; ++t) {
    const double d = u(rng), m = u(rng), h = u(rng), lm = u(rng), lh = u(rng);
    auto b = total_loss(d, m, h, lm, lh);
    EXPECT_NEAR(b.total, d + lm * m + lh * h, 1e-12);
  }
}

TEST(Dsc, Examples) {
  const auto& wt = standard_regions()[0];
  Tensor g = labels_from({1, 2, 3, 0});
  EXPECT_EQ(dsc_metric(g, g, wt), 1.0);

  std::vector<double> pv(20, 0), gv(20, 0);
  for (int i = 0; i < 10; ++i) pv[i] = 1;
  for (int i = 5; i < 15; ++i) gv[i] = 1;
  EXPECT_DOUBLE_EQ(dsc_metric(labels_from(pv), labels_from(gv), wt), 0.5);

  auto empty = dsc_detail(labels_from({0, 1}), labels_from({1, 0}), standard_regions()[2]);
  EXPECT_EQ(empty.value, 1.0);
  EXPECT_TRUE(empty.both_empty);
  EXPECT_THROW(dsc_metric(labels_from({0}), labels_from({0, 1}), wt), ShapeError);
}

TEST(Dsc, SymmetricAndMonotoneInOverlap) {
  std::mt19937_64 rng(35);
  std::uniform_int_distribution<int> cls(0, 3);
  for (int t = 0; t < 100; ++t) {
    std::vector<double> a(27), b(27);
    for (auto& v : a) v = cls(rng);
    for (auto& v : b) v = cls(rng);
    for (const auto& r : standard_regions()) {
      EXPECT_EQ(dsc_metric(labels_from(a), labels_from(b), r),
                dsc_metric(labels_from(b), labels_from(a), r));
    }
  }
  const auto& et = standard_regions()[2];
  double prev = -1;
  for (int shift = 10; shift >= 0; --shift) {
    std::vector<double> p(30, 0), g(30, 0);
    for (int i = 0; i < 10; ++i) {
      p[i] = 3;
      g[i + shift] = 3;
    }
    const double d = dsc_metric(labels_from(p), labels_from(g), et);
    EXPECT_GE(d, prev);
    prev = d;
  }
  EXPECT_EQ(prev, 1.0);
}

TEST(Regions, Nesting) {
  const auto& r = standard_regions();
  EXPECT_EQ(r[0].name(), "WT");
  EXPECT_EQ(r[1].name(), "TC");
  EXPECT_EQ(r[2].name(), "ET");
  for (int c = 0; c < 4; ++c) {
    if (r[2].contains(c)) EXPECT_TRUE(r[1].contains(c));
    if (r[1].contains(c)) EXPECT_TRUE(r[0].contains(c));
  }
  EXPECT_FALSE(r[0].contains(0));
}

TEST(Argmax, TiesGoToLowestIndex) {
  Tensor logits({3, 1, 1, 3}, std::vector<double>{1, 0, 5, 1, 2, 5, 0, 2, 5});
  Tensor labels = argmax_labels(logits);
  EXPECT_EQ(labels.shape(), (Shape{1, 1, 3}));
  EXPECT_EQ(labels[0], 0);
  EXPECT_EQ(labels[1], 1);
  EXPECT_EQ(labels[2], 0);
}
