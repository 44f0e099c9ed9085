#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "common/error.hpp"
#include "divergences/divergence.hpp"
#include "support/fd.hpp"
#include "support/prob.hpp"

using namespace divseg;
using namespace divseg::div;
using nd::Shape;
using nd::Tape;
using nd::Tensor;
using nd::Var;
using divseg::testing::dirichlet;
using divseg::testing::interior_prob;

namespace {

constexpr Divergence kFKinds[] = {
    Divergence::TotalVariation, Divergence::SquaredHellinger,
    Divergence::KullbackLeibler, Divergence::NeymanChi2,
    Divergence::JensenShannon};

double cauchy_schwarz(const std::vector<double>& p, const std::vector<double>& q) {
  long double pq = 0, pp = 0, qq = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pq += (long double)p[i] * q[i];
    pp += (long double)p[i] * p[i];
    qq += (long double)q[i] * q[i];
  }
  return double(-std::log(pq / std::sqrt(pp * qq)));
}

// Per-voxel reference built from the scalar op.
double voxel_loop(const Tensor& logits, const Tensor& labels, Divergence kind,
                  HolderExponents e) {
  const std::size_t j = logits.extent(0);
  const std::size_t n = logits.numel() / j;
  double total = 0.0;
  for (std::size_t v = 0; v < n; ++v) {
    double mx = -1e300;
    for (std::size_t c = 0; c < j; ++c) mx = std::max(mx, logits[c * n + v]);
    std::vector<double> p(j), q(j);
    double z = 0.0;
    for (std::size_t c = 0; c < j; ++c) z += (p[c] = std::exp(logits[c * n + v] - mx));
    for (std::size_t c = 0; c < j; ++c) {
      p[c] /= z;
      q[c] = labels[c * n + v];
    }
    total += kind == Divergence::Holder ? hpd(ProbVector(p), ProbVector(q), e)
                                        : f_divergence(kind, ProbVector(p), ProbVector(q));
  }
  return total / double(n);
}

double loss_value(const Tensor& logits, const Tensor& labels, Divergence kind,
                  HolderExponents e) {
  Tape tape;
  return voxel_divergence_loss(tape.constant(logits), tape.constant(labels), kind, e)
      .value()
      .item();
}

Tensor random_labels(Shape spatial, std::size_t classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, int(classes) - 1);
  Tensor t(std::move(spatial));
  for (double& v : t.data()) v = u(rng);
  return smooth_one_hot(t, classes);
}

}  // namespace

TEST(ProbVector, ClampsWithoutRenormalizing) {
  ProbVector p({1.0, 0.0});
  EXPECT_EQ(p[0], 1.0);
  EXPECT_EQ(p[1], kProbEps);
}

TEST(ProbVector, RejectsBadSum) {
  EXPECT_THROW(ProbVector({0.5, 0.6}), DomainError);
  EXPECT_NO_THROW(ProbVector({0.5, 0.5 + 5e-7}));
}

TEST(HolderExponents, Conjugate) {
  for (double a : {1.05, 1.1, 1.2, 2.0, 5.0}) {
    auto e = HolderExponents::from_alpha(a);
    EXPECT_NEAR(1.0 / e.alpha + 1.0 / e.beta, 1.0, 1e-12);
    EXPECT_GT(e.beta, 1.0);
  }
  EXPECT_THROW(HolderExponents::from_alpha(1.0), DomainError);
  EXPECT_THROW(HolderExponents::from_alpha(0.5), DomainError);
}

TEST(Hpd, UniformPairIsZero) {
  ProbVector u({0.5, 0.5});
  for (double a : {1.05, 1.1, 2.0, 5.0}) {
    EXPECT_NEAR(hpd(u, u, HolderExponents::from_alpha(a)), 0.0, 1e-15);
  }
}

TEST(Hpd, NonzeroAtEqualNonUniformPair) {
  ProbVector p({0.8, 0.2});
  // Standalone evaluation of the closed form in extended precision.
  EXPECT_NEAR(hpd(p, p, HolderExponents::from_alpha(1.1)), 0.11838687403637431, 1e-12);
  EXPECT_NEAR(hpd(p, p, HolderExponents::from_alpha(1.1)), 0.1184, 5e-5);
}

TEST(Hpd, AlphaTwoIsCauchySchwarz) {
  std::mt19937_64 rng(11);
  const auto e = HolderExponents::from_alpha(2.0);
  for (int t = 0; t < 1000; ++t) {
    auto p = interior_prob(5, rng), q = interior_prob(5, rng);
    ASSERT_NEAR(hpd(ProbVector(p), ProbVector(q), e), cauchy_schwarz(p, q), 1e-12);
  }
}

TEST(Hpd, LengthMismatch) {
  EXPECT_THROW(hpd(ProbVector({1.0}), ProbVector({0.5, 0.5}), HolderExponents::from_alpha(2)),
               ShapeError);
}

TEST(Hpd, NonNegative) {
  std::mt19937_64 rng(12);
  for (double a : {1.05, 1.1, 1.2, 2.0, 5.0}) {
    const auto e = HolderExponents::from_alpha(a);
    for (int t = 0; t < 10000; ++t) {
      const std::size_t j = 2 + t % 4;
      ProbVector p(dirichlet(j, 0.5, rng)), q(dirichlet(j, 0.5, rng));
      ASSERT_GE(hpd(p, q, e), -1e-9) << "alpha " << a;
    }
  }
}

TEST(Hpd, EqualityCondition) {
  std::mt19937_64 rng(13);
  for (double a : {1.05, 1.1, 1.2, 2.0, 5.0}) {
    const auto e = HolderExponents::from_alpha(a);
    for (int t = 0; t < 200; ++t) {
      auto p = interior_prob(4, rng);
      std::vector<double> q(4);
      double z = 0.0;
      for (std::size_t i = 0; i < 4; ++i) z += (q[i] = std::pow(p[i], e.alpha / e.beta));
      for (double& v : q) v /= z;
      ASSERT_NEAR(hpd(ProbVector(p), ProbVector(q), e), 0.0, 1e-9);
    }
  }
}

TEST(Hpd, Asymmetric) {
  ProbVector p({0.7, 0.2, 0.1}), q({0.1, 0.3, 0.6});
  const auto e = HolderExponents::from_alpha(1.1);
  EXPECT_GT(std::abs(hpd(p, q, e) - hpd(q, p, e)), 1e-3);
}

// Moving the prediction toward the label along the simplex segment should not
// increase the divergence near the end of the path. Checked for alpha = 2 on
// arbitrary pairs and for the training exponents on prediction/label pairs.
TEST(Hpd, MonotoneRefinementNearLabel) {
  std::mt19937_64 rng(14);
  auto check = [&](const std::vector<double>& p0, const std::vector<double>& q, double a) {
    const auto e = HolderExponents::from_alpha(a);
    double prev = 1e300;
    for (int s = 0; s <= 20; ++s) {
      const double t = 0.9 + 0.1 * s / 20.0;
      std::vector<double> p(p0.size());
      for (std::size_t i = 0; i < p.size(); ++i) p[i] = (1 - t) * p0[i] + t * q[i];
      const double d = hpd(ProbVector(p), ProbVector(q), e);
      if (d > prev + 1e-12) return false;
      prev = d;
    }
    return true;
  };
  for (int t = 0; t < 2000; ++t) {
    ASSERT_TRUE(check(dirichlet(4, 1.0, rng), dirichlet(4, 1.0, rng), 2.0));
  }
  for (double a : {1.05, 1.1}) {
    for (int t = 0; t < 2000; ++t) {
      std::vector<double> label(4, kLabelSmoothing / 3);
      label[t % 4] = 1 - kLabelSmoothing;
      ASSERT_TRUE(check(dirichlet(4, 1.0, rng), label, a)) << "alpha " << a;
    }
  }
}

TEST(FDivergence, TotalVariationDisjoint) {
  EXPECT_NEAR(f_divergence(Divergence::TotalVariation, ProbVector({1, 0}), ProbVector({0, 1})),
              1.0, 2e-7);
}

TEST(FDivergence, KullbackLeiblerClosedForm) {
  EXPECT_NEAR(f_divergence(Divergence::KullbackLeibler, ProbVector({0.5, 0.5}),
                           ProbVector({0.25, 0.75})),
              0.5 * std::log(4.0 / 3.0), 1e-15);
  EXPECT_NEAR(0.5 * std::log(4.0 / 3.0), 0.14384, 5e-6);
}

TEST(FDivergence, ClosedFormsOnOnePair) {
  const std::vector<double> p{0.6, 0.3, 0.1}, q{0.2, 0.5, 0.3};
  double tv = 0, sh = 0, ne = 0, js = 0;
  for (int i = 0; i < 3; ++i) {
    const double m = (p[i] + q[i]) / 2;
    tv += std::abs(p[i] - q[i]) / 2;
    sh += std::pow(std::sqrt(p[i]) - std::sqrt(q[i]), 2);
    ne += std::pow(p[i] - q[i], 2) / p[i];
    js += 0.5 * p[i] * std::log(p[i] / m) + 0.5 * q[i] * std::log(q[i] / m);
  }
  ProbVector pp(p), qq(q);
  EXPECT_NEAR(f_divergence(Divergence::TotalVariation, pp, qq), tv, 1e-15);
  EXPECT_NEAR(f_divergence(Divergence::SquaredHellinger, pp, qq), sh, 1e-15);
  EXPECT_NEAR(f_divergence(Divergence::NeymanChi2, pp, qq), ne, 1e-14);
  EXPECT_NEAR(f_divergence(Divergence::JensenShannon, pp, qq), js, 1e-15);
}

TEST(FDivergence, ZeroAtEqualPositiveElsewhere) {
  std::mt19937_64 rng(15);
  for (int t = 0; t < 2000; ++t) {
    ProbVector p(dirichlet(4, 0.7, rng)), q(dirichlet(4, 0.7, rng));
    for (Divergence k : kFKinds) {
      ASSERT_NEAR(f_divergence(k, p, p), 0.0, 1e-12) << to_string(k);
      ASSERT_GE(f_divergence(k, p, q), 0.0) << to_string(k);
    }
    ASSERT_LE(f_divergence(Divergence::JensenShannon, p, q), std::log(2.0) + 1e-9);
  }
}

TEST(FDivergence, RejectsHolderAndUnknownNames) {
  EXPECT_THROW(f_divergence(Divergence::Holder, ProbVector({1.0}), ProbVector({1.0})),
               ConfigError);
  EXPECT_THROW(parse_divergence("renyi"), ConfigError);
  for (Divergence k : kFKinds) EXPECT_EQ(parse_divergence(to_string(k)), k);
  EXPECT_EQ(parse_divergence("holder"), Divergence::Holder);
}

TEST(SmoothOneHot, Values) {
  Tensor labels({2}, std::vector<double>{0, 3});
  Tensor q = smooth_one_hot(labels, 4);
  EXPECT_EQ(q.shape(), (Shape{4, 2}));
  EXPECT_DOUBLE_EQ(q[0 * 2 + 0], 0.95);
  EXPECT_DOUBLE_EQ(q[1 * 2 + 0], 0.05 / 3);
  EXPECT_DOUBLE_EQ(q[3 * 2 + 1], 0.95);
  EXPECT_THROW(smooth_one_hot(Tensor({1}, 4.0), 4), DomainError);
}

TEST(VoxelLoss, UniformLabelMatchedIsZero) {
  Tensor logits({3, 2, 2, 2}, 0.7);
  Tensor labels({3, 2, 2, 2}, 1.0 / 3);
  for (double a : {1.05, 1.1, 2.0}) {
    EXPECT_NEAR(loss_value(logits, labels, Divergence::Holder, HolderExponents::from_alpha(a)),
                0.0, 1e-15);
  }
}

TEST(VoxelLoss, SingleVoxelReducesToHpd) {
  Tensor logits({2, 1, 1, 1}, 0.0);
  Tensor labels({2, 1, 1, 1}, std::vector<double>{0.95, 0.05});
  const auto e = HolderExponents::from_alpha(1.1);
  EXPECT_DOUBLE_EQ(loss_value(logits, labels, Divergence::Holder, e),
                   hpd(ProbVector({0.5, 0.5}), ProbVector({0.95, 0.05}), e));
}

TEST(VoxelLoss, MatchesPerVoxelLoop) {
  std::mt19937_64 rng(16);
  const auto e = HolderExponents::from_alpha(1.1);
  auto logits = divseg::testing::random_tensor({4, 2, 2, 2}, rng);
  auto labels = random_labels({2, 2, 2}, 4, rng);
  EXPECT_NEAR(loss_value(logits, labels, Divergence::Holder, e),
              voxel_loop(logits, labels, Divergence::Holder, e), 1e-12);
  for (Divergence k : kFKinds) {
    EXPECT_NEAR(loss_value(logits, labels, k, e), voxel_loop(logits, labels, k, e), 1e-12)
        << to_string(k);
    EXPECT_GE(loss_value(logits, labels, k, e), -1e-9);
  }
}

TEST(VoxelLoss, ShapeMismatch) {
  Tape tape;
  EXPECT_THROW(voxel_divergence_loss(tape.constant(Tensor({2, 2, 2, 2})),
                                     tape.constant(Tensor({3, 2, 2, 2})), Divergence::Holder,
                                     HolderExponents::from_alpha(1.1)),
               ShapeError);
}

TEST(VoxelLoss, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  const auto labels = random_labels({2, 2, 2}, 4, rng);
  std::vector<Divergence> kinds(std::begin(kFKinds), std::end(kFKinds));
  kinds.push_back(Divergence::Holder);
  for (double a : {1.1, 2.0}) {
    const auto e = HolderExponents::from_alpha(a);
    for (Divergence k : kinds) {
      auto r = divseg::testing::check_gradients(
          {divseg::testing::random_tensor({4, 2, 2, 2}, rng)},
          [&](Tape& t, const std::vector<Var>& v) {
            return voxel_divergence_loss(v[0], t.constant(labels), k, e);
          });
      EXPECT_GT(r.checked, 0u);
      EXPECT_LT(r.max_rel_err, 1e-4) << to_string(k) << " alpha " << a;
    }
  }
}
