#include "divergences/divergence.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <utility>

#include "common/error.hpp"

namespace divseg::div {

namespace {

constexpr std::array<std::pair<Divergence, std::string_view>, 6> kNames{{
    {Divergence::Holder, "holder"},
    {Divergence::TotalVariation, "total_variation"},
    {Divergence::SquaredHellinger, "squared_hellinger"},
    {Divergence::KullbackLeibler, "kullback_leibler"},
    {Divergence::NeymanChi2, "neyman_chi2"},
    {Divergence::JensenShannon, "jensen_shannon"},
}};

void require_same_length(const ProbVector& p, const ProbVector& q, const char* op) {
  if (p.size() != q.size()) {
    throw ShapeError(std::string(op) + ": length mismatch " +
                     std::to_string(p.size()) + " vs " + std::to_string(q.size()));
  }
}

double kl(const ProbVector& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

}  // namespace

ProbVector::ProbVector(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw ShapeError("ProbVector: empty");
  const double total = std::accumulate(values_.begin(), values_.end(), 0.0);
  if (!std::isfinite(total) || std::abs(total - 1.0) > 1e-6) {
    throw DomainError("ProbVector: entries sum to " + std::to_string(total));
  }
  for (double& v : values_) {
    if (v < -1e-12 || v > 1.0 + 1e-12) {
      throw DomainError("ProbVector: entry outside [0, 1]");
    }
    v = std::clamp(v, kProbEps, 1.0);
  }
}

HolderExponents HolderExponents::from_alpha(double alpha) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    throw DomainError("Holder exponent alpha must be > 1, got " + std::to_string(alpha));
  }
  return {alpha, alpha / (alpha - 1.0)};
}

std::string to_string(Divergence kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return std::string(name);
  }
  throw ConfigError("unknown divergence kind");
}

Divergence parse_divergence(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  throw ConfigError("unknown divergence '" + std::string(name) + "'");
}

bool is_f_divergence(Divergence kind) {
  switch (kind) {
    case Divergence::TotalVariation:
    case Divergence::SquaredHellinger:
    case Divergence::KullbackLeibler:
    case Divergence::NeymanChi2:
    case Divergence::JensenShannon:
      return true;
    default:
      return false;
  }
}

double hpd(const ProbVector& p, const ProbVector& q, HolderExponents e) {
  require_same_length(p, q, "hpd");
  double pq = 0.0, pa = 0.0, qb = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    pq += p[i] * q[i];
    pa += std::pow(p[i], e.alpha);
    qb += std::pow(q[i], e.beta);
  }
  return -std::log(pq) + std::log(pa) / e.alpha + std::log(qb) / e.beta;
}

double f_divergence(Divergence kind, const ProbVector& p, const ProbVector& q) {
  require_same_length(p, q, "f_divergence");
  const std::size_t n = p.size();
  double s = 0.0;
  switch (kind) {
    case Divergence::TotalVariation:
      for (std::size_t i = 0; i < n; ++i) s += std::abs(p[i] - q[i]);
      return 0.5 * s;
    case Divergence::SquaredHellinger:
      for (std::size_t i = 0; i < n; ++i) {
        const double d = std::sqrt(p[i]) - std::sqrt(q[i]);
        s += d * d;
      }
      return s;
    case Divergence::KullbackLeibler:
      return kl(p, q.values());
    case Divergence::NeymanChi2:
      for (std::size_t i = 0; i < n; ++i) s += (p[i] - q[i]) * (p[i] - q[i]) / p[i];
      return s;
    case Divergence::JensenShannon: {
      std::vector<double> m(n);
      for (std::size_t i = 0; i < n; ++i) m[i] = 0.5 * (p[i] + q[i]);
      return 0.5 * kl(p, m) + 0.5 * kl(q, m);
    }
    default:
      throw ConfigError("f_divergence: '" + to_string(kind) + "' is not an f-divergence");
  }
}

nd::Var voxel_divergence_loss(nd::Var logits, nd::Var label_probs,
                              Divergence kind, HolderExponents e) {
  using namespace nd;
  if (logits.shape() != label_probs.shape()) {
    throw ShapeError("voxel_divergence_loss: logits " + nd::to_string(logits.shape()) +
                     " vs labels " + nd::to_string(label_probs.shape()));
  }
  if (logits.shape().size() < 2) {
    throw ShapeError("voxel_divergence_loss: expected [J, ...] volume");
  }
  const Var p = clamp(softmax(logits, 0), kProbEps, 1.0);
  const Var q = clamp(label_probs, kProbEps, 1.0);
  auto over_classes = [](Var v) { return sum(v, {0}); };

  Var per_voxel;
  switch (kind) {
    case Divergence::Holder:
      per_voxel = log(over_classes(pow(p, e.alpha))) * (1.0 / e.alpha) +
                  log(over_classes(pow(q, e.beta))) * (1.0 / e.beta) -
                  log(over_classes(p * q));
      break;
    case Divergence::TotalVariation:
      per_voxel = over_classes(abs(p - q)) * 0.5;
      break;
    case Divergence::SquaredHellinger: {
      const Var d = pow(p, 0.5) - pow(q, 0.5);
      per_voxel = over_classes(d * d);
      break;
    }
    case Divergence::KullbackLeibler:
      per_voxel = over_classes(p * (log(p) - log(q)));
      break;
    case Divergence::NeymanChi2: {
      const Var d = p - q;
      per_voxel = over_classes(d * d / p);
      break;
    }
    case Divergence::JensenShannon: {
      const Var log_m = log((p + q) * 0.5);
      per_voxel = over_classes(p * (log(p) - log_m)) * 0.5 +
                  over_classes(q * (log(q) - log_m)) * 0.5;
      break;
    }
    default:
      throw ConfigError("voxel_divergence_loss: unknown divergence kind");
  }
  return mean(per_voxel);
}

nd::Tensor smooth_one_hot(const nd::Tensor& labels, std::size_t classes, double tau) {
  if (classes < 2) throw ConfigError("smooth_one_hot: need at least 2 classes");
  if (!(tau >= 0.0 && tau < 1.0)) throw ConfigError("smooth_one_hot: tau must be in [0, 1)");
  nd::Shape shape{classes};
  shape.insert(shape.end(), labels.shape().begin(), labels.shape().end());
  const double off = tau / double(classes - 1);
  nd::Tensor out(shape, off);
  const std::size_t n = labels.numel();
  auto dst = out.data();
  for (std::size_t i = 0; i < n; ++i) {
    const double c = labels[i];
    if (c < 0 || c >= double(classes) || c != std::floor(c)) {
      throw DomainError("smooth_one_hot: label " + std::to_string(c) + " out of range");
    }
    dst[static_cast<std::size_t>(c) * n + i] = 1.0 - tau;
  }
  return out;
}

}  // namespace divseg::div
