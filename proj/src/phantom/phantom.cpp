#include "phantom/phantom.hpp"

#include <cmath>
#include <random>

#include "common/error.hpp"

namespace divseg::phantom {

namespace {

// Healthy tissue level inside the brain, per modality.
constexpr std::array<double, kModalityCount> kTissue{0.35, 0.45, 0.30, 0.55};

std::array<double, 3> to_array(const Dims& d) {
  return {double(d.d), double(d.h), double(d.w)};
}

void standardize(nd::Tensor& t) {
  const double n = double(t.numel());
  double mean = 0.0;
  for (double v : t.data()) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : t.data()) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  for (double& v : t.data()) v = (v - mean) / sd;
}

}  // namespace

bool Ellipsoid::contains(double z, double y, double x) const {
  const double p[3] = {z, y, x};
  double s = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double r = (p[k] - center[k]) / axes[k];
    s += r * r;
  }
  return s <= 1.0;
}

const std::array<std::array<double, 4>, kModalityCount>& contrast_table() {
  static const std::array<std::array<double, 4>, kModalityCount> table{{
      {0.0, 1.00, 0.60, 0.70},  // Fl
      {0.0, 0.50, 0.60, 0.50},  // T2
      {0.0, 0.10, 0.30, 1.20},  // T1c
      {0.0, 0.15, 0.25, 0.20},  // T1
  }};
  return table;
}

Sample generate_phantom(std::uint64_t seed, Dims dims) {
  if (dims.d < 8 || dims.h < 8 || dims.w < 8) {
    throw ConfigError("phantom dims must be at least 8 per axis");
  }
  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const auto ext = to_array(dims);

  Sample s;
  s.id = "phantom_" + std::to_string(seed);
  for (int k = 0; k < 3; ++k) {
    s.brain.center[k] = ext[k] / 2.0;
    s.brain.axes[k] = 0.45 * ext[k];
  }
  // Edema sits inside the brain with a margin; inner regions shrink and
  // drift a little toward one side, as real cores rarely sit dead center.
  for (int k = 0; k < 3; ++k) {
    s.edema.axes[k] = uniform(0.22, 0.32) * ext[k];
    const double room = 0.45 * ext[k] - s.edema.axes[k] - 1.0;
    s.edema.center[k] = ext[k] / 2.0 + uniform(-0.5, 0.5) * room;
  }
  for (int k = 0; k < 3; ++k) {
    s.core.axes[k] = uniform(0.55, 0.7) * s.edema.axes[k];
    s.core.center[k] = s.edema.center[k] + uniform(-0.15, 0.15) * s.edema.axes[k];
    s.enhancing.axes[k] = uniform(0.55, 0.7) * s.core.axes[k];
    s.enhancing.center[k] = s.core.center[k] + uniform(-0.15, 0.15) * s.core.axes[k];
  }

  s.labels = nd::Tensor({dims.d, dims.h, dims.w});
  std::vector<bool> in_brain(s.labels.numel());
  std::size_t i = 0;
  for (std::size_t z = 0; z < dims.d; ++z) {
    for (std::size_t y = 0; y < dims.h; ++y) {
      for (std::size_t x = 0; x < dims.w; ++x, ++i) {
        const double cz = z + 0.5, cy = y + 0.5, cx = x + 0.5;
        int label = 0;
        if (s.edema.contains(cz, cy, cx)) {
          label = 1;
          if (s.core.contains(cz, cy, cx)) {
            label = 2;
            if (s.enhancing.contains(cz, cy, cx)) label = 3;
          }
        }
        s.labels[i] = label;
        in_brain[i] = s.brain.contains(cz, cy, cx);
      }
    }
  }

  std::normal_distribution<double> noise(0.0, kNoiseSigma);
  const auto& contrast = contrast_table();
  for (int m = 0; m < kModalityCount; ++m) {
    nd::Tensor v({1, dims.d, dims.h, dims.w});
    for (std::size_t j = 0; j < v.numel(); ++j) {
      const int label = static_cast<int>(s.labels[j]);
      const double base = in_brain[j] ? kTissue[m] : 0.0;
      v[j] = base + contrast[m][label] + noise(rng);
    }
    standardize(v);
    s.volumes[m] = std::move(v);
  }
  return s;
}

}  // namespace divseg::phantom
