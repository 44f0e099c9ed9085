#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ndtensor/tensor.hpp"

namespace divseg::phantom {

inline constexpr int kModalityCount = 4;
inline constexpr double kNoiseSigma = 0.05;

struct Dims {
  std::size_t d = 16, h = 16, w = 16;
};

struct Ellipsoid {
  std::array<double, 3> center;
  std::array<double, 3> axes;

  bool contains(double z, double y, double x) const;
};

struct Sample {
  std::string id;
  std::array<nd::Tensor, kModalityCount> volumes;  // [1,D,H,W], standardized
  nd::Tensor labels;                               // [D,H,W], classes 0..3
  Ellipsoid brain, edema, core, enhancing;
};

// Region contrast per modality for (background, edema, core, enhancing):
// Fl shows edema strongly, T2 edema and core moderately, T1c the enhancing
// region strongly, T1 everything weakly.
const std::array<std::array<double, 4>, kModalityCount>& contrast_table();

// Throws ConfigError when any extent is below 8.
Sample generate_phantom(std::uint64_t seed, Dims dims = {});

}  // namespace divseg::phantom
