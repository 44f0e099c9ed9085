#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "ndtensor/tensor.hpp"

namespace divseg::phantom {

enum class VolumeDtype : std::uint8_t { F32 = 1, U8 = 2 };

struct Volume {
  nd::Tensor tensor;
  VolumeDtype dtype;
};

inline constexpr std::size_t kVolumeHeaderBytes = 22;

// "MVOL", u8 version 1, u8 dtype, u32 C, D, H, W (little-endian), then the
// row-major payload. F32 takes [C,D,H,W]; U8 takes [D,H,W] stored with C = 1
// and integer values in 0..255.
std::string encode_volume(const nd::Tensor& t, VolumeDtype dtype);
Volume decode_volume(std::string_view bytes);

void write_volume(const std::string& path, const nd::Tensor& t, VolumeDtype dtype);
Volume read_volume(const std::string& path);

}  // namespace divseg::phantom
