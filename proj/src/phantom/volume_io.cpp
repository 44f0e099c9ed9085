#include "phantom/volume_io.hpp"

#include <bit>
#include <cmath>

#include "common/error.hpp"
#include "common/file_io.hpp"

namespace divseg::phantom {

namespace {

constexpr std::string_view kMagic = "MVOL";
constexpr std::uint8_t kVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint32_t get_u32(std::string_view b, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) {
    v |= std::uint32_t(static_cast<unsigned char>(b[at + i])) << (8 * i);
  }
  return v;
}

std::uint32_t narrow_extent(std::size_t e) {
  if (e > 0xFFFFFFFFu) throw ShapeError("volume extent does not fit in 32 bits");
  return static_cast<std::uint32_t>(e);
}

}  // namespace

std::string encode_volume(const nd::Tensor& t, VolumeDtype dtype) {
  nd::Shape s = t.shape();
  if (dtype == VolumeDtype::U8) {
    if (s.size() != 3) throw ShapeError("u8 volume must be [D,H,W], got " + nd::to_string(s));
    s.insert(s.begin(), 1);
  } else if (dtype == VolumeDtype::F32) {
    if (s.size() != 4) throw ShapeError("f32 volume must be [C,D,H,W], got " + nd::to_string(s));
  } else {
    throw ContractError("unknown volume dtype");
  }
  std::string out(kMagic);
  out.push_back(static_cast<char>(kVersion));
  out.push_back(static_cast<char>(dtype));
  for (std::size_t e : s) put_u32(out, narrow_extent(e));
  if (dtype == VolumeDtype::U8) {
    for (double v : t.data()) {
      if (!(v >= 0 && v <= 255) || v != std::floor(v)) {
        throw DomainError("u8 volume value " + std::to_string(v) + " is not an integer in 0..255");
      }
      out.push_back(static_cast<char>(static_cast<std::uint8_t>(v)));
    }
  } else {
    for (double v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

Volume decode_volume(std::string_view b) {
  if (b.size() < kVolumeHeaderBytes) {
    throw ParseError("MVOL: file has " + std::to_string(b.size()) + " bytes, header needs " +
                     std::to_string(kVolumeHeaderBytes));
  }
  if (b.substr(0, 4) != kMagic) throw ParseError("MVOL: bad magic");
  if (static_cast<std::uint8_t>(b[4]) != kVersion) {
    throw ParseError("MVOL: unsupported version " + std::to_string(std::uint8_t(b[4])));
  }
  const auto tag = static_cast<std::uint8_t>(b[5]);
  if (tag != 1 && tag != 2) throw ParseError("MVOL: unknown dtype " + std::to_string(tag));
  const auto dtype = static_cast<VolumeDtype>(tag);
  nd::Shape s(4);
  for (std::size_t i = 0; i < 4; ++i) s[i] = get_u32(b, 6 + 4 * i);
  const std::size_t n = nd::numel(s);
  const std::size_t width = dtype == VolumeDtype::F32 ? 4 : 1;
  const std::size_t expected = kVolumeHeaderBytes + n * width;
  if (b.size() != expected) {
    throw ParseError("MVOL: expected " + std::to_string(expected) + " bytes for extents " +
                     nd::to_string(s) + ", got " + std::to_string(b.size()));
  }
  if (dtype == VolumeDtype::U8) {
    if (s[0] != 1) throw ParseError("MVOL: u8 volume must have C = 1");
    s.erase(s.begin());
  }
  nd::Tensor t(s);
  auto d = t.data();
  const char* p = b.data() + kVolumeHeaderBytes;
  for (std::size_t i = 0; i < n; ++i) {
    if (dtype == VolumeDtype::U8) {
      d[i] = static_cast<unsigned char>(p[i]);
    } else {
      d[i] = std::bit_cast<float>(get_u32(b, kVolumeHeaderBytes + 4 * i));
    }
  }
  return {std::move(t), dtype};
}

void write_volume(const std::string& path, const nd::Tensor& t, VolumeDtype dtype) {
  write_file(path, encode_volume(t, dtype));
}

Volume read_volume(const std::string& path) {
  try {
    return decode_volume(read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

}  // namespace divseg::phantom
