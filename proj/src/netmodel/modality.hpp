#pragma once

#include <array>
#include <cstdint>
#include <string>

namespace divseg::net {

inline constexpr int kModalities = 4;

// Available modalities as a bit set: bit 0 = Fl, 1 = T2, 2 = T1c, 3 = T1.
class ModalityMask {
 public:
  // Throws ContractError for the empty set or bits above the fourth.
  static ModalityMask from_bits(unsigned bits);
  static ModalityMask full() { return ModalityMask(0xF); }

  unsigned bits() const noexcept { return bits_; }
  // i is 0-based (0 = Fl).
  bool has(int i) const noexcept { return (bits_ >> i) & 1u; }
  int count() const noexcept;
  // Missing-modality count, 0..3.
  int missing() const noexcept { return kModalities - count(); }
  // Display label: "Fl", "T1c,T2", "~T1", "Full".
  std::string label() const;

  bool operator==(const ModalityMask&) const = default;

 private:
  explicit ModalityMask(unsigned bits) : bits_(bits) {}
  unsigned bits_;
};

const char* modality_name(int i);

// The 15 non-empty subsets in table column order: singles, pairs, triples, full.
const std::array<ModalityMask, 15>& canonical_subsets();

}  // namespace divseg::net
