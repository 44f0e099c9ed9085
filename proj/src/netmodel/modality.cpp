#include "netmodel/modality.hpp"

#include <bit>
#include <utility>

#include "common/error.hpp"

namespace divseg::net {

ModalityMask ModalityMask::from_bits(unsigned bits) {
  if (bits == 0 || bits > 0xF) {
    throw ContractError("modality mask must be a non-empty subset of 4 modalities, got " +
                        std::to_string(bits));
  }
  return ModalityMask(bits);
}

int ModalityMask::count() const noexcept { return std::popcount(bits_); }

const char* modality_name(int i) {
  static constexpr const char* names[kModalities] = {"Fl", "T2", "T1c", "T1"};
  if (i < 0 || i >= kModalities) throw ContractError("modality index out of range");
  return names[i];
}

std::string ModalityMask::label() const {
  if (count() == kModalities) return "Full";
  if (count() == kModalities - 1) {
    for (int i = 0; i < kModalities; ++i) {
      if (!has(i)) return std::string("~") + modality_name(i);
    }
  }
  // Highest index first, matching "T1c,Fl".
  std::string out;
  for (int i = kModalities - 1; i >= 0; --i) {
    if (!has(i)) continue;
    if (!out.empty()) out += ",";
    out += modality_name(i);
  }
  return out;
}

const std::array<ModalityMask, 15>& canonical_subsets() {
  static const auto subsets = []<std::size_t... I>(std::index_sequence<I...>) {
    constexpr unsigned order[15] = {0b0001, 0b0010, 0b0100, 0b1000, 0b0011,
                                    0b0101, 0b0110, 0b1001, 0b1010, 0b1100,
                                    0b0111, 0b1011, 0b1101, 0b1110, 0b1111};
    return std::array<ModalityMask, 15>{ModalityMask::from_bits(order[I])...};
  }(std::make_index_sequence<15>{});
  return subsets;
}

}  // namespace divseg::net
