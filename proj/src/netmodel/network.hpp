#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "ndtensor/ops.hpp"
#include "netmodel/modality.hpp"
#include "netmodel/params.hpp"

namespace divseg::net {

// Parameters placed on a tape, as leaves (trainable) or constants.
class BoundParams {
 public:
  BoundParams(nd::Tape& tape, const ModelParams& params, bool trainable);
  // Uses existing tape variables, one per parameter in layout order.
  BoundParams(const ModelParams& params, std::vector<nd::Var> vars);

  nd::Var operator[](std::string_view name) const { return vars_[params_->index(name)]; }
  nd::Var at(std::size_t i) const { return vars_.at(i); }
  std::size_t size() const noexcept { return vars_.size(); }
  const ArchConfig& arch() const noexcept { return params_->arch(); }
  nd::Tape& tape() const noexcept { return *tape_; }

 private:
  nd::Tape* tape_;
  const ModelParams* params_;
  std::vector<nd::Var> vars_;
};

using LevelFeatures = std::vector<nd::Var>;

struct ForwardOutput {
  nd::Var logits;             // [J, D, H, W]
  std::vector<nd::Var> taps;  // fused feature per backbone level
};

// h_i = T(f_i(x_i)); i is 0-based, x is [1, D, H, W].
LevelFeatures encode_modality(const BoundParams& p, int i, nd::Var x);

// Per-level mean over the given modality features, summed in list order.
LevelFeatures fuse(std::span<const LevelFeatures> features);

// Mean over the modalities set in `mask`, in canonical order Fl, T2, T1c, T1.
LevelFeatures fuse(const std::array<std::optional<LevelFeatures>, kModalities>& features,
                   ModalityMask mask);

// Only volumes whose mask bit is set are read.
ForwardOutput forward(const BoundParams& p,
                      const std::array<nd::Var, kModalities>& volumes,
                      ModalityMask mask);

}  // namespace divseg::net
