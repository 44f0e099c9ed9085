#include "netmodel/network.hpp"

#include <string>

#include "common/error.hpp"

namespace divseg::net {

namespace {

nd::Var conv(const BoundParams& p, const std::string& prefix, nd::Var x, bool bias,
             std::size_t padding) {
  std::optional<nd::Var> b;
  if (bias) b = p[prefix + ".b"];
  return nd::conv3d(x, p[prefix + ".w"], b, 1, padding);
}

nd::Var norm(const BoundParams& p, const std::string& prefix, nd::Var x) {
  const auto& a = p.arch();
  return nd::group_norm(x, a.groups, a.norm_eps, p[prefix + ".gain"], p[prefix + ".bias"]);
}

nd::Var residual_block(const BoundParams& p, const std::string& prefix, nd::Var x) {
  nd::Var y = nd::relu(norm(p, prefix + ".norm1", conv(p, prefix + ".conv1", x, false, 1)));
  y = norm(p, prefix + ".norm2", conv(p, prefix + ".conv2", y, false, 1));
  return nd::relu(x + y);
}

}  // namespace

BoundParams::BoundParams(nd::Tape& tape, const ModelParams& params, bool trainable)
    : tape_(&tape), params_(&params) {
  vars_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    vars_.push_back(trainable ? tape.leaf(params.value(i)) : tape.constant(params.value(i)));
  }
}

BoundParams::BoundParams(const ModelParams& params, std::vector<nd::Var> vars)
    : tape_(nullptr), params_(&params), vars_(std::move(vars)) {
  if (vars_.size() != params.size() || vars_.empty()) {
    throw ContractError("BoundParams: expected " + std::to_string(params.size()) + " variables");
  }
  tape_ = &vars_[0].tape();
  for (std::size_t i = 0; i < vars_.size(); ++i) {
    if (vars_[i].shape() != params.value(i).shape()) {
      throw ShapeError("BoundParams: variable for '" + params.name(i) + "' has shape " +
                       nd::to_string(vars_[i].shape()));
    }
  }
}

LevelFeatures encode_modality(const BoundParams& p, int i, nd::Var x) {
  if (i < 0 || i >= kModalities) throw ContractError("encode_modality: index out of range");
  const nd::Shape s = x.shape();
  if (s.size() != 4 || s[0] != 1) {
    throw ShapeError("encode_modality: expected a [1,D,H,W] volume, got " + nd::to_string(s));
  }
  const std::size_t levels = p.arch().levels();
  for (std::size_t a = 1; a < 4; ++a) {
    if (s[a] % (std::size_t(1) << (levels - 1)) != 0) {
      throw ShapeError("encode_modality: extent " + std::to_string(s[a]) +
                       " not divisible by 2^" + std::to_string(levels - 1));
    }
  }
  LevelFeatures out;
  nd::Var h = conv(p, "enc" + std::to_string(i + 1), x, true, 1);
  for (std::size_t l = 0; l < levels; ++l) {
    const std::string prefix = "bb" + std::to_string(l + 1);
    if (l > 0) h = conv(p, prefix + ".lift", nd::downsample2(h), true, 0);
    h = residual_block(p, prefix, h);
    out.push_back(h);
  }
  return out;
}

LevelFeatures fuse(std::span<const LevelFeatures> features) {
  if (features.empty()) throw ContractError("fuse: no available modality");
  const std::size_t levels = features[0].size();
  LevelFeatures out;
  for (std::size_t l = 0; l < levels; ++l) {
    nd::Var acc = features[0].at(l);
    for (std::size_t m = 1; m < features.size(); ++m) acc = acc + features[m].at(l);
    out.push_back(features.size() == 1 ? acc : acc * (1.0 / double(features.size())));
  }
  return out;
}

LevelFeatures fuse(const std::array<std::optional<LevelFeatures>, kModalities>& features,
                   ModalityMask mask) {
  std::vector<LevelFeatures> present;
  for (int i = 0; i < kModalities; ++i) {
    if (!mask.has(i)) continue;
    if (!features[i]) {
      throw ContractError(std::string("fuse: missing features for ") + modality_name(i));
    }
    present.push_back(*features[i]);
  }
  return fuse(present);
}

ForwardOutput forward(const BoundParams& p, const std::array<nd::Var, kModalities>& volumes,
                      ModalityMask mask) {
  std::array<std::optional<LevelFeatures>, kModalities> feats;
  for (int i = 0; i < kModalities; ++i) {
    if (mask.has(i)) feats[i] = encode_modality(p, i, volumes[i]);
  }
  LevelFeatures fused = fuse(feats, mask);
  const std::size_t levels = fused.size();

  nd::Var x = fused.back();
  for (std::size_t l = levels - 1; l-- > 0;) {
    const std::string prefix = "dec" + std::to_string(l + 1);
    x = nd::upsample_nn2(conv(p, prefix + ".reduce", x, true, 0)) + fused[l];
    x = nd::relu(norm(p, prefix + ".norm", conv(p, prefix + ".conv", x, false, 1)));
  }
  return {conv(p, "head", x, true, 0), std::move(fused)};
}

}  // namespace divseg::net
