#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "common/error.hpp"
#include "ndtensor/ops.hpp"

namespace divseg::nd {

Var group_norm(Var x, std::size_t groups, double eps, Var gain, Var bias) {
  const Tensor& xv = x.value();
  const Shape& s = xv.shape();
  if (s.empty()) throw ShapeError("group_norm: input has no channel axis");
  const std::size_t channels = s[0];
  if (groups == 0 || channels % groups != 0) {
    throw ConfigError("group_norm: " + std::to_string(channels) +
                      " channels not divisible into " + std::to_string(groups) +
                      " groups");
  }
  if (gain.value().numel() != channels || bias.value().numel() != channels) {
    throw ShapeError("group_norm: gain/bias must have " +
                     std::to_string(channels) + " entries");
  }
  const std::size_t per_channel = xv.numel() / channels;
  const std::size_t per_group = channels / groups;
  const std::size_t n = per_group * per_channel;

  // Standardized values are needed by the backward rule; keep them alongside.
  auto xhat = std::make_shared<std::vector<double>>(xv.numel());
  auto inv_std = std::make_shared<std::vector<double>>(groups);
  auto in = xv.data();
  auto gv = gain.value().data();
  auto bv = bias.value().data();
  Tensor out(s);
  auto o = out.data();

  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t begin = g * n;
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += in[begin + i];
    mean /= double(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = in[begin + i] - mean;
      var += d * d;
    }
    var /= double(n);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[g] = is;
    for (std::size_t c = 0; c < per_group; ++c) {
      const std::size_t ch = g * per_group + c;
      for (std::size_t i = 0; i < per_channel; ++i) {
        const std::size_t j = ch * per_channel + i;
        const double z = (in[j] - mean) * is;
        (*xhat)[j] = z;
        o[j] = z * gv[ch] + bv[ch];
      }
    }
  }

  auto rule = [=](BackwardContext& ctx) {
    auto go = ctx.grad_output().data();
    auto gain_v = ctx.input(1).data();
    auto gx = ctx.grad_input(0);
    auto ggain = ctx.grad_input(1);
    auto gbias = ctx.grad_input(2);
    const auto& z = *xhat;

    if (!ggain.empty() || !gbias.empty()) {
      for (std::size_t ch = 0; ch < channels; ++ch) {
        double sg = 0.0, sb = 0.0;
        for (std::size_t i = 0; i < per_channel; ++i) {
          const std::size_t j = ch * per_channel + i;
          sg += go[j] * z[j];
          sb += go[j];
        }
        if (!ggain.empty()) ggain[ch] += sg;
        if (!gbias.empty()) gbias[ch] += sb;
      }
    }
    if (gx.empty()) return;
    // dx = inv_std/n * (n*dz - sum(dz) - z*sum(dz*z)), dz = dy*gain.
    for (std::size_t g = 0; g < groups; ++g) {
      double sum_dz = 0.0, sum_dz_z = 0.0;
      for (std::size_t c = 0; c < per_group; ++c) {
        const std::size_t ch = g * per_group + c;
        for (std::size_t i = 0; i < per_channel; ++i) {
          const std::size_t j = ch * per_channel + i;
          const double dz = go[j] * gain_v[ch];
          sum_dz += dz;
          sum_dz_z += dz * z[j];
        }
      }
      const double is = (*inv_std)[g];
      const double inv_n = 1.0 / double(n);
      for (std::size_t c = 0; c < per_group; ++c) {
        const std::size_t ch = g * per_group + c;
        for (std::size_t i = 0; i < per_channel; ++i) {
          const std::size_t j = ch * per_channel + i;
          const double dz = go[j] * gain_v[ch];
          gx[j] += is * (dz - inv_n * (sum_dz + z[j] * sum_dz_z));
        }
      }
    }
  };
  return x.tape().record("group_norm", std::move(out), {x, gain, bias},
                         std::move(rule));
}

}  // namespace divseg::nd
