#include <algorithm>
#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>
#include <vector>

#include "common/error.hpp"
#include "ndtensor/ops.hpp"

namespace divseg::nd {
namespace {

struct ConvGeometry {
  std::size_t cin, cout;
  std::size_t d, h, w;     // input extents
  std::size_t kd, kh, kw;  // kernel extents
  std::size_t od, oh, ow;  // output extents
  std::size_t stride, pad;
};

// Output positions o with 0 <= o*stride + k - pad < extent.
struct Range {
  std::size_t lo, hi;
};

Range valid_range(std::size_t k, const ConvGeometry& g, std::size_t extent,
                  std::size_t out_extent) {
  const auto s = static_cast<std::int64_t>(g.stride);
  const auto off = static_cast<std::int64_t>(k) - static_cast<std::int64_t>(g.pad);
  std::int64_t lo = 0;
  if (off < 0) lo = (-off + s - 1) / s;
  std::int64_t hi = (static_cast<std::int64_t>(extent) - 1 - off);
  hi = hi < 0 ? 0 : hi / s + 1;
  hi = std::min<std::int64_t>(hi, static_cast<std::int64_t>(out_extent));
  if (lo > hi) lo = hi;
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

ConvGeometry plan_conv(const Shape& xs, const Shape& ws, std::size_t stride,
                       std::size_t padding) {
  if (xs.size() != 4) {
    throw ShapeError("conv3d: input must be [C,D,H,W], got " + to_string(xs));
  }
  if (ws.size() != 5) {
    throw ShapeError("conv3d: kernel must be [Cout,Cin,k,k,k], got " +
                     to_string(ws));
  }
  if (ws[1] != xs[0]) {
    throw ShapeError("conv3d: kernel expects " + std::to_string(ws[1]) +
                     " input channels, input has " + std::to_string(xs[0]));
  }
  if (stride == 0) throw ShapeError("conv3d: stride must be positive");
  ConvGeometry g{};
  g.cin = xs[0];
  g.cout = ws[0];
  g.d = xs[1];
  g.h = xs[2];
  g.w = xs[3];
  g.kd = ws[2];
  g.kh = ws[3];
  g.kw = ws[4];
  g.stride = stride;
  g.pad = padding;
  auto out_extent = [&](std::size_t n, std::size_t k) -> std::size_t {
    if (n + 2 * padding < k) {
      throw ShapeError("conv3d: kernel larger than padded input");
    }
    return (n + 2 * padding - k) / stride + 1;
  };
  g.od = out_extent(g.d, g.kd);
  g.oh = out_extent(g.h, g.kh);
  g.ow = out_extent(g.w, g.kw);
  return g;
}

// Visits every (output row, input row, kernel tap) triple; the callback
// handles the innermost x loop over [ox.lo, ox.hi).
template <class Fn>
void for_each_tap(const ConvGeometry& g, Fn&& fn) {
  const std::size_t in_vol = g.d * g.h * g.w;
  const std::size_t out_vol = g.od * g.oh * g.ow;
  for (std::size_t co = 0; co < g.cout; ++co) {
    for (std::size_t ci = 0; ci < g.cin; ++ci) {
      for (std::size_t kz = 0; kz < g.kd; ++kz) {
        const Range rz = valid_range(kz, g, g.d, g.od);
        for (std::size_t ky = 0; ky < g.kh; ++ky) {
          const Range ry = valid_range(ky, g, g.h, g.oh);
          for (std::size_t kx = 0; kx < g.kw; ++kx) {
            const Range rx = valid_range(kx, g, g.w, g.ow);
            if (rx.lo >= rx.hi) continue;
            const std::size_t widx = (((co * g.cin + ci) * g.kd + kz) * g.kh + ky) * g.kw + kx;
            for (std::size_t oz = rz.lo; oz < rz.hi; ++oz) {
              const std::size_t iz = oz * g.stride + kz - g.pad;
              for (std::size_t oy = ry.lo; oy < ry.hi; ++oy) {
                const std::size_t iy = oy * g.stride + ky - g.pad;
                const std::size_t out_row = co * out_vol + (oz * g.oh + oy) * g.ow;
                const std::size_t in_row = ci * in_vol + (iz * g.h + iy) * g.w;
                fn(widx, out_row, in_row, rx, kx);
              }
            }
          }
        }
      }
    }
  }
}

// Fast path for stride-1 convolutions: the input is zero-padded once so every
// tap reads a full row, and each output row stays in registers while all taps
// accumulate into it.

struct Padded {
  std::vector<double> data;
  std::size_t c, d, h, w;
};

Padded pad_volume(const double* x, std::size_t c, std::size_t d, std::size_t h,
                  std::size_t w, std::size_t lo, std::size_t hi) {
  Padded p{{}, c, d + lo + hi, h + lo + hi, w + lo + hi};
  p.data.assign(p.c * p.d * p.h * p.w, 0.0);
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t z = 0; z < d; ++z) {
      for (std::size_t y = 0; y < h; ++y) {
        const double* src = x + ((k * d + z) * h + y) * w;
        double* dst = p.data.data() + ((k * p.d + z + lo) * p.h + y + lo) * p.w + lo;
        std::copy_n(src, w, dst);
      }
    }
  }
  return p;
}

constexpr std::size_t kChannelBlock = 4;

// Weights regrouped as [cout/4][cin][k][k][k][4], zero rows filling the last block.
std::vector<double> pack_weights(const double* w, std::size_t cout,
                                 std::size_t cin, std::size_t k, bool flip_transpose) {
  const std::size_t taps = k * k * k;
  const std::size_t blocks = (cout + kChannelBlock - 1) / kChannelBlock;
  std::vector<double> packed(blocks * cin * taps * kChannelBlock, 0.0);
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t t = 0; t < taps; ++t) {
        // flip_transpose: treat w as [cin][cout][k^3] read with reversed taps.
        const double v = flip_transpose ? w[(ci * cout + co) * taps + (taps - 1 - t)]
                                        : w[(co * cin + ci) * taps + t];
        const std::size_t blk = co / kChannelBlock, lane = co % kChannelBlock;
        packed[((blk * cin + ci) * taps + t) * kChannelBlock + lane] = v;
      }
    }
  }
  return packed;
}

// Rows are processed as short GCC vectors so the accumulators stay in registers.
template <std::size_t L>
using Lanes [[gnu::vector_size(L * sizeof(double))]] = double;

template <std::size_t L>
inline Lanes<L> load(const double* p) {
  Lanes<L> v;
  std::memcpy(&v, p, sizeof v);
  return v;
}

template <std::size_t L>
inline void store(double* p, Lanes<L> v) {
  std::memcpy(p, &v, sizeof v);
}

constexpr std::size_t lanes_for(std::size_t width) { return width < 4 ? width : 4; }

// out[co][z][y][x] += sum over ci, kz, ky, kx of
//   w[co][ci][kz][ky][kx] * in[ci][z+kz][y+ky][x+kx]
template <std::size_t OW>
void correlate_rows(const Padded& in, const std::vector<double>& packed,
                    std::size_t cout, std::size_t k, std::size_t od,
                    std::size_t oh, double* out) {
  constexpr std::size_t L = lanes_for(OW);
  constexpr std::size_t NV = OW / L;
  using V = Lanes<L>;
  const std::size_t cin = in.c;
  const std::size_t taps = k * k * k;
  const std::size_t blocks = (cout + kChannelBlock - 1) / kChannelBlock;
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const std::size_t lanes = std::min(kChannelBlock, cout - blk * kChannelBlock);
    for (std::size_t oz = 0; oz < od; ++oz) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        V acc[kChannelBlock][NV] = {};
        for (std::size_t ci = 0; ci < cin; ++ci) {
          const double* wp = packed.data() + (blk * cin + ci) * taps * kChannelBlock;
          for (std::size_t kz = 0; kz < k; ++kz) {
            for (std::size_t ky = 0; ky < k; ++ky) {
              const double* row =
                  in.data.data() + ((ci * in.d + oz + kz) * in.h + oy + ky) * in.w;
              for (std::size_t kx = 0; kx < k; ++kx, wp += kChannelBlock) {
                V src[NV];
                for (std::size_t v = 0; v < NV; ++v) src[v] = load<L>(row + kx + v * L);
                for (std::size_t b = 0; b < kChannelBlock; ++b) {
                  const double wv = wp[b];
                  for (std::size_t v = 0; v < NV; ++v) acc[b][v] += wv * src[v];
                }
              }
            }
          }
        }
        for (std::size_t b = 0; b < lanes; ++b) {
          double* dst = out + (((blk * kChannelBlock + b) * od + oz) * oh + oy) * OW;
          for (std::size_t v = 0; v < NV; ++v) {
            store<L>(dst + v * L, load<L>(dst + v * L) + acc[b][v]);
          }
        }
      }
    }
  }
}

// gw[co][ci][kz][ky][kx] += sum over z, y, x of
//   gout[co][z][y][x] * in[ci][z+kz][y+ky][x+kx]
template <std::size_t OW, std::size_t K>
void weight_gradient(const Padded& in, const double* gout, std::size_t cout,
                     std::size_t od, std::size_t oh, double* gw) {
  constexpr std::size_t L = lanes_for(OW);
  constexpr std::size_t NV = OW / L;
  using V = Lanes<L>;
  const std::size_t cin = in.c;
  for (std::size_t co = 0; co < cout; ++co) {
    for (std::size_t ci = 0; ci < cin; ++ci) {
      for (std::size_t kz = 0; kz < K; ++kz) {
        for (std::size_t ky = 0; ky < K; ++ky) {
          V acc[K][NV] = {};
          for (std::size_t oz = 0; oz < od; ++oz) {
            for (std::size_t oy = 0; oy < oh; ++oy) {
              const double* g = gout + ((co * od + oz) * oh + oy) * OW;
              const double* row =
                  in.data.data() + ((ci * in.d + oz + kz) * in.h + oy + ky) * in.w;
              V gv[NV];
              for (std::size_t v = 0; v < NV; ++v) gv[v] = load<L>(g + v * L);
              for (std::size_t kx = 0; kx < K; ++kx) {
                for (std::size_t v = 0; v < NV; ++v) {
                  acc[kx][v] += gv[v] * load<L>(row + kx + v * L);
                }
              }
            }
          }
          double* dst = gw + (((co * cin + ci) * K + kz) * K + ky) * K;
          for (std::size_t kx = 0; kx < K; ++kx) {
            V t = acc[kx][0];
            for (std::size_t v = 1; v < NV; ++v) t += acc[kx][v];
            double s = 0.0;
            for (std::size_t l = 0; l < L; ++l) s += t[l];
            dst[kx] += s;
          }
        }
      }
    }
  }
}

// Runs fn(std::integral_constant<width>) for the output widths with a
// specialized kernel; returns false otherwise.
template <class Fn>
bool with_width(std::size_t ow, Fn&& fn) {
  switch (ow) {
    case 1: fn(std::integral_constant<std::size_t, 1>{}); return true;
    case 2: fn(std::integral_constant<std::size_t, 2>{}); return true;
    case 4: fn(std::integral_constant<std::size_t, 4>{}); return true;
    case 8: fn(std::integral_constant<std::size_t, 8>{}); return true;
    case 16: fn(std::integral_constant<std::size_t, 16>{}); return true;
    case 32: fn(std::integral_constant<std::size_t, 32>{}); return true;
    default: return false;
  }
}

bool fast_path(const ConvGeometry& g) {
  return g.stride == 1 && g.kd == g.kh && g.kh == g.kw && g.pad < g.kw &&
         (g.kw == 1 || g.kw == 3) &&
         (g.ow == 1 || g.ow == 2 || g.ow == 4 || g.ow == 8 || g.ow == 16 || g.ow == 32);
}

}  // namespace

Var conv3d(Var x, Var w, std::optional<Var> bias, std::size_t stride,
           std::size_t padding) {
  const Tensor& xv = x.value();
  const Tensor& wv = w.value();
  const ConvGeometry g = plan_conv(xv.shape(), wv.shape(), stride, padding);
  if (bias && bias->value().numel() != g.cout) {
    throw ShapeError("conv3d: bias has " +
                     std::to_string(bias->value().numel()) + " entries, expected " +
                     std::to_string(g.cout));
  }

  Tensor out({g.cout, g.od, g.oh, g.ow});
  {
    double* __restrict o = out.data().data();
    const double* __restrict in = xv.data().data();
    const double* wd = wv.data().data();
    if (bias) {
      const std::size_t out_vol = g.od * g.oh * g.ow;
      auto b = bias->value().data();
      for (std::size_t co = 0; co < g.cout; ++co) {
        std::fill_n(o + co * out_vol, out_vol, b[co]);
      }
    }
    if (fast_path(g)) {
      const Padded padded = pad_volume(in, g.cin, g.d, g.h, g.w, g.pad,
                                       g.kw - 1 - g.pad);
      const auto packed = pack_weights(wd, g.cout, g.cin, g.kw, false);
      with_width(g.ow, [&](auto width) {
        correlate_rows<width()>(padded, packed, g.cout, g.kw, g.od, g.oh, o);
      });
    } else {
      const std::size_t s = g.stride;
      for_each_tap(g, [&](std::size_t widx, std::size_t orow, std::size_t irow, Range rx, std::size_t kx) {
        const double k = wd[widx];
        const std::size_t n = rx.hi - rx.lo;
        double* __restrict dst = o + orow + rx.lo;
        const double* __restrict src = in + (irow + rx.lo * s + kx - g.pad);
        if (s == 1) {
          for (std::size_t i = 0; i < n; ++i) dst[i] += k * src[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) dst[i] += k * src[i * s];
        }
      });
    }
  }

  std::vector<Var> inputs{x, w};
  if (bias) inputs.push_back(*bias);
  const bool has_bias = bias.has_value();

  auto rule = [g, has_bias](BackwardContext& ctx) {
    const double* __restrict go = ctx.grad_output().data().data();
    const double* __restrict in = ctx.input(0).data().data();
    const double* wd = ctx.input(1).data().data();
    auto gx = ctx.grad_input(0);
    auto gw = ctx.grad_input(1);
    const std::size_t s = g.stride;

    const bool fast = fast_path(g) && with_width(g.w, [](auto) {});
    if (!gx.empty() && fast) {
      // Input gradient is a correlation of the padded output gradient with the
      // flipped, channel-transposed kernel.
      const std::size_t lo = g.kw - 1 - g.pad;
      const Padded padded = pad_volume(go, g.cout, g.od, g.oh, g.ow, lo,
                                       g.d + g.kw - 1 - g.od - lo);
      const auto packed = pack_weights(wd, g.cin, g.cout, g.kw, true);
      with_width(g.w, [&](auto width) {
        correlate_rows<width()>(padded, packed, g.cin, g.kw, g.d, g.h, gx.data());
      });
    } else if (!gx.empty()) {
      double* __restrict gxd = gx.data();
      for_each_tap(g, [&](std::size_t widx, std::size_t orow, std::size_t irow, Range rx, std::size_t kx) {
        const double k = wd[widx];
        const std::size_t n = rx.hi - rx.lo;
        const double* __restrict src = go + orow + rx.lo;
        double* __restrict dst = gxd + (irow + rx.lo * s + kx - g.pad);
        if (s == 1) {
          for (std::size_t i = 0; i < n; ++i) dst[i] += k * src[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) dst[i * s] += k * src[i];
        }
      });
    }
    if (!gw.empty() && fast) {
      const Padded padded = pad_volume(in, g.cin, g.d, g.h, g.w, g.pad,
                                       g.kw - 1 - g.pad);
      with_width(g.ow, [&](auto width) {
        if (g.kw == 3) {
          weight_gradient<width(), 3>(padded, go, g.cout, g.od, g.oh, gw.data());
        } else {
          weight_gradient<width(), 1>(padded, go, g.cout, g.od, g.oh, gw.data());
        }
      });
    } else if (!gw.empty()) {
      // Per-tap partial sums kept per output column so the inner loop has no
      // loop-carried dependency; folded into the weight gradient when the tap
      // changes.
      std::vector<double> acc(g.ow, 0.0);
      std::size_t current = static_cast<std::size_t>(-1);
      auto flush = [&] {
        if (current == static_cast<std::size_t>(-1)) return;
        double t = 0.0;
        for (double v : acc) t += v;
        gw[current] += t;
        std::fill(acc.begin(), acc.end(), 0.0);
      };
      double* __restrict a = acc.data();
      for_each_tap(g, [&](std::size_t widx, std::size_t orow, std::size_t irow, Range rx, std::size_t kx) {
        if (widx != current) {
          flush();
          current = widx;
        }
        const std::size_t n = rx.hi - rx.lo;
        const double* __restrict gr = go + orow + rx.lo;
        const double* __restrict src = in + (irow + rx.lo * s + kx - g.pad);
        if (s == 1) {
          for (std::size_t i = 0; i < n; ++i) a[i] += gr[i] * src[i];
        } else {
          for (std::size_t i = 0; i < n; ++i) a[i] += gr[i] * src[i * s];
        }
      });
      flush();
    }
    if (has_bias) {
      auto gb = ctx.grad_input(2);
      if (!gb.empty()) {
        const std::size_t out_vol = g.od * g.oh * g.ow;
        for (std::size_t co = 0; co < g.cout; ++co) {
          double t = 0.0;
          for (std::size_t i = 0; i < out_vol; ++i) t += go[co * out_vol + i];
          gb[co] += t;
        }
      }
    }
  };
  return x.tape().record("conv3d", std::move(out), std::move(inputs),
                         std::move(rule));
}

Var resample(ResampleKind kind, Var x) {
  const Tensor& xv = x.value();
  const Shape& s = xv.shape();
  const bool down = kind == ResampleKind::Downsample2;
  const char* op = down ? "downsample2" : "upsample_nn2";
  if (s.size() != 4) {
    throw ShapeError(std::string(op) + ": input must be [C,D,H,W], got " +
                     to_string(s));
  }
  const std::size_t c = s[0];
  // Fine-grid extents; the coarse grid is half of each.
  std::size_t fd = s[1], fh = s[2], fw = s[3];
  if (down) {
    if (fd % 2 || fh % 2 || fw % 2) {
      throw ShapeError("downsample2: odd spatial extent in " + to_string(s));
    }
  } else {
    fd *= 2;
    fh *= 2;
    fw *= 2;
  }
  const std::size_t cd = fd / 2, ch = fh / 2, cw = fw / 2;
  const std::size_t fine_vol = fd * fh * fw, coarse_vol = cd * ch * cw;

  // Calls fn(fine_index, coarse_index) for every fine voxel.
  auto visit = [=](auto&& fn) {
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t z = 0; z < fd; ++z) {
        for (std::size_t y = 0; y < fh; ++y) {
          const std::size_t frow = k * fine_vol + (z * fh + y) * fw;
          const std::size_t crow = k * coarse_vol + ((z / 2) * ch + y / 2) * cw;
          for (std::size_t xx = 0; xx < fw; ++xx) fn(frow + xx, crow + xx / 2);
        }
      }
    }
  };

  auto in = xv.data();
  if (down) {
    Tensor out({c, cd, ch, cw});
    auto o = out.data();
    // Pairwise sum of each 2x2x2 block, so averaging eight equal values is exact.
    for (std::size_t k = 0; k < c; ++k) {
      for (std::size_t z = 0; z < cd; ++z) {
        for (std::size_t y = 0; y < ch; ++y) {
          for (std::size_t xx = 0; xx < cw; ++xx) {
            const std::size_t f0 = k * fine_vol + ((2 * z) * fh + 2 * y) * fw + 2 * xx;
            const std::size_t dy = fw, dz = fh * fw;
            const double s0 = (in[f0] + in[f0 + 1]) + (in[f0 + dy] + in[f0 + dy + 1]);
            const double s1 = (in[f0 + dz] + in[f0 + dz + 1]) +
                              (in[f0 + dz + dy] + in[f0 + dz + dy + 1]);
            o[k * coarse_vol + (z * ch + y) * cw + xx] = 0.125 * (s0 + s1);
          }
        }
      }
    }
    auto rule = [visit](BackwardContext& ctx) {
      auto gi = ctx.grad_input(0);
      auto g = ctx.grad_output().data();
      visit([&](std::size_t f, std::size_t q) { gi[f] += 0.125 * g[q]; });
    };
    return x.tape().record(op, std::move(out), {x}, std::move(rule));
  }
  Tensor out({c, fd, fh, fw});
  auto o = out.data();
  visit([&](std::size_t f, std::size_t q) { o[f] = in[q]; });
  auto rule = [visit](BackwardContext& ctx) {
    auto gi = ctx.grad_input(0);
    auto g = ctx.grad_output().data();
    visit([&](std::size_t f, std::size_t q) { gi[q] += g[f]; });
  };
  return x.tape().record(op, std::move(out), {x}, std::move(rule));
}

}  // namespace divseg::nd
