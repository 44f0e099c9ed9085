#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include "ndtensor/tape.hpp"

namespace divseg::nd {

enum class BinaryKind { Add, Sub, Mul, Div };
enum class UnaryKind { Exp, Log, Pow, Clamp, Relu, Abs };
enum class ReduceKind { Sum, Mean };
enum class ResampleKind { Downsample2, UpsampleNearest2 };

// Elementwise with broadcasting: operands of equal rank whose extents agree or
// are 1, or a single-element operand against anything.
Var binary_op(BinaryKind kind, Var a, Var b);

struct UnaryParams {
  double exponent = 1.0;  // Pow
  double lo = 0.0;        // Clamp
  double hi = 1.0;        // Clamp
};
Var unary_op(UnaryKind kind, Var a, UnaryParams params = {});

// Reduced axes are kept with extent 1. Empty `axes` reduces over all axes.
Var reduce(ReduceKind kind, Var a, std::vector<std::size_t> axes = {});

Var softmax(Var a, std::size_t axis);

// Same values under a new shape with equal element count.
Var reshape(Var a, Shape shape);

// Cross-correlation of x[Cin,D,H,W] with w[Cout,Cin,k,k,k]; optional bias[Cout].
Var conv3d(Var x, Var w, std::optional<Var> bias = std::nullopt,
           std::size_t stride = 1, std::size_t padding = 0);

Var resample(ResampleKind kind, Var x);

// Normalizes x[C,...] over each of `groups` channel groups, then applies
// per-channel gain[C] and bias[C].
Var group_norm(Var x, std::size_t groups, double eps, Var gain, Var bias);

inline Var add(Var a, Var b) { return binary_op(BinaryKind::Add, a, b); }
inline Var sub(Var a, Var b) { return binary_op(BinaryKind::Sub, a, b); }
inline Var mul(Var a, Var b) { return binary_op(BinaryKind::Mul, a, b); }
inline Var div(Var a, Var b) { return binary_op(BinaryKind::Div, a, b); }

inline Var exp(Var a) { return unary_op(UnaryKind::Exp, a); }
inline Var log(Var a) { return unary_op(UnaryKind::Log, a); }
inline Var pow(Var a, double c) {
  return unary_op(UnaryKind::Pow, a, {.exponent = c});
}
inline Var clamp(Var a, double lo, double hi) {
  return unary_op(UnaryKind::Clamp, a, {.lo = lo, .hi = hi});
}
inline Var relu(Var a) { return unary_op(UnaryKind::Relu, a); }
inline Var abs(Var a) { return unary_op(UnaryKind::Abs, a); }

inline Var sum(Var a, std::vector<std::size_t> axes = {}) {
  return reduce(ReduceKind::Sum, a, std::move(axes));
}
inline Var mean(Var a, std::vector<std::size_t> axes = {}) {
  return reduce(ReduceKind::Mean, a, std::move(axes));
}

inline Var downsample2(Var x) {
  return resample(ResampleKind::Downsample2, x);
}
inline Var upsample_nn2(Var x) {
  return resample(ResampleKind::UpsampleNearest2, x);
}

Var scalar(Tape& tape, double value);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }
inline Var operator/(Var a, Var b) { return div(a, b); }
inline Var operator+(Var a, double c) { return add(a, scalar(a.tape(), c)); }
inline Var operator-(Var a, double c) { return sub(a, scalar(a.tape(), c)); }
inline Var operator+(double c, Var a) { return add(scalar(a.tape(), c), a); }
inline Var operator-(double c, Var a) { return sub(scalar(a.tape(), c), a); }
inline Var operator*(Var a, double c) { return mul(a, scalar(a.tape(), c)); }
inline Var operator*(double c, Var a) { return mul(scalar(a.tape(), c), a); }
inline Var operator/(Var a, double c) { return div(a, scalar(a.tape(), c)); }
inline Var operator-(Var a) { return mul(a, scalar(a.tape(), -1.0)); }

}  // namespace divseg::nd
