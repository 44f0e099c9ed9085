#include <algorithm>
#include <cmath>
#include <string>

#include "common/error.hpp"
#include "ndtensor/ops.hpp"

namespace divseg::nd {
namespace {

struct Broadcast {
  Shape out;
  std::vector<std::size_t> stride_a;  // 0 on broadcast axes
  std::vector<std::size_t> stride_b;
  bool same = false;
};

std::vector<std::size_t> row_major_strides(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

Broadcast plan_broadcast(const char* op, const Shape& a, const Shape& b) {
  Broadcast p;
  if (a == b) {
    p.out = a;
    p.same = true;
    return p;
  }
  const std::size_t na = numel(a), nb = numel(b);
  if (na == 1 || nb == 1) {
    p.out = (na == 1 && (nb != 1 || b.size() >= a.size())) ? b : a;
    p.stride_a.assign(p.out.size(), 0);
    p.stride_b.assign(p.out.size(), 0);
    if (na != 1) p.stride_a = row_major_strides(a);
    if (nb != 1) p.stride_b = row_major_strides(b);
    return p;
  }
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(a) +
                     " with " + to_string(b));
  }
  p.out.resize(a.size());
  const auto sa = row_major_strides(a);
  const auto sb = row_major_strides(b);
  p.stride_a.resize(a.size());
  p.stride_b.resize(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i] && a[i] != 1 && b[i] != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(a) +
                       " with " + to_string(b));
    }
    p.out[i] = std::max(a[i], b[i]);
    p.stride_a[i] = a[i] == 1 ? 0 : sa[i];
    p.stride_b[i] = b[i] == 1 ? 0 : sb[i];
  }
  return p;
}

// Calls fn(out_index, a_index, b_index) in row-major output order.
template <class Fn>
void for_each_broadcast(const Broadcast& p, Fn&& fn) {
  const std::size_t n = numel(p.out);
  if (p.same) {
    for (std::size_t i = 0; i < n; ++i) fn(i, i, i);
    return;
  }
  const std::size_t rank = p.out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    fn(i, ia, ib);
    for (std::size_t ax = rank; ax-- > 0;) {
      ia += p.stride_a[ax];
      ib += p.stride_b[ax];
      if (++idx[ax] < p.out[ax]) break;
      ia -= p.stride_a[ax] * p.out[ax];
      ib -= p.stride_b[ax] * p.out[ax];
      idx[ax] = 0;
    }
  }
}

const char* binary_name(BinaryKind k) {
  switch (k) {
    case BinaryKind::Add: return "add";
    case BinaryKind::Sub: return "sub";
    case BinaryKind::Mul: return "mul";
    case BinaryKind::Div: return "div";
  }
  return "binary";
}

const char* unary_name(UnaryKind k) {
  switch (k) {
    case UnaryKind::Exp: return "exp";
    case UnaryKind::Log: return "log";
    case UnaryKind::Pow: return "pow";
    case UnaryKind::Clamp: return "clamp";
    case UnaryKind::Relu: return "relu";
    case UnaryKind::Abs: return "abs";
  }
  return "unary";
}

}  // namespace

Var scalar(Tape& tape, double value) {
  return tape.constant(Tensor::scalar(value));
}

Var reshape(Var a, Shape shape) {
  Tensor out = a.value().reshaped(std::move(shape));
  auto rule = [](BackwardContext& ctx) {
    auto g = ctx.grad_output().data();
    auto gx = ctx.grad_input(0);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i];
  };
  return a.tape().record("reshape", std::move(out), {a}, std::move(rule));
}

Var binary_op(BinaryKind kind, Var a, Var b) {
  const char* op = binary_name(kind);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const Broadcast plan = plan_broadcast(op, av.shape(), bv.shape());

  Tensor out(plan.out);
  auto o = out.data();
  auto x = av.data();
  auto y = bv.data();
  switch (kind) {
    case BinaryKind::Add:
      for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] + y[ib]; });
      break;
    case BinaryKind::Sub:
      for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] - y[ib]; });
      break;
    case BinaryKind::Mul:
      for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] * y[ib]; });
      break;
    case BinaryKind::Div:
      for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] / y[ib]; });
      break;
  }

  auto rule = [kind, plan](BackwardContext& ctx) {
    auto g = ctx.grad_output().data();
    auto x = ctx.input(0).data();
    auto y = ctx.input(1).data();
    auto ga = ctx.grad_input(0);
    auto gb = ctx.grad_input(1);
    const bool need_a = !ga.empty(), need_b = !gb.empty();
    for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      switch (kind) {
        case BinaryKind::Add:
          if (need_a) ga[ia] += g[i];
          if (need_b) gb[ib] += g[i];
          break;
        case BinaryKind::Sub:
          if (need_a) ga[ia] += g[i];
          if (need_b) gb[ib] -= g[i];
          break;
        case BinaryKind::Mul:
          if (need_a) ga[ia] += g[i] * y[ib];
          if (need_b) gb[ib] += g[i] * x[ia];
          break;
        case BinaryKind::Div:
          if (need_a) ga[ia] += g[i] / y[ib];
          if (need_b) gb[ib] -= g[i] * x[ia] / (y[ib] * y[ib]);
          break;
      }
    });
  };
  return a.tape().record(op, std::move(out), {a, b}, std::move(rule));
}

Var unary_op(UnaryKind kind, Var a, UnaryParams params) {
  const char* op = unary_name(kind);
  const Tensor& av = a.value();
  auto x = av.data();
  Tensor out(av.shape());
  auto o = out.data();
  const double c = params.exponent;

  switch (kind) {
    case UnaryKind::Exp:
      for (std::size_t i = 0; i < x.size(); ++i) o[i] = std::exp(x[i]);
      break;
    case UnaryKind::Log:
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0)) {
          throw DomainError("log: non-positive input " + std::to_string(x[i]));
        }
        o[i] = std::log(x[i]);
      }
      break;
    case UnaryKind::Pow: {
      const bool integral = std::trunc(c) == c;
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (!integral && x[i] < 0.0) {
          throw DomainError("pow: negative input " + std::to_string(x[i]) +
                            " with non-integer exponent " + std::to_string(c));
        }
        o[i] = std::pow(x[i], c);
      }
      break;
    }
    case UnaryKind::Clamp:
      if (!(params.lo <= params.hi)) {
        throw ContractError("clamp: lo > hi");
      }
      for (std::size_t i = 0; i < x.size(); ++i) {
        o[i] = std::clamp(x[i], params.lo, params.hi);
      }
      break;
    case UnaryKind::Relu:
      for (std::size_t i = 0; i < x.size(); ++i) o[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case UnaryKind::Abs:
      for (std::size_t i = 0; i < x.size(); ++i) o[i] = std::fabs(x[i]);
      break;
  }

  auto rule = [kind, params](BackwardContext& ctx) {
    auto gi = ctx.grad_input(0);
    auto g = ctx.grad_output().data();
    auto x = ctx.input(0).data();
    auto y = ctx.output().data();
    const std::size_t n = g.size();
    switch (kind) {
      case UnaryKind::Exp:
        for (std::size_t i = 0; i < n; ++i) gi[i] += g[i] * y[i];
        break;
      case UnaryKind::Log:
        for (std::size_t i = 0; i < n; ++i) gi[i] += g[i] / x[i];
        break;
      case UnaryKind::Pow: {
        const double c = params.exponent;
        for (std::size_t i = 0; i < n; ++i) {
          gi[i] += g[i] * c * std::pow(x[i], c - 1.0);
        }
        break;
      }
      case UnaryKind::Clamp:
        // Zero at and beyond the boundary.
        for (std::size_t i = 0; i < n; ++i) {
          if (x[i] > params.lo && x[i] < params.hi) gi[i] += g[i];
        }
        break;
      case UnaryKind::Relu:
        for (std::size_t i = 0; i < n; ++i) {
          if (x[i] > 0.0) gi[i] += g[i];
        }
        break;
      case UnaryKind::Abs:
        for (std::size_t i = 0; i < n; ++i) {
          if (x[i] > 0.0) gi[i] += g[i];
          else if (x[i] < 0.0) gi[i] -= g[i];
        }
        break;
    }
  };
  return a.tape().record(op, std::move(out), {a}, std::move(rule));
}

Var reduce(ReduceKind kind, Var a, std::vector<std::size_t> axes) {
  const char* op = kind == ReduceKind::Sum ? "sum" : "mean";
  const Tensor& av = a.value();
  const Shape& in_shape = av.shape();
  const std::size_t rank = in_shape.size();

  std::vector<bool> reduced(rank, axes.empty());
  for (std::size_t ax : axes) {
    if (ax >= rank) {
      throw ShapeError(std::string(op) + ": axis " + std::to_string(ax) +
                       " out of range for shape " + to_string(in_shape));
    }
    reduced[ax] = true;
  }
  Shape out_shape = in_shape;
  std::size_t count = 1;
  for (std::size_t i = 0; i < rank; ++i) {
    if (reduced[i]) {
      count *= in_shape[i];
      out_shape[i] = 1;
    }
  }
  if (rank == 0) out_shape = {1};

  // Map each input element to its output slot: broadcasting the output back
  // over the input shape gives exactly that mapping.
  Broadcast plan;
  plan.out = in_shape;
  plan.stride_a = row_major_strides(in_shape);
  plan.stride_b = row_major_strides(out_shape);
  for (std::size_t i = 0; i < rank; ++i) {
    if (reduced[i]) plan.stride_b[i] = 0;
  }
  const double scale = kind == ReduceKind::Mean ? 1.0 / double(count) : 1.0;

  Tensor out(out_shape);
  auto o = out.data();
  auto x = av.data();
  for_each_broadcast(plan, [&](std::size_t, std::size_t ia, std::size_t ib) { o[ib] += x[ia]; });
  if (scale != 1.0) {
    for (double& v : o) v *= scale;
  }

  auto rule = [plan, scale](BackwardContext& ctx) {
    auto gi = ctx.grad_input(0);
    auto g = ctx.grad_output().data();
    for_each_broadcast(plan, [&](std::size_t, std::size_t ia, std::size_t ib) { gi[ia] += g[ib] * scale; });
  };
  return a.tape().record(op, std::move(out), {a}, std::move(rule));
}

Var softmax(Var a, std::size_t axis) {
  const Tensor& av = a.value();
  const Shape& s = av.shape();
  if (axis >= s.size()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) +
                     " out of range for shape " + to_string(s));
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];

  Tensor out(s);
  auto x = av.data();
  auto y = out.data();
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      double mx = x[base];
      for (std::size_t k = 1; k < n; ++k) mx = std::max(mx, x[base + k * inner]);
      double total = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        const double e = std::exp(x[base + k * inner] - mx);
        y[base + k * inner] = e;
        total += e;
      }
      for (std::size_t k = 0; k < n; ++k) y[base + k * inner] /= total;
    }
  }

  auto rule = [outer, inner, n](BackwardContext& ctx) {
    auto gi = ctx.grad_input(0);
    auto g = ctx.grad_output().data();
    auto y = ctx.output().data();
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        double dot = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
          dot += g[base + k * inner] * y[base + k * inner];
        }
        for (std::size_t k = 0; k < n; ++k) {
          const std::size_t j = base + k * inner;
          gi[j] += y[j] * (g[j] - dot);
        }
      }
    }
  };
  return a.tape().record("softmax", std::move(out), {a}, std::move(rule));
}

}  // namespace divseg::nd
