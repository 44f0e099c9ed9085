#pragma once

// Central finite-difference oracle for test code. Deliberately independent of
// the gradcheck harness in the library.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "ndtensor/ops.hpp"
#include "ndtensor/tape.hpp"

namespace divseg::testing {

using LossBuilder =
    std::function<nd::Var(nd::Tape&, const std::vector<nd::Var>& leaves)>;

struct FdResult {
  double max_rel_err = 0.0;
  std::size_t checked = 0;
};

// Skip predicate: (input index, coordinate) -> true to exclude the coordinate.
using SkipFn = std::function<bool(std::size_t, std::size_t)>;

inline FdResult check_gradients(std::vector<nd::Tensor> inputs,
                                const LossBuilder& build, double h = 1e-5,
                                double floor = 1e-8, const SkipFn& skip = {}) {
  std::vector<nd::Tensor> analytic;
  {
    nd::Tape tape;
    std::vector<nd::Var> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
    nd::Var loss = build(tape, leaves);
    auto grads = nd::backward(tape, loss);
    for (const auto& v : leaves) analytic.push_back(grads.at(v));
  }
  auto eval = [&]() {
    nd::Tape tape;
    std::vector<nd::Var> leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
    return build(tape, leaves).value().item();
  };
  FdResult r;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j = 0; j < inputs[i].numel(); ++j) {
      if (skip && skip(i, j)) continue;
      const double old = inputs[i][j];
      inputs[i][j] = old + h;
      const double fp = eval();
      inputs[i][j] = old - h;
      const double fm = eval();
      inputs[i][j] = old;
      const double numeric = (fp - fm) / (2 * h);
      const double a = analytic[i][j];
      if (std::fabs(a) + std::fabs(numeric) <= floor) continue;
      const double rel =
          std::fabs(a - numeric) / std::max(std::fabs(a), std::fabs(numeric));
      r.max_rel_err = std::max(r.max_rel_err, rel);
      ++r.checked;
    }
  }
  return r;
}

inline nd::Tensor random_tensor(nd::Shape shape, std::mt19937_64& rng,
                                double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  nd::Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

}  // namespace divseg::testing
