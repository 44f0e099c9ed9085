#include "bench/adam.hpp"

#include <cmath>

#include "common/error.hpp"

namespace divseg::bench {

Adam::Adam(AdamOptions opt, const std::vector<nd::Tensor>& params) : opt_(opt) {
  for (const auto& p : params) {
    m_.emplace_back(p.numel(), 0.0);
    v_.emplace_back(p.numel(), 0.0);
  }
}

void Adam::step(std::vector<nd::Tensor*> params, const std::vector<nd::Tensor>& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ContractError("Adam::step: parameter count changed");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(opt_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(opt_.beta2, double(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto p = params[k]->data();
    auto g = grads[k].data();
    if (g.size() != p.size() || m_[k].size() != p.size()) {
      throw ShapeError("Adam::step: gradient shape mismatch");
    }
    auto& m = m_[k];
    auto& v = v_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = g[i] + opt_.weight_decay * p[i];
      m[i] = opt_.beta1 * m[i] + (1.0 - opt_.beta1) * gi;
      v[i] = opt_.beta2 * v[i] + (1.0 - opt_.beta2) * gi * gi;
      const double mhat = m[i] / c1;
      const double vhat = v[i] / c2;
      p[i] -= opt_.lr * mhat / (std::sqrt(vhat) + opt_.eps);
    }
  }
}

}  // namespace divseg::bench
