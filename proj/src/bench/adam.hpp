#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ndtensor/tensor.hpp"

namespace divseg::bench {

struct AdamOptions {
  double lr = 8e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
};

class Adam {
 public:
  Adam(AdamOptions opt, const std::vector<nd::Tensor>& params);

  // One bias-corrected update; grads[i] matches params[i] in shape.
  void step(std::vector<nd::Tensor*> params, const std::vector<nd::Tensor>& grads);
  std::size_t steps() const noexcept { return t_; }

 private:
  AdamOptions opt_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace divseg::bench
