#include "distill/mi_transfer.hpp"

#include <string>

#include "common/error.hpp"

namespace divseg::distill {

std::vector<double> gamma_schedule(int levels) {
  if (levels < 1) {
    throw ConfigError("gamma_schedule: need at least one level, got " +
                      std::to_string(levels));
  }
  std::vector<double> g(static_cast<std::size_t>(levels));
  for (int k = 1; k <= levels; ++k) g[k - 1] = double(k) / double(levels);
  return g;
}

nd::Var variational_nll(nd::Var d_f, nd::Var mu, nd::Var log_sigma) {
  const nd::Shape& s = d_f.shape();
  if (mu.shape() != s) {
    throw ShapeError("variational_nll: target " + nd::to_string(s) + " vs mean " +
                     nd::to_string(mu.shape()));
  }
  if (s.empty() || log_sigma.value().numel() != s[0]) {
    throw ShapeError("variational_nll: log_sigma needs one entry per channel of " +
                     nd::to_string(s));
  }
  nd::Shape channel_shape(s.size(), 1);
  channel_shape[0] = s[0];
  const nd::Var ls = nd::reshape(log_sigma, channel_shape);
  const nd::Var half_precision = nd::exp(ls * -2.0) * 0.5;
  const nd::Var r = d_f.tape().detach(d_f) - mu;
  const double per_channel = double(d_f.value().numel() / s[0]);
  return nd::sum(r * r * half_precision) + nd::sum(log_sigma) * per_channel;
}

nd::Var mi_transfer_loss(const std::vector<std::vector<FeaturePair>>& pairs,
                         const std::vector<HeadVars>& heads,
                         const std::vector<double>& gammas) {
  if (pairs.empty()) throw ConfigError("mi_transfer_loss: empty batch");
  const std::size_t levels = heads.size();
  if (gammas.size() != levels) {
    throw ConfigError("mi_transfer_loss: " + std::to_string(levels) + " heads but " +
                      std::to_string(gammas.size()) + " weights");
  }
  nd::Var total;
  for (std::size_t k = 0; k < levels; ++k) {
    nd::Var level_sum;
    std::size_t n = 0;
    for (const auto& sample : pairs) {
      if (sample.size() != levels) {
        throw ConfigError("mi_transfer_loss: sample has " + std::to_string(sample.size()) +
                          " levels, heads have " + std::to_string(levels));
      }
      const FeaturePair& fp = sample[k];
      if (fp.d_f.shape() != fp.d_m.shape()) {
        throw ShapeError("mi_transfer_loss: teacher/student shape mismatch at level " +
                         std::to_string(k + 1));
      }
      n = fp.d_f.value().numel();
      const nd::Var mu = nd::conv3d(fp.d_m, heads[k].mu_weight, heads[k].mu_bias);
      const nd::Var nll = variational_nll(fp.d_f, mu, heads[k].log_sigma);
      level_sum = level_sum.valid() ? level_sum + nll : nll;
    }
    const double scale = gammas[k] / (double(pairs.size()) * double(n));
    const nd::Var term = level_sum * scale;
    total = total.valid() ? total + term : term;
  }
  if (!total.valid()) throw ConfigError("mi_transfer_loss: no levels");
  return total;
}

}  // namespace divseg::distill
