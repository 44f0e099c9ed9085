#include "bench/ablate.hpp"

#include <cstdio>
#include <optional>

namespace divseg::bench {

std::vector<Variant> ablation_variants(const ExperimentConfig& base, AblationAxis axis) {
  base.validate();
  std::vector<Variant> out;
  switch (axis) {
    case AblationAxis::DivergenceFamily: {
      using div::Divergence;
      for (auto d : {Divergence::TotalVariation, Divergence::SquaredHellinger, Divergence::KullbackLeibler,
                     Divergence::NeymanChi2, Divergence::JensenShannon, Divergence::Holder}) {
        Variant v{div::to_string(d), base};
        v.config.loss.divergence = d;
        out.push_back(std::move(v));
      }
      break;
    }
    case AblationAxis::AlphaSweep:
      for (double a : kAlphaSweep) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "holder_a%.2f", a);
        Variant v{buf, base};
        v.config.loss.divergence = div::Divergence::Holder;
        v.config.loss.alpha = a;
        out.push_back(std::move(v));
      }
      break;
    case AblationAxis::LossComponents:
      for (int bits = 0; bits < 4; ++bits) {
        const bool mi = bits == 1 || bits == 3;
        const bool hd = bits >= 2;
        Variant v{std::string("dice") + (mi ? "+mi" : "") + (hd ? "+hd" : ""), base, mi, hd};
        if (!mi) v.config.loss.lambda_mi = 0.0;
        if (!hd) v.config.loss.lambda_hd = 0.0;
        out.push_back(std::move(v));
      }
      break;
  }
  return out;
}

AblationOutcome run_ablation(const ExperimentConfig& base, AblationAxis axis,
                             const std::vector<phantom::Sample>& train_set,
                             const std::vector<phantom::Sample>& test_set, std::size_t jobs,
                             const VariantCallback& on_done) {
  const auto variants = ablation_variants(base, axis);
  AblationOutcome out;
  out.report.axis = axis;
  out.report.rows.resize(variants.size());
  std::vector<std::optional<TrainResult>> runs(variants.size());
  parallel_for(variants.size(), jobs, [&](std::size_t i) {
    const Variant& v = variants[i];
    TrainResult run = train(v.config, train_set);
    VariantResult row{v.label, v.config.loss.divergence, v.config.loss.alpha, v.use_mi, v.use_hd,
                      evaluate_subsets(model_predictor(run.params), test_set, 1, v.label)};
    out.report.rows[i] = std::move(row);
    if (on_done) on_done(i, v, run);
    runs[i] = std::move(run);
  });
  for (auto& r : runs) out.runs.push_back(std::move(*r));
  return out;
}

}  // namespace divseg::bench
