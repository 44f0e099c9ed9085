#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bench/config.hpp"
#include "ndtensor/ops.hpp"
#include "netmodel/network.hpp"
#include "phantom/phantom.hpp"
#include "segloss/segloss.hpp"

namespace divseg::bench {

struct EpochLog {
  std::size_t epoch = 0;
  double dice = 0.0;
  double mi = 0.0;
  double hd = 0.0;
  double total = 0.0;
};

struct TrainResult {
  net::ModelParams params;
  std::vector<EpochLog> log;
};

// Uniform over the 15 non-empty modality subsets.
net::ModalityMask draw_mask(std::mt19937_64& rng);

// Label tensors derived once per sample.
struct Targets {
  nd::Tensor one_hot;   // exact, for the Dice term
  nd::Tensor smoothed;  // label-smoothed, for the divergence term
};
Targets make_targets(const phantom::Sample& s, const ExperimentConfig& cfg);

struct SampleLoss {
  nd::Var total;
  seg::LossBreakdown parts;
};

// Full-mask tap values under `params`, computed without recording gradients.
std::vector<nd::Tensor> teacher_taps(const net::ModelParams& params, const phantom::Sample& sample);

// Dice + lambda_MI * MI + lambda_HD * HD for one sample on the student tape.
// The teacher (full-mask) pass runs on its own tape and enters as constants;
// it is skipped when lambda_MI is 0. A non-null `fixed_teacher` is used as is.
SampleLoss sample_loss(const net::BoundParams& student, const net::ModelParams& params,
                       const phantom::Sample& sample, const Targets& targets,
                       net::ModalityMask mask, const ExperimentConfig& cfg,
                       const std::vector<nd::Tensor>* fixed_teacher = nullptr);

using EpochCallback = std::function<void(const EpochLog&)>;

// Deterministic given cfg.seed and the sample list. Throws NumericError
// naming the step and loss breakdown on a non-finite loss or gradient.
TrainResult train(const ExperimentConfig& cfg, const std::vector<phantom::Sample>& train_set,
                  const EpochCallback& on_epoch = {});

// epoch,dice,mi,hd,total
std::string train_log_csv(const std::vector<EpochLog>& log);

}  // namespace divseg::bench
