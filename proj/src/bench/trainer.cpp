#include "bench/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "bench/adam.hpp"
#include "common/error.hpp"
#include "distill/mi_transfer.hpp"
#include "divergences/divergence.hpp"

namespace divseg::bench {

namespace {

constexpr std::uint64_t kTrainStream = 0x5eedf00dULL;

std::array<nd::Var, net::kModalities> volumes_on(nd::Tape& tape, const phantom::Sample& s,
                                                 net::ModalityMask mask) {
  std::array<nd::Var, net::kModalities> out;
  for (int i = 0; i < net::kModalities; ++i) {
    if (mask.has(i)) out[i] = tape.constant(s.volumes[i]);
  }
  return out;
}

std::string describe(const seg::LossBreakdown& b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "dice=%.6g mi=%.6g hd=%.6g total=%.6g", b.dice, b.mi, b.hd,
                b.total);
  return buf;
}

}  // namespace

net::ModalityMask draw_mask(std::mt19937_64& rng) {
  std::uniform_int_distribution<unsigned> u(1, 15);
  return net::ModalityMask::from_bits(u(rng));
}

Targets make_targets(const phantom::Sample& s, const ExperimentConfig& cfg) {
  return {seg::one_hot(s.labels, cfg.arch.classes),
          div::smooth_one_hot(s.labels, cfg.arch.classes, cfg.loss.label_smoothing)};
}

std::vector<nd::Tensor> teacher_taps(const net::ModelParams& params, const phantom::Sample& sample) {
  nd::Tape scratch;
  net::BoundParams frozen(scratch, params, false);
  const auto full = net::ModalityMask::full();
  std::vector<nd::Tensor> out;
  for (const auto& t : net::forward(frozen, volumes_on(scratch, sample, full), full).taps) {
    out.push_back(t.value());
  }
  return out;
}

SampleLoss sample_loss(const net::BoundParams& student, const net::ModelParams& params,
                       const phantom::Sample& sample, const Targets& targets,
                       net::ModalityMask mask, const ExperimentConfig& cfg,
                       const std::vector<nd::Tensor>* fixed_teacher) {
  nd::Tape& tape = student.tape();
  const auto out = net::forward(student, volumes_on(tape, sample, mask), mask);

  nd::Var dice = seg::dice_loss(nd::softmax(out.logits, 0), tape.constant(targets.one_hot));
  nd::Var total = dice;
  double mi_value = 0.0, hd_value = 0.0;

  if (cfg.loss.lambda_hd > 0) {
    const auto e = div::HolderExponents::from_alpha(cfg.loss.alpha);
    nd::Var hd = div::voxel_divergence_loss(out.logits, tape.constant(targets.smoothed),
                                            cfg.loss.divergence, e);
    hd_value = hd.value().item();
    total = total + hd * cfg.loss.lambda_hd;
  }
  if (cfg.loss.lambda_mi > 0) {
    std::vector<nd::Tensor> teacher;
    if (fixed_teacher) {
      teacher = *fixed_teacher;
    } else if (mask == net::ModalityMask::full()) {
      for (const auto& t : out.taps) teacher.push_back(t.value());
    } else {
      teacher = teacher_taps(params, sample);
    }
    if (teacher.size() != out.taps.size()) throw ContractError("sample_loss: teacher tap count mismatch");
    std::vector<distill::FeaturePair> pairs;
    std::vector<distill::HeadVars> heads;
    for (std::size_t k = 0; k < out.taps.size(); ++k) {
      pairs.push_back({tape.constant(teacher[k]), out.taps[k]});
      const std::string p = "mi" + std::to_string(k + 1);
      heads.push_back({student[p + ".w"], student[p + ".b"], student[p + ".log_sigma"]});
    }
    nd::Var mi = distill::mi_transfer_loss({pairs}, heads, cfg.gammas());
    mi_value = mi.value().item();
    total = total + mi * cfg.loss.lambda_mi;
  }
  auto parts = seg::total_loss(dice.value().item(), mi_value, hd_value, cfg.loss.lambda_mi,
                               cfg.loss.lambda_hd);
  return {total, parts};
}

TrainResult train(const ExperimentConfig& cfg, const std::vector<phantom::Sample>& train_set,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: empty training split");
  net::ModelParams params = net::init_params(cfg.seed, cfg.arch);
  std::vector<nd::Tensor> initial;
  for (std::size_t i = 0; i < params.size(); ++i) initial.push_back(params.value(i));
  Adam adam({cfg.optim.lr, cfg.optim.beta1, cfg.optim.beta2, cfg.optim.eps,
             cfg.optim.weight_decay},
            initial);
  std::vector<nd::Tensor*> slots;
  for (std::size_t i = 0; i < params.size(); ++i) slots.push_back(&params.value(i));

  std::vector<Targets> targets;
  for (const auto& s : train_set) targets.push_back(make_targets(s, cfg));

  std::mt19937_64 rng(cfg.seed ^ kTrainStream);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<EpochLog> log;
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= cfg.optim.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    EpochLog acc{epoch};
    for (std::size_t start = 0; start < order.size(); start += cfg.optim.batch_size, ++step) {
      const std::size_t end = std::min(order.size(), start + cfg.optim.batch_size);
      const double scale = 1.0 / double(end - start);
      std::vector<nd::Tensor> grads;
      for (const auto* p : slots) grads.emplace_back(p->shape(), 0.0);

      for (std::size_t b = start; b < end; ++b) {
        const std::size_t idx = order[b];
        const auto mask = draw_mask(rng);
        nd::Tape tape;
        net::BoundParams bound(tape, params, true);
        SampleLoss loss;
        try {
          loss = sample_loss(bound, params, train_set[idx], targets[idx], mask, cfg);
        } catch (const NumericError& e) {
          throw NumericError("training step " + std::to_string(step) + ": " + e.what());
        }
        if (!std::isfinite(loss.parts.total)) {
          throw NumericError("training step " + std::to_string(step) +
                             ": non-finite loss (" + describe(loss.parts) + ")");
        }
        const auto g = nd::backward(tape, loss.total * scale);
        for (std::size_t k = 0; k < slots.size(); ++k) {
          auto dst = grads[k].data();
          auto src = g.at(bound.at(k)).data();
          for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
        }
        acc.dice += loss.parts.dice;
        acc.mi += loss.parts.mi;
        acc.hd += loss.parts.hd;
        acc.total += loss.parts.total;
      }
      for (const auto& g : grads) {
        if (!g.all_finite()) {
          throw NumericError("training step " + std::to_string(step) + ": non-finite gradient");
        }
      }
      adam.step(slots, grads);
    }
    const double n = double(order.size());
    acc.dice /= n;
    acc.mi /= n;
    acc.hd /= n;
    acc.total /= n;
    log.push_back(acc);
    if (on_epoch) on_epoch(acc);
  }
  return {std::move(params), std::move(log)};
}

std::string train_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,dice,mi,hd,total\n";
  char buf[160];
  for (const auto& e : log) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g,%.10g,%.10g\n", e.epoch, e.dice, e.mi, e.hd,
                  e.total);
    out += buf;
  }
  return out;
}

}  // namespace divseg::bench
