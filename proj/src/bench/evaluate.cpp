#include "bench/evaluate.hpp"

#include <atomic>
#include <exception>
#include <thread>

#include "common/error.hpp"
#include "netmodel/network.hpp"
#include "segloss/segloss.hpp"

namespace divseg::bench {

std::array<double, kRegions> DiceReport::region_average() const {
  std::array<double, kRegions> avg{};
  if (rows.empty()) return avg;
  for (const auto& r : rows) {
    for (std::size_t k = 0; k < kRegions; ++k) avg[k] += r.dsc[k];
  }
  for (double& a : avg) a /= double(rows.size());
  return avg;
}

double DiceReport::grand_average() const {
  const auto avg = region_average();
  return (avg[0] + avg[1] + avg[2]) / double(kRegions);
}

std::array<double, 4> DiceReport::by_missing_count() const {
  std::array<double, 4> sum{};
  std::array<std::size_t, 4> n{};
  for (const auto& r : rows) {
    const int missing = net::ModalityMask::from_bits(r.mask_bits).missing();
    const std::size_t col = std::size_t(3 - missing);  // columns ordered 3, 2, 1, 0
    sum[col] += (r.dsc[0] + r.dsc[1] + r.dsc[2]) / double(kRegions);
    ++n[col];
  }
  for (std::size_t c = 0; c < 4; ++c) sum[c] = n[c] ? sum[c] / double(n[c]) : 0.0;
  return sum;
}

Predictor model_predictor(const net::ModelParams& params) {
  return [&params](const phantom::Sample& s, net::ModalityMask mask) {
    nd::Tape tape;
    net::BoundParams p(tape, params, false);
    std::array<nd::Var, net::kModalities> v;
    for (int i = 0; i < net::kModalities; ++i) {
      if (mask.has(i)) v[i] = tape.constant(s.volumes[i]);
    }
    return net::forward(p, v, mask).logits.value();
  };
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  std::vector<std::exception_ptr> errors(n);
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

DiceReport evaluate_subsets(const Predictor& predict, const std::vector<phantom::Sample>& test_set,
                            std::size_t jobs, std::string method) {
  if (test_set.empty()) throw ConfigError("evaluate: empty test split");
  const auto& subsets = net::canonical_subsets();
  const auto& regions = seg::standard_regions();
  DiceReport report{std::move(method), std::vector<SubsetRow>(subsets.size())};
  parallel_for(subsets.size(), jobs, [&](std::size_t k) {
    SubsetRow row{subsets[k].label(), subsets[k].bits()};
    for (const auto& s : test_set) {
      const nd::Tensor pred = seg::argmax_labels(predict(s, subsets[k]));
      for (std::size_t r = 0; r < kRegions; ++r) {
        const auto d = seg::dsc_detail(pred, s.labels, regions[r]);
        row.dsc[r] += d.value;
        row.empty_regions += d.both_empty;
      }
    }
    for (double& v : row.dsc) v /= double(test_set.size());
    report.rows[k] = std::move(row);
  });
  return report;
}

}  // namespace divseg::bench
