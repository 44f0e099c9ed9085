#include "bench/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <set>

#include "bench/config.hpp"
#include "bench/trainer.hpp"
#include "distill/mi_transfer.hpp"
#include "divergences/divergence.hpp"
#include "netmodel/network.hpp"
#include "segloss/segloss.hpp"

namespace divseg::bench {

namespace {

using nd::Shape;
using nd::Tensor;
using nd::Var;
using Leaves = std::vector<Var>;

Tensor uniform(Shape shape, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

// Values with magnitude in [0.2, 2] and a random sign, away from kinks at 0.
Tensor off_zero(Shape shape, std::mt19937_64& rng) {
  Tensor t = uniform(std::move(shape), rng, 0.2, 2.0);
  std::bernoulli_distribution flip(0.5);
  for (double& v : t.data()) v = flip(rng) ? -v : v;
  return t;
}

Tensor random_labels(Shape shape, std::size_t classes, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> u(0, int(classes) - 1);
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = u(rng);
  return t;
}

// sum(v * r) for a fixed random r, so no output coordinate has a trivial
// upstream gradient.
GradBuilder project(GradBuilder inner, const Shape& out_shape, std::mt19937_64& rng) {
  Tensor r = uniform(out_shape, rng, -1.0, 1.0);
  return [inner = std::move(inner), r = std::move(r)](nd::Tape& t, const Leaves& x) {
    return nd::sum(inner(t, x) * t.constant(r));
  };
}

void add_ndtensor(std::vector<GradCase>& out, std::mt19937_64& rng) {
  auto unary = [&](std::string name, Tensor x, std::function<Var(Var)> f, Shape out_shape) {
    out.push_back({"ndtensor", std::move(name), {std::move(x)},
                   project([f](nd::Tape&, const Leaves& v) { return f(v[0]); }, out_shape, rng)});
  };
  auto binary = [&](std::string name, Tensor a, Tensor b, std::function<Var(Var, Var)> f,
                    Shape out_shape) {
    out.push_back({"ndtensor", std::move(name), {std::move(a), std::move(b)},
                   project([f](nd::Tape&, const Leaves& v) { return f(v[0], v[1]); }, out_shape,
                           rng)});
  };
  const Shape s{2, 3, 4};
  binary("add", uniform(s, rng, -2, 2), uniform({1, 3, 1}, rng, -2, 2), nd::add, s);
  binary("sub", uniform(s, rng, -2, 2), uniform({2, 1, 4}, rng, -2, 2), nd::sub, s);
  binary("mul", uniform(s, rng, -2, 2), uniform(s, rng, -2, 2), nd::mul, s);
  binary("div", uniform(s, rng, -2, 2), uniform({1, 3, 4}, rng, 0.5, 2), nd::div, s);
  unary("exp", uniform(s, rng, -2, 2), [](Var a) { return nd::exp(a); }, s);
  unary("log", uniform(s, rng, 0.2, 3), [](Var a) { return nd::log(a); }, s);
  unary("pow", uniform(s, rng, 0.2, 3), [](Var a) { return nd::pow(a, 2.5); }, s);
  {
    // Interior points and points clamped on either side.
    Tensor x = uniform(s, rng, -0.8, 0.8);
    for (std::size_t i = 0; i < x.numel(); i += 5) x[i] = (i % 2 ? 1.5 : -1.5);
    unary("clamp", std::move(x), [](Var a) { return nd::clamp(a, -1.0, 1.0); }, s);
  }
  unary("relu", off_zero(s, rng), [](Var a) { return nd::relu(a); }, s);
  unary("abs", off_zero(s, rng), [](Var a) { return nd::abs(a); }, s);
  unary("sum", uniform(s, rng, -2, 2), [](Var a) { return nd::sum(a, {1}); }, {2, 1, 4});
  unary("mean", uniform(s, rng, -2, 2), [](Var a) { return nd::mean(a, {0, 2}); }, {1, 3, 1});
  unary("softmax", uniform(s, rng, -2, 2), [](Var a) { return nd::softmax(a, 1); }, s);
  unary("reshape", uniform(s, rng, -2, 2), [](Var a) { return nd::reshape(a, {4, 6}); }, {4, 6});
  unary("downsample2", uniform({2, 4, 4, 4}, rng, -2, 2), [](Var a) { return nd::downsample2(a); },
        {2, 2, 2, 2});
  unary("upsample_nn2", uniform({2, 2, 2, 2}, rng, -2, 2), [](Var a) { return nd::upsample_nn2(a); },
        {2, 4, 4, 4});

  struct ConvGeom {
    const char* name;
    std::size_t cin, cout, k, d, stride, pad;
    bool bias;
  };
  for (auto g : {ConvGeom{"conv3d_k3_same", 3, 4, 3, 4, 1, 1, true},
                 ConvGeom{"conv3d_k1", 4, 8, 1, 4, 1, 0, true},
                 ConvGeom{"conv3d_k3_valid", 2, 4, 3, 4, 1, 0, false},
                 ConvGeom{"conv3d_k3_stride2", 2, 3, 3, 5, 2, 1, true},
                 ConvGeom{"conv3d_k2_odd", 2, 3, 2, 3, 1, 0, false}}) {
    std::vector<Tensor> in{uniform({g.cin, g.d, g.d, g.d}, rng, -1, 1),
                           uniform({g.cout, g.cin, g.k, g.k, g.k}, rng, -1, 1)};
    if (g.bias) in.push_back(uniform({g.cout}, rng, -1, 1));
    const std::size_t od = (g.d + 2 * g.pad - g.k) / g.stride + 1;
    out.push_back({"ndtensor", g.name, std::move(in),
                   project(
                       [g](nd::Tape&, const Leaves& v) {
                         std::optional<Var> b;
                         if (g.bias) b = v[2];
                         return nd::conv3d(v[0], v[1], b, g.stride, g.pad);
                       },
                       {g.cout, od, od, od}, rng)});
  }
  out.push_back({"ndtensor", "group_norm",
                 {uniform({4, 2, 2, 3}, rng, -2, 2), uniform({4}, rng, 0.5, 1.5),
                  uniform({4}, rng, -1, 1)},
                 project([](nd::Tape&, const Leaves& v) { return nd::group_norm(v[0], 2, 1e-5, v[1], v[2]); },
                         {4, 2, 2, 3}, rng)});
}

void add_divergences(std::vector<GradCase>& out, std::mt19937_64& rng) {
  using div::Divergence;
  struct Kind {
    Divergence d;
    double alpha;
  };
  for (auto k : {Kind{Divergence::Holder, 1.1}, Kind{Divergence::Holder, 2.0},
                 Kind{Divergence::Holder, 5.0}, Kind{Divergence::TotalVariation, 1.1},
                 Kind{Divergence::SquaredHellinger, 1.1}, Kind{Divergence::KullbackLeibler, 1.1},
                 Kind{Divergence::NeymanChi2, 1.1}, Kind{Divergence::JensenShannon, 1.1}}) {
    char name[64];
    std::snprintf(name, sizeof name, "voxel_divergence_loss[%s,a=%g]", div::to_string(k.d).c_str(),
                  k.alpha);
    Tensor labels = div::smooth_one_hot(random_labels({2, 2, 3}, 4, rng), 4);
    const auto e = div::HolderExponents::from_alpha(k.alpha);
    out.push_back({"divergences", name, {uniform({4, 2, 2, 3}, rng, -2, 2)},
                   [labels, k, e](nd::Tape& t, const Leaves& v) {
                     return div::voxel_divergence_loss(v[0], t.constant(labels), k.d, e);
                   }});
  }
}

void add_distill(std::vector<GradCase>& out, std::mt19937_64& rng) {
  {
    Tensor df = uniform({3, 2, 2, 2}, rng, -1, 1);
    out.push_back({"distill", "variational_nll",
                   {uniform({3, 2, 2, 2}, rng, -1, 1), uniform({3}, rng, -0.5, 0.5)},
                   [df](nd::Tape& t, const Leaves& v) {
                     return distill::variational_nll(t.constant(df), v[0], v[1]);
                   }});
  }
  // Two samples, two levels with different channel counts.
  const std::vector<Shape> level{{2, 2, 2, 2}, {3, 1, 1, 1}};
  std::vector<Tensor> inputs;
  std::vector<Tensor> teacher;
  for (int b = 0; b < 2; ++b) {
    for (const auto& s : level) {
      inputs.push_back(uniform(s, rng, -1, 1));
      teacher.push_back(uniform(s, rng, -1, 1));
    }
  }
  for (const auto& s : level) {
    const std::size_t c = s[0];
    inputs.push_back(uniform({c, c, 1, 1, 1}, rng, -1, 1));
    inputs.push_back(uniform({c}, rng, -0.5, 0.5));
    inputs.push_back(uniform({c}, rng, -0.5, 0.5));
  }
  out.push_back({"distill", "mi_transfer_loss", std::move(inputs),
                 [teacher](nd::Tape& t, const Leaves& v) {
                   std::vector<std::vector<distill::FeaturePair>> pairs(2);
                   for (std::size_t b = 0; b < 2; ++b) {
                     for (std::size_t k = 0; k < 2; ++k) {
                       pairs[b].push_back({t.constant(teacher[b * 2 + k]), v[b * 2 + k]});
                     }
                   }
                   std::vector<distill::HeadVars> heads{{v[4], v[5], v[6]}, {v[7], v[8], v[9]}};
                   return distill::mi_transfer_loss(pairs, heads, distill::gamma_schedule(2));
                 }});
}

void add_segloss(std::vector<GradCase>& out, std::mt19937_64& rng) {
  for (bool absent : {false, true}) {
    Tensor labels = random_labels({2, 3, 3}, 4, rng);
    if (absent) {
      for (double& v : labels.data()) v = v == 3 ? 0 : v;
    }
    Tensor target = seg::one_hot(labels, 4);
    out.push_back({"segloss", absent ? "dice_loss[absent_class]" : "dice_loss",
                   {uniform({4, 2, 3, 3}, rng, -2, 2)}, [target](nd::Tape& t, const Leaves& v) {
                     return seg::dice_loss(nd::softmax(v[0], 0), t.constant(target));
                   }});
  }
}

// Dice + MI + HD through the whole network on a 4^3 volume with a partial
// mask, so every parameter group including the variational heads is reached.
void add_model(std::vector<GradCase>& out, std::mt19937_64& rng) {
  auto cfg = std::make_shared<ExperimentConfig>();
  cfg->seed = rng();
  auto params = std::make_shared<net::ModelParams>(net::init_params(cfg->seed, cfg->arch));
  auto sample = std::make_shared<phantom::Sample>();
  sample->id = "gradcheck";
  for (auto& v : sample->volumes) v = uniform({1, 4, 4, 4}, rng, -1.5, 1.5);
  sample->labels = random_labels({4, 4, 4}, cfg->arch.classes, rng);
  auto targets = std::make_shared<Targets>(make_targets(*sample, *cfg));
  auto teacher = std::make_shared<std::vector<Tensor>>(teacher_taps(*params, *sample));
  const auto mask = net::ModalityMask::from_bits(0b0101);

  std::vector<Tensor> inputs;
  for (std::size_t i = 0; i < params->size(); ++i) inputs.push_back(params->value(i));
  GradCase c{"model", "full_objective_4x4x4", std::move(inputs),
             [=](nd::Tape&, const Leaves& v) {
               net::BoundParams bound(*params, v);
               return sample_loss(bound, *params, *sample, *targets, mask, *cfg, teacher.get()).total;
             }};
  c.coords_per_input = 3;
  out.push_back(std::move(c));
}

std::vector<std::size_t> pick_coords(std::size_t n, std::size_t limit, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (limit == 0 || limit >= n) return idx;
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(limit);
  std::sort(idx.begin(), idx.end());
  return idx;
}

CaseResult run_case(const GradCase& gc, std::mt19937_64& rng, double tol) {
  CaseResult r;
  r.suite = gc.suite;
  r.name = gc.name;
  std::vector<Tensor> inputs = gc.inputs;
  std::vector<Tensor> analytic;
  {
    nd::Tape tape;
    Leaves leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
    Var loss = gc.build(tape, leaves);
    std::set<std::string> ops;
    for (std::size_t id = 0; id < tape.size(); ++id) {
      if (tape.requires_grad(id) && std::string_view(tape.op_name(id)) != "leaf") {
        ops.insert(tape.op_name(id));
      }
    }
    r.ops.assign(ops.begin(), ops.end());
    const auto grads = nd::backward(tape, loss);
    for (const auto& v : leaves) analytic.push_back(grads.at(v));
  }
  auto eval = [&] {
    nd::Tape tape;
    Leaves leaves;
    for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
    return gc.build(tape, leaves).value().item();
  };
  auto numeric = [&](std::size_t i, std::size_t j, double h) {
    const double old = inputs[i][j];
    inputs[i][j] = old + h;
    const double fp = eval();
    inputs[i][j] = old - h;
    const double fm = eval();
    inputs[i][j] = old;
    return (fp - fm) / (2 * h);
  };
  auto rel = [](double a, double n) {
    return std::fabs(a - n) / std::max({std::fabs(a), std::fabs(n), kGradFloor});
  };
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    for (std::size_t j : pick_coords(inputs[i].numel(), gc.coords_per_input, rng)) {
      const double a = analytic[i][j];
      double e = rel(a, numeric(i, j, gc.step));
      if (e > tol) e = std::min(e, rel(a, numeric(i, j, gc.step / 10)));
      r.max_rel_err = std::max(r.max_rel_err, e);
      ++r.checked;
    }
  }
  r.passed = r.max_rel_err <= tol && std::isfinite(r.max_rel_err);
  return r;
}

}  // namespace

const std::vector<std::string>& differentiable_ops() {
  static const std::vector<std::string> ops{
      "add",     "sub",    "mul",     "div",         "exp",          "log",
      "pow",     "clamp",  "relu",    "abs",         "sum",          "mean",
      "softmax", "reshape", "conv3d", "downsample2", "upsample_nn2", "group_norm"};
  return ops;
}

bool GradcheckReport::passed() const {
  return std::all_of(cases.begin(), cases.end(), [](const CaseResult& c) { return c.passed; });
}

std::vector<std::string> GradcheckReport::failures() const {
  std::vector<std::string> out;
  for (const auto& c : cases) {
    if (!c.passed) out.push_back(c.name);
  }
  return out;
}

std::vector<GradCase> default_cases(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<GradCase> out;
  add_ndtensor(out, rng);
  add_divergences(out, rng);
  add_distill(out, rng);
  add_segloss(out, rng);
  add_model(out, rng);
  return out;
}

GradcheckReport run_gradcheck(const std::vector<GradCase>& cases, std::uint64_t seed,
                              double tolerance) {
  GradcheckReport rep;
  rep.tolerance = tolerance;
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::set<std::string> seen;
  std::vector<std::string> suite_order;
  std::map<std::string, SuiteResult> suites;
  for (const auto& gc : cases) {
    CaseResult r;
    try {
      r = run_case(gc, rng, tolerance);
    } catch (const std::exception& e) {
      r = CaseResult{};
      r.suite = gc.suite;
      r.name = gc.name;
      r.error = e.what();
      r.max_rel_err = std::numeric_limits<double>::infinity();
    }
    seen.insert(r.ops.begin(), r.ops.end());
    if (!suites.count(gc.suite)) {
      suite_order.push_back(gc.suite);
      suites[gc.suite].name = gc.suite;
    }
    auto& s = suites[gc.suite];
    s.max_rel_err = std::max(s.max_rel_err, r.max_rel_err);
    ++s.cases;
    s.passed = s.passed && r.passed;
    rep.cases.push_back(std::move(r));
  }
  for (const auto& name : suite_order) rep.suites.push_back(suites[name]);
  for (const auto& op : differentiable_ops()) {
    (seen.count(op) ? rep.covered_ops : rep.missing_ops).push_back(op);
  }
  return rep;
}

std::string format_gradcheck(const GradcheckReport& r) {
  std::string out;
  char buf[256];
  for (const auto& s : r.suites) {
    std::snprintf(buf, sizeof buf, "%-12s %-4s max_rel_err=%.3e cases=%zu\n", s.name.c_str(),
                  s.passed ? "PASS" : "FAIL", s.max_rel_err, s.cases);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "coverage %zu/%zu differentiable ops\n", r.covered_ops.size(),
                r.covered_ops.size() + r.missing_ops.size());
  out += buf;
  for (const auto& op : r.missing_ops) out += "  not exercised: " + op + "\n";
  for (const auto& c : r.cases) {
    if (c.passed) continue;
    std::snprintf(buf, sizeof buf, "FAIL %s/%s max_rel_err=%.3e", c.suite.c_str(), c.name.c_str(),
                  c.max_rel_err);
    out += buf;
    if (!c.error.empty()) out += " error: " + c.error;
    out += "\n";
  }
  std::snprintf(buf, sizeof buf, "gradcheck %s (tolerance %.0e)\n", r.passed() ? "PASS" : "FAIL",
                r.tolerance);
  out += buf;
  return out;
}

}  // namespace divseg::bench
