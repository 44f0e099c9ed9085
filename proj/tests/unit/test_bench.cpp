#include <gtest/gtest.h>

#include <bit>
#include <cmath>
#include <random>
#include <sstream>

#include "bench/ablate.hpp"
#include "bench/adam.hpp"
#include "bench/config.hpp"
#include "bench/evaluate.hpp"
#include "bench/gradcheck.hpp"
#include "bench/report.hpp"
#include "bench/trainer.hpp"
#include "common/error.hpp"
#include "phantom/dataset.hpp"
#include "segloss/segloss.hpp"

using namespace divseg;
using namespace divseg::bench;
using nd::Tensor;

namespace {

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

ExperimentConfig tiny_config(std::uint64_t seed = 7) {
  ExperimentConfig c;
  c.seed = seed;
  c.data.dims = {8, 8, 8};
  c.data.n_train = 4;
  c.data.n_test = 2;
  c.optim.epochs = 2;
  c.optim.batch_size = 3;
  return c;
}

std::vector<phantom::Sample> samples(std::uint64_t seed, std::size_t n, phantom::Dims dims = {8, 8, 8}) {
  std::vector<phantom::Sample> out;
  for (auto s : phantom::sample_seeds(seed, n)) out.push_back(phantom::generate_phantom(s, dims));
  return out;
}

DiceReport synthetic_report(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DiceReport r{"synthetic", {}};
  for (auto m : net::canonical_subsets()) r.rows.push_back({m.label(), m.bits(), {u(rng), u(rng), u(rng)}, 0});
  return r;
}

}  // namespace

// Textbook scalar Adam with the decay term folded into the gradient.
TEST(Adam, MatchesScalarReferenceFor100Steps) {
  const AdamOptions opt{0.05, 0.9, 0.999, 1e-8, 1e-3};
  Tensor theta({1}, 0.5);
  Adam adam(opt, {theta});
  double ref = 0.5, m = 0.0, v = 0.0;
  for (int t = 1; t <= 100; ++t) {
    Tensor g({1}, 2.0 * (theta[0] - 3.0));
    adam.step({&theta}, {g});

    const double gr = 2.0 * (ref - 3.0) + opt.weight_decay * ref;
    m = opt.beta1 * m + (1 - opt.beta1) * gr;
    v = opt.beta2 * v + (1 - opt.beta2) * gr * gr;
    const double mh = m / (1 - std::pow(opt.beta1, t));
    const double vh = v / (1 - std::pow(opt.beta2, t));
    ref -= opt.lr * mh / (std::sqrt(vh) + opt.eps);
    ASSERT_NEAR(theta[0], ref, 1e-12) << "step " << t;
  }
  EXPECT_EQ(adam.steps(), 100u);
  EXPECT_LT(std::fabs(theta[0] - 3.0), 0.5);
}

TEST(ModalityDropout, UniformOverFifteenSubsetsChiSquare) {
  std::mt19937_64 rng(12345);
  std::array<std::size_t, 16> counts{};
  const std::size_t n = 15000;
  for (std::size_t i = 0; i < n; ++i) ++counts[draw_mask(rng).bits()];
  EXPECT_EQ(counts[0], 0u);
  double chi2 = 0.0;
  const double expected = double(n) / 15.0;
  for (int b = 1; b < 16; ++b) chi2 += std::pow(double(counts[b]) - expected, 2) / expected;
  // Upper 0.001 quantile of chi-square with 14 degrees of freedom.
  EXPECT_LT(chi2, 36.123);
}

TEST(Config, DefaultsMatchTrainingRegime) {
  ExperimentConfig c;
  EXPECT_DOUBLE_EQ(c.loss.alpha, 1.1);
  EXPECT_EQ(c.loss.divergence, div::Divergence::Holder);
  EXPECT_DOUBLE_EQ(c.optim.lr, 0.0008);
  EXPECT_DOUBLE_EQ(c.optim.weight_decay, 0.00001);
  EXPECT_DOUBLE_EQ(c.optim.beta1, 0.9);
  EXPECT_DOUBLE_EQ(c.optim.beta2, 0.999);
  EXPECT_DOUBLE_EQ(c.optim.eps, 1e-8);
  EXPECT_EQ(c.optim.epochs, 60u);
  EXPECT_EQ(c.optim.batch_size, 4u);
  EXPECT_EQ(c.data.n_train, 40u);
  EXPECT_EQ(c.data.n_test, 10u);
  EXPECT_NO_THROW(c.validate());
}

TEST(Config, RejectsInvalidValues) {
  auto bad = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](ExperimentConfig& c) { c.loss.alpha = 1.0; });
  bad([](ExperimentConfig& c) { c.loss.alpha = 0.5; });
  bad([](ExperimentConfig& c) { c.optim.epochs = 0; });
  bad([](ExperimentConfig& c) { c.optim.batch_size = 0; });
  bad([](ExperimentConfig& c) { c.optim.lr = 0; });
  bad([](ExperimentConfig& c) { c.loss.lambda_mi = -1; });
  bad([](ExperimentConfig& c) { c.loss.gammas = std::vector<double>{1.0}; });
  bad([](ExperimentConfig& c) { c.data.dims = {10, 10, 10}; });
}

TEST(Config, JsonRoundTripAndStrictParsing) {
  ExperimentConfig c;
  c.seed = 99;
  c.loss.divergence = div::Divergence::JensenShannon;
  c.loss.alpha = 1.15;
  c.loss.gammas = std::vector<double>{0.2, 0.3, 0.5};
  c.optim.epochs = 3;
  const auto text = config_to_json(c);
  const auto back = config_from_json(text);
  EXPECT_EQ(config_to_json(back), text);
  EXPECT_EQ(back.seed, 99u);
  EXPECT_EQ(back.loss.divergence, div::Divergence::JensenShannon);

  EXPECT_NO_THROW(config_from_json(R"({"seed": 3, "optim": {"epochs": 2}})"));
  EXPECT_THROW(config_from_json(R"({"sede": 3})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"optim": {"epochs": "two"}})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"loss": {"alpha": 1.0}})"), ConfigError);
  EXPECT_THROW(config_from_json(R"({"loss": {"divergence": "renyi"}})"), ConfigError);
  EXPECT_THROW(config_from_json("{not json"), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/divseg.json"), ConfigError);
}

TEST(Train, TwoEpochsAreBitwiseDeterministic) {
  const auto cfg = tiny_config();
  const auto data = samples(1, 4);
  const auto a = train(cfg, data);
  const auto b = train(cfg, data);
  EXPECT_EQ(net::serialize(a.params), net::serialize(b.params));
  EXPECT_EQ(train_log_csv(a.log), train_log_csv(b.log));
  ASSERT_EQ(a.log.size(), 2u);

  auto other = cfg;
  other.seed = 8;
  EXPECT_NE(net::serialize(train(other, data).params), net::serialize(a.params));
}

TEST(Train, LogBreakdownIsConsistent) {
  auto cfg = tiny_config();
  cfg.loss.lambda_mi = 0.5;
  cfg.loss.lambda_hd = 2.0;
  const auto r = train(cfg, samples(2, 4));
  for (const auto& e : r.log) {
    EXPECT_NEAR(e.total, e.dice + 0.5 * e.mi + 2.0 * e.hd, 1e-12);
    EXPECT_GT(e.dice, 0.0);
    EXPECT_GT(e.hd, 0.0);
  }
  const auto csv = lines(train_log_csv(r.log));
  ASSERT_EQ(csv.size(), 3u);
  EXPECT_EQ(csv[0], "epoch,dice,mi,hd,total");
  EXPECT_EQ(split(csv[2], ',')[0], "2");
}

TEST(Train, ZeroLambdasLogExactZeros) {
  auto cfg = tiny_config();
  cfg.loss.lambda_mi = 0.0;
  cfg.loss.lambda_hd = 0.0;
  const auto r = train(cfg, samples(3, 4));
  for (const auto& e : r.log) {
    EXPECT_EQ(e.mi, 0.0);
    EXPECT_EQ(e.hd, 0.0);
    EXPECT_EQ(e.total, e.dice);
  }
}

TEST(Train, DivergentRunReportsStep) {
  auto cfg = tiny_config();
  cfg.optim.lr = 1e300;
  cfg.optim.epochs = 3;
  try {
    train(cfg, samples(4, 4));
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("step"), std::string::npos) << e.what();
  }
}

TEST(Train, EmptySplitIsConfigError) {
  EXPECT_THROW(train(tiny_config(), {}), ConfigError);
}

TEST(Evaluate, PerfectOracleScoresOneEverywhere) {
  const auto test = samples(5, 3);
  Predictor oracle = [](const phantom::Sample& s, net::ModalityMask) { return seg::one_hot(s.labels, 4); };
  const auto rep = evaluate_subsets(oracle, test, 1, "oracle");
  ASSERT_EQ(rep.rows.size(), 15u);
  for (const auto& row : rep.rows) {
    for (double v : row.dsc) EXPECT_EQ(v, 1.0);
  }
  EXPECT_EQ(rep.grand_average(), 1.0);
}

TEST(Evaluate, RowsFollowCanonicalOrder) {
  const auto rep = evaluate_subsets(
      [](const phantom::Sample& s, net::ModalityMask) { return seg::one_hot(s.labels, 4); }, samples(6, 1));
  const std::vector<std::string> expected{"Fl",    "T2",    "T1c",   "T1",    "T2,Fl",
                                          "T1c,Fl", "T1c,T2", "T1,Fl", "T1,T2", "T1,T1c",
                                          "~T1",   "~T1c",  "~T2",   "~Fl",   "Full"};
  ASSERT_EQ(rep.rows.size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) EXPECT_EQ(rep.rows[i].subset, expected[i]);
}

TEST(Evaluate, MaskReachesPredictor) {
  // A predictor that is perfect only with the full mask.
  Predictor p = [](const phantom::Sample& s, net::ModalityMask m) {
    return m == net::ModalityMask::full() ? seg::one_hot(s.labels, 4) : seg::one_hot(Tensor(s.labels.shape(), 0.0), 4);
  };
  const auto rep = evaluate_subsets(p, samples(7, 2));
  for (std::size_t i = 0; i + 1 < rep.rows.size(); ++i) EXPECT_LT(rep.rows[i].dsc[0], 1.0);
  EXPECT_EQ(rep.rows.back().dsc[0], 1.0);
}

TEST(Evaluate, ParallelEqualsSerialAndParamsUntouched) {
  const auto cfg = tiny_config();
  const auto params = net::init_params(11, cfg.arch);
  const auto before = net::serialize(params);
  const auto test = samples(8, 2);
  const auto serial = evaluate_subsets(model_predictor(params), test, 1);
  const auto parallel = evaluate_subsets(model_predictor(params), test, 4);
  EXPECT_EQ(report_to_json(serial), report_to_json(parallel));
  for (std::size_t i = 0; i < serial.rows.size(); ++i) EXPECT_EQ(serial.rows[i].dsc, parallel.rows[i].dsc);
  EXPECT_EQ(net::serialize(params), before);
}

TEST(Evaluate, EmptyTestSplitIsConfigError) {
  const auto params = net::init_params(1, net::ArchConfig{});
  EXPECT_THROW(evaluate_subsets(model_predictor(params), {}), ConfigError);
}

TEST(Evaluate, AveragesRecomputableFromRows) {
  const auto rep = synthetic_report(3);
  std::array<double, 3> col{};
  for (const auto& r : rep.rows) {
    for (int k = 0; k < 3; ++k) col[k] += r.dsc[k] / 15.0;
  }
  const auto avg = rep.region_average();
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(avg[k], col[k], 1e-9);
  EXPECT_NEAR(rep.grand_average(), (col[0] + col[1] + col[2]) / 3, 1e-9);

  // Group means by number of missing modalities, columns 3, 2, 1, 0.
  std::array<double, 4> sum{};
  std::array<int, 4> n{};
  for (const auto& r : rep.rows) {
    const int present = std::popcount(r.mask_bits);
    sum[present - 1] += (r.dsc[0] + r.dsc[1] + r.dsc[2]) / 3;
    ++n[present - 1];
  }
  EXPECT_EQ(n, (std::array<int, 4>{4, 6, 4, 1}));
  const auto g = rep.by_missing_count();
  for (int c = 0; c < 4; ++c) EXPECT_NEAR(g[c], sum[c] / n[c], 1e-12);
  // The grand average weights the groups by subset count.
  EXPECT_NEAR(rep.grand_average(), (4 * g[0] + 6 * g[1] + 4 * g[2] + g[3]) / 15, 1e-12);
}

// The same weighting reproduces the published ablation average from its
// per-group columns: (60.2, 71.9, 77.1, 80.5) -> 70.7.
TEST(Report, SubsetWeightedAverageMatchesPublishedAblationRow) {
  const double avg = (4 * 60.2 + 6 * 71.9 + 4 * 77.1 + 80.5) / 15;
  EXPECT_EQ(format_percent(avg / 100), "70.7");
  const double full = (4 * 73.6 + 6 * 80.3 + 4 * 84.4 + 87.6) / 15;
  EXPECT_EQ(format_percent(full / 100), "80.1");
}

TEST(Report, CsvLayout) {
  const auto rep = synthetic_report(4);
  const auto csv = lines(emit_table(rep, TableFormat::Csv));
  ASSERT_EQ(csv.size(), 17u);
  EXPECT_EQ(csv[0], "subset,WT,TC,ET");
  EXPECT_EQ(csv[16].substr(0, 4), "avg,");
  EXPECT_EQ(csv[5].rfind("\"T2,Fl\",", 0), 0u);
  EXPECT_EQ(csv[1].rfind("Fl,", 0), 0u);
  std::array<double, 3> mean{};
  for (int i = 1; i <= 15; ++i) {
    const auto cells = split(csv[i], ',');
    for (int k = 0; k < 3; ++k) mean[k] += std::stod(cells[cells.size() - 3 + k]) / 15;
  }
  const auto avg = split(csv[16], ',');
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(std::stod(avg[1 + k]), mean[k], 0.1);
  EXPECT_EQ(emit_table(rep, TableFormat::Csv), emit_table(rep, TableFormat::Csv));
}

TEST(Report, MarkdownMirrorsCsv) {
  const auto rep = synthetic_report(5);
  const auto md = lines(emit_table(rep, TableFormat::Markdown));
  ASSERT_EQ(md.size(), 18u);
  EXPECT_EQ(md[0], "| subset | WT | TC | ET |");
  EXPECT_EQ(md[17].rfind("| avg |", 0), 0u);
  EXPECT_EQ(md[2].find('*'), std::string::npos);
}

TEST(Report, JsonRoundTripReemitsIdentically) {
  const auto rep = synthetic_report(6);
  const auto back = report_from_json(report_to_json(rep));
  EXPECT_EQ(emit_table(back, TableFormat::Csv), emit_table(rep, TableFormat::Csv));
  EXPECT_EQ(report_to_json(back), report_to_json(rep));
  EXPECT_EQ(emit_saved_report(report_to_json(rep), TableFormat::Markdown),
            emit_table(rep, TableFormat::Markdown));
  EXPECT_THROW(report_from_json("{}"), ParseError);
  EXPECT_THROW(report_from_json("[1,"), ParseError);
  auto bad = rep;
  std::swap(bad.rows[0], bad.rows[1]);
  EXPECT_THROW(report_from_json(report_to_json(bad)), ParseError);
}

TEST(Report, FormatParsing) {
  EXPECT_EQ(parse_format("csv"), TableFormat::Csv);
  EXPECT_EQ(parse_format("markdown"), TableFormat::Markdown);
  EXPECT_THROW(parse_format("xlsx"), ConfigError);
}

TEST(Ablation, LossComponentsFollowTableRowOrder) {
  const auto v = ablation_variants(ExperimentConfig{}, AblationAxis::LossComponents);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v[0].label, "dice");
  EXPECT_EQ(v[1].label, "dice+mi");
  EXPECT_EQ(v[2].label, "dice+hd");
  EXPECT_EQ(v[3].label, "dice+mi+hd");
  EXPECT_EQ(v[0].config.loss.lambda_mi, 0.0);
  EXPECT_EQ(v[0].config.loss.lambda_hd, 0.0);
  EXPECT_EQ(v[1].config.loss.lambda_hd, 0.0);
  EXPECT_EQ(v[1].config.loss.lambda_mi, 1.0);
  EXPECT_EQ(v[2].config.loss.lambda_mi, 0.0);
  EXPECT_EQ(v[3].config.loss.lambda_mi, 1.0);
  EXPECT_EQ(v[3].config.loss.lambda_hd, 1.0);
  for (const auto& x : v) EXPECT_EQ(x.config.seed, ExperimentConfig{}.seed);
}

TEST(Ablation, AlphaSweepHasFiveLabeledRows) {
  const auto v = ablation_variants(ExperimentConfig{}, AblationAxis::AlphaSweep);
  const std::vector<double> alphas{1.05, 1.08, 1.10, 1.15, 1.20};
  ASSERT_EQ(v.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) {
    EXPECT_DOUBLE_EQ(v[i].config.loss.alpha, alphas[i]);
    EXPECT_EQ(v[i].config.loss.divergence, div::Divergence::Holder);
  }
  EXPECT_EQ(v[2].label, "holder_a1.10");
}

TEST(Ablation, DivergenceFamilyEndsWithHolder) {
  const auto v = ablation_variants(ExperimentConfig{}, AblationAxis::DivergenceFamily);
  ASSERT_EQ(v.size(), 6u);
  EXPECT_EQ(v.back().config.loss.divergence, div::Divergence::Holder);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) EXPECT_TRUE(div::is_f_divergence(v[i].config.loss.divergence));
  EXPECT_EQ(divergence_title(v.back().config.loss.divergence), "Hölder");
}

TEST(Ablation, ComparisonTablesUseAxisLayouts) {
  ComparisonReport cmp{AblationAxis::DivergenceFamily, {}};
  for (const auto& v : ablation_variants(ExperimentConfig{}, AblationAxis::DivergenceFamily)) {
    cmp.rows.push_back({v.label, v.config.loss.divergence, v.config.loss.alpha, v.use_mi, v.use_hd,
                        synthetic_report(cmp.rows.size() + 10)});
  }
  auto csv = lines(emit_comparison(cmp, TableFormat::Csv));
  ASSERT_EQ(csv.size(), 7u);
  EXPECT_EQ(csv[0], "method,WT,TC,ET,Avg");
  EXPECT_EQ(csv[1].rfind("Total Variation,", 0), 0u);
  EXPECT_EQ(csv[6].rfind("Hölder,", 0), 0u);

  cmp.axis = AblationAxis::AlphaSweep;
  cmp.rows.resize(5);
  for (std::size_t i = 0; i < 5; ++i) {
    cmp.rows[i].divergence = div::Divergence::Holder;
    cmp.rows[i].alpha = kAlphaSweep[i];
  }
  csv = lines(emit_comparison(cmp, TableFormat::Csv));
  ASSERT_EQ(csv.size(), 6u);
  EXPECT_EQ(csv[0], "divergence,alpha,WT,TC,ET,Avg");
  EXPECT_EQ(csv[1].rfind("Hölder,1.05,", 0), 0u);
  EXPECT_EQ(csv[5].rfind("Hölder,1.20,", 0), 0u);

  cmp.axis = AblationAxis::LossComponents;
  cmp.rows.resize(4);
  cmp.rows[0].use_mi = cmp.rows[0].use_hd = false;
  csv = lines(emit_comparison(cmp, TableFormat::Csv));
  ASSERT_EQ(csv.size(), 5u);
  EXPECT_EQ(csv[0], "dice,mi,hd,3,2,1,0,Avg");
  EXPECT_EQ(csv[1].rfind("1,0,0,", 0), 0u);
  const auto cells = split(csv[1], ',');
  EXPECT_EQ(cells.back(), format_percent(cmp.rows[0].report.grand_average()));
}

TEST(Ablation, MarkdownStarsBestPerColumn) {
  auto a = synthetic_report(1), b = synthetic_report(1);
  for (auto& r : a.rows) r.dsc = {0.9, 0.1, 0.1};
  for (auto& r : b.rows) r.dsc = {0.5, 0.6, 0.7};
  ComparisonReport cmp{AblationAxis::DivergenceFamily,
                       {{"kullback_leibler", div::Divergence::KullbackLeibler, 1.1, true, true, a},
                        {"holder", div::Divergence::Holder, 1.1, true, true, b}}};
  const auto md = lines(emit_comparison(cmp, TableFormat::Markdown));
  ASSERT_EQ(md.size(), 4u);
  EXPECT_EQ(md[2], "| Kullback-Leibler | 90.0* | 10.0 | 10.0 | 36.7 |");
  EXPECT_EQ(md[3], "| Hölder | 50.0 | 60.0* | 70.0* | 60.0* |");
  const auto back = comparison_from_json(comparison_to_json(cmp));
  EXPECT_EQ(emit_comparison(back, TableFormat::Markdown), emit_comparison(cmp, TableFormat::Markdown));
}

TEST(Ablation, RunIsIndependentOfJobs) {
  auto cfg = tiny_config();
  cfg.optim.epochs = 1;
  const auto train_set = samples(9, 3);
  const auto test_set = samples(10, 1);
  const auto serial = run_ablation(cfg, AblationAxis::LossComponents, train_set, test_set, 1);
  const auto parallel = run_ablation(cfg, AblationAxis::LossComponents, train_set, test_set, 3);
  EXPECT_EQ(comparison_to_json(serial.report), comparison_to_json(parallel.report));
  ASSERT_EQ(serial.runs.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(net::serialize(serial.runs[i].params), net::serialize(parallel.runs[i].params));
  }
  EXPECT_EQ(serial.runs[0].log[0].mi, 0.0);
  EXPECT_EQ(serial.runs[0].log[0].hd, 0.0);
}

TEST(Gradcheck, DefaultSuitesPassWithFullCoverage) {
  const auto rep = run_gradcheck(default_cases(0), 0);
  EXPECT_TRUE(rep.passed()) << format_gradcheck(rep);
  EXPECT_TRUE(rep.missing_ops.empty());
  EXPECT_EQ(rep.covered_ops.size(), differentiable_ops().size());
  std::vector<std::string> names;
  for (const auto& s : rep.suites) names.push_back(s.name);
  EXPECT_EQ(names, (std::vector<std::string>{"ndtensor", "divergences", "distill", "segloss", "model"}));
  EXPECT_NE(format_gradcheck(rep).find("coverage 18/18"), std::string::npos);
}

// x^2 with a deliberately wrong derivative of 3x.
TEST(Gradcheck, CorruptedRuleIsReportedByName) {
  GradCase bad{"fixture", "corrupted_square", {Tensor({3}, std::vector<double>{0.5, -1.0, 2.0})},
               [](nd::Tape& t, const std::vector<nd::Var>& v) {
                 Tensor out = v[0].value();
                 for (double& x : out.data()) x *= x;
                 nd::Var y = t.record("corrupted_square", out, {v[0]}, [](nd::BackwardContext& ctx) {
                   auto g = ctx.grad_input(0);
                   for (std::size_t i = 0; i < g.size(); ++i) {
                     g[i] += 3.0 * ctx.input(0)[i] * ctx.grad_output()[i];
                   }
                 });
                 return nd::sum(y);
               }};
  auto cases = default_cases(1);
  cases.push_back(bad);
  const auto rep = run_gradcheck(cases, 1);
  EXPECT_FALSE(rep.passed());
  EXPECT_EQ(rep.failures(), std::vector<std::string>{"corrupted_square"});
  const auto text = format_gradcheck(rep);
  EXPECT_NE(text.find("FAIL fixture/corrupted_square"), std::string::npos) << text;
  EXPECT_NE(text.find("gradcheck FAIL"), std::string::npos);
}

TEST(Gradcheck, ThrowingCaseIsAFailureNotACrash) {
  GradCase boom{"fixture", "throws", {Tensor({1}, 1.0)},
                [](nd::Tape&, const std::vector<nd::Var>&) -> nd::Var { throw DomainError("boom"); }};
  const auto rep = run_gradcheck({boom}, 0);
  EXPECT_FALSE(rep.passed());
  EXPECT_EQ(rep.cases[0].error, "boom");
}
