#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "fnlearn/eval/protocol.hpp"
#include "fnlearn/eval/table.hpp"

using namespace fnlearn;
using namespace fnlearn::eval;
using heads::PromptSource;

TEST(Pearson, IdentityAndAffine) {
  Eigen::VectorXd a = Eigen::VectorXd::Random(20);
  EXPECT_DOUBLE_EQ(pearson(a, a), 1.0);
  EXPECT_NEAR(pearson(a, 3.0 * a.array() + 2.0), 1.0, 1e-14);
  EXPECT_NEAR(pearson(a, -a), -1.0, 1e-14);
}

TEST(Pearson, MatchesSumFormula) {
  Rng rng = make_rng(1);
  for (int t = 0; t < 50; ++t) {
    const int n = 5 + t;
    Eigen::VectorXd a(n), b(n);
    for (int i = 0; i < n; ++i) a[i] = normal(rng, 0, 1), b[i] = normal(rng, 0, 1) + 0.3 * a[i];
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < n; ++i) sa += a[i], sb += b[i], sab += a[i] * b[i], saa += a[i] * a[i], sbb += b[i] * b[i];
    const double r = (n * sab - sa * sb) / std::sqrt((n * saa - sa * sa) * (n * sbb - sb * sb));
    EXPECT_NEAR(pearson(a, b), r, 1e-12);
  }
}

TEST(Pearson, ConstantInputThrows) {
  const Eigen::VectorXd a = Eigen::VectorXd::Constant(5, 2.0), b = Eigen::VectorXd::LinSpaced(5, 0, 1);
  EXPECT_THROW(pearson(a, b), ConstantInput);
  EXPECT_EQ(pearson_or_zero(a, b), 0.0);
}

TEST(L2Metric, HandValues) {
  const Eigen::VectorXd a = Eigen::VectorXd::LinSpaced(20, 0, 1);
  EXPECT_EQ(l2_metric(a, a), 0.0);
  EXPECT_NEAR(l2_metric(a, a.array() + 0.1), 0.1, 1e-15);
}

TEST(DeltaAcc, UniformProbabilitiesGiveZero) {
  const Eigen::MatrixXd p = Eigen::MatrixXd::Constant(4, 2, 0.5);
  const std::vector<PromptSource> s = {PromptSource::kCompositional, PromptSource::kSpectralMixture,
                                       PromptSource::kCompositional, PromptSource::kSpectralMixture};
  EXPECT_EQ(delta_acc(p, s), 0.0);
  const std::vector<PromptSource> only_cg(4, PromptSource::kCompositional);
  EXPECT_THROW(delta_acc(p, only_cg), MissingSource);
}

TEST(DeltaAcc, BalancedSourcesSatisfyExpectedAccuracyIdentity) {
  // With equal source counts and p_SM = 1 - p_CG: E(p_CG) = 1/2 + Delta/2.
  Rng rng = make_rng(2);
  for (int t = 0; t < 20; ++t) {
    const int n = 50;
    Eigen::MatrixXd p(2 * n, 2);
    std::vector<PromptSource> s;
    for (int i = 0; i < 2 * n; ++i) {
      p(i, 0) = uniform(rng, 0, 1);
      p(i, 1) = 1.0 - p(i, 0);
      s.push_back(i < n ? PromptSource::kCompositional : PromptSource::kSpectralMixture);
    }
    EXPECT_NEAR(p.col(0).mean(), 0.5 + 0.5 * delta_acc(p, s), 1e-12);
  }
}

TEST(ChoiceAccuracy, TiesGoToFirstCandidate) {
  Eigen::MatrixXd p(3, 2);
  p << 0.5, 0.5, 0.2, 0.8, 0.9, 0.1;
  const std::vector<int> correct = {0, 1, 1};
  EXPECT_NEAR(choice_accuracy(p, correct), 2.0 / 3.0, 1e-15);
}

TEST(Aggregate, ConfidenceHalfWidth) {
  const std::vector<double> xs = {1, 2, 3, 4};
  const auto a = aggregate(xs);
  EXPECT_DOUBLE_EQ(a.mean, 2.5);
  EXPECT_NEAR(a.ci95, 1.96 * std::sqrt(5.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(a.count, 4u);
  EXPECT_EQ(aggregate(std::vector<double>{7.0}).ci95, 0.0);
}

TEST(Aggregate, PermutationInvariant) {
  Rng rng = make_rng(3);
  std::vector<double> xs(30);
  for (auto& x : xs) x = normal(rng, 0, 1);
  const auto a = aggregate(xs);
  std::sort(xs.begin(), xs.end());
  const auto b = aggregate(xs);
  EXPECT_NEAR(a.mean, b.mean, 1e-15);
  EXPECT_NEAR(a.ci95, b.ci95, 1e-15);
}

TEST(ResultTable, CsvFormat) {
  ResultTable t;
  t.name = "x";
  t.budgets = {3, 10};
  t.record("raw", 0, 1.0);
  t.record("raw", 0, 3.0);
  t.record("raw", 1, 0.5);
  std::ostringstream os;
  write_csv(os, t);
  EXPECT_EQ(os.str(), "model,budget,mean,ci95\nraw,3,2,1.9599999999999997\nraw,10,0.5,0\n");
  EXPECT_NE(format_table(t).find("2.00± 1.96"), std::string::npos);
  EXPECT_THROW(t.cell("missing", 0), Error);
}

TEST(Task, NamesRoundTrip) {
  for (auto t : {Task::kClassify, Task::kMultipleChoice, Task::kFreeform}) EXPECT_EQ(parse_task(task_name(t)), t);
  EXPECT_THROW(parse_task("regress"), ConfigError);
}

namespace {

Protocol tiny_protocol() {
  Protocol p;
  p.n_seeds = 2;
  p.n_redraws = 2;
  p.classify_budgets = {3, 10};
  p.mc_budgets = {3, 10};
  p.freeform_budgets = {1, 3};
  p.freeform_classifier_per_class = 3;
  p.classify_eval_per_class = 4;
  p.mc_eval_problems = 20;
  p.freeform_eval_per_class = 2;
  return p;
}

std::vector<Model> raw_model() {
  return {{"raw", [](int) { return nn::Embedder(nn::raw_embed); }}};
}

void expect_full_cells(const ResultTable& t, int per_cell) {
  for (const auto& r : t.rows)
    for (const auto& m : r.measurements) EXPECT_EQ(static_cast<int>(m.size()), per_cell) << t.name << " " << r.model;
}

}  // namespace

TEST(Protocol, ClassifyCellsAndReproducibility) {
  const auto p = tiny_protocol();
  const auto redraws = make_redraws(2, 4);
  int cells = 0;
  const auto a = run_protocol(Task::kClassify, raw_model(), p, redraws, 5, gp::default_grid(), {},
                              [&](int, int) { ++cells; });
  EXPECT_EQ(cells, 4);
  const auto& t = a.table("classify_accuracy");
  expect_full_cells(t, 4);
  for (const auto& m : t.rows[0].measurements)
    for (double v : m) EXPECT_TRUE(v >= 0 && v <= 100);
  const auto b = run_protocol(Task::kClassify, raw_model(), p, redraws, 5);
  EXPECT_EQ(a.table("classify_accuracy").rows[0].measurements, b.table("classify_accuracy").rows[0].measurements);
  EXPECT_THROW(run_protocol(Task::kClassify, raw_model(), p, make_redraws(1, 4), 5), ConfigError);
}

TEST(Protocol, MultipleChoiceTables) {
  const auto p = tiny_protocol();
  const auto res = run_protocol(Task::kMultipleChoice, raw_model(), p, make_redraws(2, 6), 7);
  const auto& acc = res.table("mc_accuracy");
  ASSERT_NE(acc.find("untrained head"), nullptr);
  expect_full_cells(acc, 4);
  expect_full_cells(res.table("mc_delta_acc"), 4);
}

TEST(Protocol, FreeformRowsAndExamples) {
  auto p = tiny_protocol();
  p.n_seeds = 1;
  p.n_redraws = 1;
  const auto res = run_protocol(Task::kFreeform, raw_model(), p, make_redraws(1, 8), 9);
  for (const char* name : {"freeform_pearson", "freeform_l2"}) {
    const auto& t = res.table(name);
    std::vector<std::string> models;
    for (const auto& r : t.rows) models.push_back(r.model);
    EXPECT_EQ(models, (std::vector<std::string>{"raw", "autoregression", "GPIO"}));
    expect_full_cells(t, 1);
  }
  EXPECT_EQ(res.examples.size(), static_cast<std::size_t>(gp::kNumFamilies));
  for (const auto& ex : res.examples) {
    EXPECT_EQ(ex.prompt.size(), 80);
    EXPECT_EQ(ex.truth.size(), 20);
    EXPECT_EQ(ex.model.size(), 20);
    EXPECT_EQ(ex.gpio.size(), 20);
  }
}
