#include <gtest/gtest.h>

#include "fnlearn/heads/classifier.hpp"
#include "fnlearn/heads/freeform.hpp"
#include "fnlearn/heads/multiple_choice.hpp"
#include "fnlearn/nn/train.hpp"

using namespace fnlearn;
using namespace fnlearn::heads;

namespace {

/// Gaussian blobs around well-separated class centres.
void blobs(int classes, int per_class, int d, double spread, Rng& rng, MatrixXd& x, std::vector<int>& y) {
  std::normal_distribution<double> nd(0.0, 1.0);
  MatrixXd centres(classes, d);
  for (Eigen::Index i = 0; i < centres.size(); ++i) centres.data()[i] = 4.0 * nd(rng);
  x.resize(classes * per_class, d);
  y.clear();
  for (int c = 0; c < classes; ++c)
    for (int i = 0; i < per_class; ++i) {
      const int r = c * per_class + i;
      for (int j = 0; j < d; ++j) x(r, j) = centres(c, j) + spread * nd(rng);
      y.push_back(c);
    }
}

/// Full-batch gradient descent on the same objective, run to convergence.
LinearClassifier full_batch_reference(const MatrixXd& x, const std::vector<int>& y, int classes, double l2) {
  LinearClassifier clf;
  clf.l2 = l2;
  clf.weights = MatrixXd::Zero(classes, x.cols());
  clf.bias = VectorXd::Zero(classes);
  MatrixXd target = MatrixXd::Zero(x.rows(), classes);
  for (std::size_t i = 0; i < y.size(); ++i) target(i, y[i]) = 1.0;
  for (int t = 0; t < 20000; ++t) {
    const MatrixXd g = (clf.predict_proba(x) - target) / static_cast<double>(x.rows());
    clf.weights -= 0.05 * (g.transpose() * x + l2 * clf.weights);
    clf.bias -= 0.05 * g.colwise().sum().transpose();
  }
  return clf;
}

Vector noise_curve(Rng& rng, int n = 100) {
  Vector y(n);
  for (int i = 0; i < n; ++i) y[i] = uniform(rng, -1, 1);
  return y;
}

}  // namespace

TEST(Classifier, ProbabilitiesSumToOne) {
  Rng rng = make_rng(1);
  MatrixXd x;
  std::vector<int> y;
  blobs(4, 20, 5, 1.0, rng, x, y);
  const auto clf = fit_classifier_fixed(x, y, 4, 1e-3, rng);
  const MatrixXd p = clf.predict_proba(x);
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    EXPECT_NEAR(p.row(i).sum(), 1.0, 1e-12);
    EXPECT_GE(p.row(i).minCoeff(), 0.0);
  }
}

TEST(Classifier, SeparableBlobsAreLearned) {
  Rng rng = make_rng(2);
  MatrixXd x;
  std::vector<int> y;
  Rng data = make_rng(3);
  blobs(14, 30, 8, 0.3, data, x, y);
  const auto clf = fit_classifier(x, y, 14, rng);
  EXPECT_GT(accuracy(clf.predict(x), y), 0.97);
}

TEST(Classifier, SgdMatchesFullBatchReference) {
  Rng data = make_rng(4);
  MatrixXd x;
  std::vector<int> y;
  blobs(3, 60, 4, 2.5, data, x, y);
  Rng rng = make_rng(5);
  const auto sgd = fit_classifier_fixed(x, y, 3, 1e-2, rng);
  const auto ref = full_batch_reference(x, y, 3, 1e-2);
  const double a = accuracy(sgd.predict(x), y);
  const double b = accuracy(ref.predict(x), y);
  EXPECT_NEAR(a, b, 0.01 + 1e-12);
}

TEST(Classifier, MissingClassIsRejected) {
  Rng rng = make_rng(6);
  MatrixXd x = MatrixXd::Random(6, 2);
  EXPECT_THROW(fit_classifier(x, {0, 0, 1, 1, 0, 1}, 3, rng), MissingClass);
  EXPECT_THROW(fit_classifier(x, {0, 0, 1, 1, 0, 5}, 3, rng), MissingClass);
}

TEST(Classifier, RandomFeaturesGiveChanceAccuracy) {
  Rng rng = make_rng(7);
  std::normal_distribution<double> nd;
  const int classes = 14;
  MatrixXd x(classes * 30, 10), xt(classes * 100, 10);
  std::vector<int> y, yt;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (int j = 0; j < 10; ++j) x(i, j) = nd(rng);
    y.push_back(static_cast<int>(i % classes));
  }
  for (Eigen::Index i = 0; i < xt.rows(); ++i) {
    for (int j = 0; j < 10; ++j) xt(i, j) = nd(rng);
    yt.push_back(static_cast<int>(i % classes));
  }
  const auto clf = fit_classifier(x, y, classes, rng);
  EXPECT_LT(accuracy(clf.predict(xt), yt), 1.0 / classes + 0.05);
}

TEST(Classifier, StratifiedFolds) {
  const auto f = stratified_folds({0, 0, 0, 1, 1, 1, 0}, 2, 3);
  EXPECT_EQ(f, (std::vector<int>{0, 1, 2, 0, 1, 2, 0}));
}

TEST(Classifier, EncoderIsFrozenDuringHeadTraining) {
  auto enc = std::make_shared<nn::Encoder<float>>(nn::EncoderConfig{}, 8);
  std::vector<nn::Tensor<float>> before;
  for (auto* p : enc->params()) before.push_back(p->value);
  std::vector<Vector> curves;
  std::vector<int> labels;
  Rng rng = make_rng(9);
  for (int i = 0; i < 12; ++i) {
    curves.push_back(Vector::Random(100).array() * 0.5 + 0.5);
    labels.push_back(i % 3);
  }
  const auto embedder = nn::encoder_embedder(enc);
  fit_classifier(embedder(curves), labels, 3, rng);
  const auto after = enc->params();
  for (std::size_t k = 0; k < after.size(); ++k) EXPECT_EQ(after[k]->value, before[k]);
}

// Multiple choice ------------------------------------------------------------

TEST(MultipleChoice, CandidatesShareThePrompt) {
  const auto redraw = make_redraw(0, 10);
  CompletionModel model(redraw, gp::default_grid());
  Rng rng = make_rng(11);
  for (int i = 0; i < 30; ++i) {
    const auto p = model.build(rng);
    ASSERT_EQ(p.prompt.size(), kPromptLength);
    for (const auto& c : p.candidates) {
      ASSERT_EQ(c.size(), 100);
      EXPECT_TRUE(c.head(kPromptLength) == p.prompt);
    }
    EXPECT_EQ(p.correct_index, p.source == PromptSource::kCompositional ? kCgCandidate : kSmCandidate);
    EXPECT_EQ(p.source == PromptSource::kSpectralMixture, p.prompt_family == KernelFamily::kSpectralMixture);
  }
}

TEST(MultipleChoice, SourceIsAFairCoin) {
  const auto redraw = make_redraw(1, 12);
  CompletionModel model(redraw, gp::default_grid());
  Rng rng = make_rng(13);
  int sm = 0;
  const int n = 2000;
  for (int i = 0; i < n; ++i) sm += model.build(rng).source == PromptSource::kSpectralMixture;
  EXPECT_NEAR(sm / double(n), 0.5, 0.02);
}

TEST(MultipleChoice, CompositionalCandidateMaximizesEvidence) {
  const auto redraw = make_redraw(2, 14);
  CompletionModel model(redraw, gp::default_grid());
  Rng rng = make_rng(15);
  for (int i = 0; i < 10; ++i) {
    const auto p = model.build(KernelFamily::kLin, rng);
    const Vector raw = CompletionModel::raw_prompt(p);
    const double chosen = model.block(p.cg_completion_family).log_marginal_likelihood(raw);
    for (int f = 0; f < gp::kNumCompositional; ++f)
      EXPECT_LE(model.block(gp::family_at(f)).log_marginal_likelihood(raw), chosen);
    const Vector tail = (model.block(p.cg_completion_family).extrapolate(raw).array() - p.offset) / p.scale;
    EXPECT_LT((p.candidates[kCgCandidate].tail(20) - tail).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(MultipleChoice, NoiselessLinearPromptIsCompletedByItsOwnKernel) {
  // A prompt c (x - theta1) lies in the LIN kernel's span, so the LIN
  // completion continues the same line.
  const auto redraw = make_redraw(3, 16);
  const auto grid = gp::default_grid();
  CompletionModel model(redraw, grid);
  const double theta1 = *redraw.spec(KernelFamily::kLin).lin_offset;
  Vector line(100);
  for (int i = 0; i < 100; ++i) line[i] = 0.3 * (grid[i] - theta1);
  const Vector full = model.complete(KernelFamily::kLin, line.head(kPromptLength));
  EXPECT_LE((full - line).cwiseAbs().maxCoeff(), 1e-6);
  const auto p = model.candidates_for(line.head(kPromptLength));
  EXPECT_TRUE(p.candidates[kCgCandidate] == model.complete(p.cg_completion_family, p.prompt));
}

TEST(MultipleChoice, IdenticalEmbeddingsGiveEvenOdds) {
  MCEmbeddings e;
  e.prompt = MatrixXd::Random(5, 6);
  e.candidates = {MatrixXd::Random(5, 6), MatrixXd()};
  e.candidates[1] = e.candidates[0];
  Rng rng = make_rng(18);
  const auto head = untrained_mc_head(e, rng);
  const MatrixXd p = head.probabilities(e);
  for (Eigen::Index i = 0; i < 5; ++i) EXPECT_NEAR(p(i, 0), 0.5, 1e-15);
}

TEST(MultipleChoice, SeparableEmbeddingsAreLearned) {
  // The correct candidate is aligned with the prompt and the other is not.
  Rng rng = make_rng(19);
  std::normal_distribution<double> nd;
  const int n = 200, d = 16;
  MCEmbeddings e;
  e.prompt.resize(n, d);
  e.candidates = {MatrixXd(n, d), MatrixXd(n, d)};
  std::vector<int> correct(n);
  for (int i = 0; i < n; ++i) {
    correct[i] = i % 2;
    for (int j = 0; j < d; ++j) {
      e.prompt(i, j) = nd(rng);
      e.candidates[correct[i]](i, j) = e.prompt(i, j) + 0.3 * nd(rng);
      e.candidates[1 - correct[i]](i, j) = nd(rng);
    }
  }
  const auto head = fit_mc_head(e, correct, rng);
  int hit = 0;
  const auto choice = head.choose(e);
  for (int i = 0; i < n; ++i) hit += choice[i] == correct[i];
  EXPECT_GT(hit / double(n), 0.95);
}

TEST(Upsample, EndpointsAndLinearity) {
  const Vector y = Vector::LinSpaced(80, 0.0, 1.0);
  const Vector u = upsample_linear(y, 100);
  EXPECT_DOUBLE_EQ(u[0], 0.0);
  EXPECT_NEAR(u[99], 1.0, 1e-15);
  for (int i = 0; i < 100; ++i) EXPECT_NEAR(u[i], i / 99.0, 1e-14);
  EXPECT_THROW(upsample_linear(Vector::Zero(1), 100), ShapeMismatch);
}

// Freeform ---------------------------------------------------------------------

TEST(Freeform, RecoversCopyLastValueRule) {
  Rng rng = make_rng(20);
  std::vector<Vector> curves;
  for (int k = 0; k < 40; ++k) {
    Vector y(100);
    for (int i = 0; i < 20; ++i) y[i] = uniform(rng, 0, 1);
    for (int i = 20; i < 100; ++i) y[i] = y[19];
    curves.push_back(y);
  }
  const auto model = uncond_ar_fit(curves, 1e-12);
  EXPECT_NEAR(model.shared[0], 0.0, 1e-4);
  EXPECT_NEAR(model.shared[1], 1.0, 1e-4);
  for (int j = 2; j <= 20; ++j) EXPECT_NEAR(model.shared[j], 0.0, 1e-4);
  const auto cond = fit_freeform(curves, std::vector<int>(40, 0), 1, 1e-12);
  EXPECT_LT((cond.effective(0) - model.shared).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Freeform, SingleClassDataCollapsesToUnconditional) {
  // With every curve in class 0 of 14, the zero-sum deviations leave an
  // effective penalty of (14/27) lambda on class 0's weights.
  Rng rng = make_rng(21);
  std::vector<Vector> curves;
  for (int k = 0; k < 30; ++k) curves.push_back(noise_curve(rng));
  const double lambda = 0.5;
  const auto cond = fit_freeform(curves, std::vector<int>(30, 0), 14, lambda, false);
  const auto uncond = uncond_ar_fit(curves, 14.0 / 27.0 * lambda, false);
  EXPECT_LT((cond.effective(0) - uncond.shared).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Freeform, DeviationsSumToZero) {
  Rng rng = make_rng(22);
  std::vector<Vector> curves;
  std::vector<int> cls;
  for (int k = 0; k < 56; ++k) {
    curves.push_back(noise_curve(rng));
    cls.push_back(k % 14);
  }
  const auto model = fit_freeform(curves, cls, 14);
  EXPECT_EQ(model.deviations.rows(), 14);
  EXPECT_LE(model.deviations.colwise().sum().cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_THROW(fit_freeform(curves, std::vector<int>(56, 14), 14), MissingClass);
}

TEST(Freeform, ForecastRolloutIsExact) {
  ARModel m;
  m.lags = 3;
  m.shared = VectorXd(4);
  m.shared << 0.1, 0.5, -0.2, 0.3;
  m.deviations = MatrixXd::Zero(2, 4);
  m.deviations(1, 0) = 0.05;
  m.deviations(0, 0) = -0.05;
  Vector prompt(5);
  prompt << 1, 2, 3, 4, 5;
  const Vector out = forecast(m, 1, prompt, 4);
  std::vector<double> h = {1, 2, 3, 4, 5};
  const VectorXd v = m.effective(1);
  for (int t = 0; t < 4; ++t) {
    const auto n = h.size();
    const double pred = v[0] + v[1] * h[n - 1] + v[2] * h[n - 2] + v[3] * h[n - 3];
    EXPECT_DOUBLE_EQ(out[t], pred);
    h.push_back(pred);
  }
}

TEST(Freeform, IdentityModelRepeatsLastValue) {
  ARModel m;
  m.shared = VectorXd::Zero(21);
  m.shared[1] = 1.0;
  m.deviations = MatrixXd::Zero(1, 21);
  const Vector prompt = Vector::LinSpaced(80, 0, 1);
  const Vector out = uncond_ar_forecast(m, prompt);
  ASSERT_EQ(out.size(), kForecastHorizon);
  for (int i = 0; i < out.size(); ++i) EXPECT_EQ(out[i], 1.0);
  EXPECT_THROW(forecast(m, 0, Vector::Zero(10)), ShapeMismatch);
}

TEST(Freeform, GpioIsThePosteriorMean) {
  const auto redraw = make_redraw(4, 23);
  const auto grid = gp::default_grid();
  Rng rng = make_rng(24);
  for (int f = 0; f < gp::kNumFamilies; ++f) {
    const auto& spec = redraw.specs[f];
    const Vector y = gp::sample_gp(spec, grid, rng).head(80);
    const Vector a = gpio_forecast(spec, grid, y);
    EXPECT_EQ(a.size(), 20);
    EXPECT_TRUE(a == gp::posterior_mean(spec, grid, y));
  }
}

TEST(Freeform, GpioOnNormalizedPromptUsesTheRawScale) {
  const auto redraw = make_redraw(5, 25);
  const auto grid = gp::default_grid();
  RedrawSampler sampler(redraw, grid);
  Rng rng = make_rng(26);
  for (int f = 0; f < gp::kNumFamilies; ++f) {
    const auto fam = gp::family_at(f);
    const Curve c = sampler.sample(fam, rng);
    const Vector raw = c.values.array() * c.scale + c.offset;
    EXPECT_NEAR(raw.maxCoeff() - raw.minCoeff(), c.scale, 1e-9 * c.scale);
    const Vector mapped = gpio_forecast(redraw.spec(fam), grid, c.values.head(80), c.offset, c.scale);
    const Vector direct = (gp::posterior_mean(redraw.spec(fam), grid, Vector(raw.head(80))).array() - c.offset) / c.scale;
    EXPECT_LE((mapped - direct).cwiseAbs().maxCoeff(), 1e-12);
  }
  // With offset 0 and scale 1 the map is the identity.
  const Vector y = Vector::LinSpaced(80, 0, 1);
  EXPECT_TRUE(gpio_forecast(redraw.specs[1], grid, y, 0.0, 1.0) == gpio_forecast(redraw.specs[1], grid, y));
}
