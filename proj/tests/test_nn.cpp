#include <gtest/gtest.h>

#include <filesystem>

#include "fnlearn/nn/checkpoint.hpp"
#include "fnlearn/nn/train.hpp"
#include "support.hpp"

using namespace fnlearn;
using namespace fnlearn::nn;
using fnlearn::oracle::dot;
using fnlearn::oracle::max_rel_diff;
using fnlearn::oracle::numeric_grad;
using fnlearn::oracle::random_tensor;

namespace {

constexpr double kGradTol = 1e-4;

/// Checks input and parameter gradients of f(x) = <layer(x), r> for a random r.
void check_layer(Layer<double>& layer, const Tensor<double>& x, Mode mode, Rng& rng) {
  const auto y0 = layer.forward(x, mode);
  const auto r = random_tensor(y0.shape(), rng);
  std::vector<Param<double>*> params;
  layer.collect_params(params);
  for (auto* p : params) p->grad.fill(0.0);
  layer.forward(x, mode);
  const auto dx = layer.backward(r);

  auto f_of_x = [&](const Tensor<double>& xi) { return dot(layer.forward(xi, mode), r); };
  EXPECT_LT(max_rel_diff(dx, numeric_grad(x, f_of_x)), kGradTol) << layer.kind() << " input";
  for (auto* p : params) {
    const auto analytic = p->grad;
    auto f_of_p = [&](const Tensor<double>& v) {
      const auto keep = p->value;
      p->value = v;
      const double out = dot(layer.forward(x, mode), r);
      p->value = keep;
      return out;
    };
    EXPECT_LT(max_rel_diff(analytic, numeric_grad(p->value, f_of_p)), kGradTol) << p->name;
  }
}

EncoderConfig small_config() {
  EncoderConfig c;
  c.input_len = 43;
  c.channels = 3;
  c.rep_dim = 5;
  c.proj_hidden = 4;
  c.proj_dim = 3;
  return c;
}

}  // namespace

TEST(StackLengths, DefaultInput) {
  const auto s = stack_lengths(100);
  EXPECT_EQ(s.stages.back(), 8u);
  EXPECT_EQ(s.flat(64), 512u);
}

TEST(Encoder, ParameterCount) {
  Encoder<float> enc;
  EXPECT_EQ(enc.parameter_count(), 132224u);
  EXPECT_THROW(Encoder<float>(EncoderConfig{.input_len = 20}), ShapeMismatch);
}

TEST(Gradients, EveryLayerOverHundredTrials) {
  Rng rng = make_rng(1);
  for (int trial = 0; trial < 100; ++trial) {
    switch (trial % 7) {
      case 0: {
        Conv1d<double> l("c", 2, 3, 5, 1 + trial % 2);
        l.initialize(rng);
        check_layer(l, random_tensor({3, 2, 13}, rng), Mode::kTrain, rng);
        break;
      }
      case 1: {
        MaxPool1d<double> l(2);
        check_layer(l, random_tensor({2, 3, 9}, rng), Mode::kTrain, rng);
        break;
      }
      case 2: {
        LeakyRelu<double> l(0.01);
        check_layer(l, random_tensor({4, 6}, rng), Mode::kTrain, rng);
        break;
      }
      case 3: {
        BatchNorm1d<double> l("bn", 3, 1e-5, 0.1);
        for (auto* p : [&] { std::vector<Param<double>*> v; l.collect_params(v); return v; }())
          p->value = random_tensor(p->value.shape(), rng);
        check_layer(l, random_tensor({4, 3, 5}, rng), trial % 2 ? Mode::kTrain : Mode::kEval, rng);
        break;
      }
      case 4: {
        BatchNorm1d<double> l("bn", 4, 1e-5, 0.1);
        check_layer(l, random_tensor({6, 4}, rng), Mode::kTrain, rng);
        break;
      }
      case 5: {
        Linear<double> l("fc", 6, 4);
        l.initialize(rng);
        check_layer(l, random_tensor({3, 6}, rng), Mode::kTrain, rng);
        break;
      }
      case 6: {
        L2Normalize<double> l;
        check_layer(l, random_tensor({3, 5}, rng), Mode::kTrain, rng);
        Flatten<double> fl;
        check_layer(fl, random_tensor({2, 3, 4}, rng), Mode::kTrain, rng);
        break;
      }
    }
  }
}

TEST(Gradients, InfoNce) {
  Rng rng = make_rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 4;
    const auto z = random_tensor({2 * n, 3}, rng, 0.7);
    const double tau = trial % 2 ? 0.5 : 0.2;
    const auto lg = info_nce(z, tau);
    const auto num = numeric_grad(z, [&](const Tensor<double>& zi) { return info_nce(zi, tau).loss; });
    ASSERT_LT(max_rel_diff(lg.grad, num), kGradTol);
  }
}

TEST(Gradients, WholeEncoderInDoublePrecision) {
  Rng rng = make_rng(3);
  Encoder<double> enc(small_config(), 4);
  const auto x = random_tensor({4, 43}, rng);
  auto loss = [&](const Tensor<double>& xi) { return info_nce(enc.forward(xi, Mode::kTrain), 0.5).loss; };
  enc.zero_grad();
  const auto lg = info_nce(enc.forward(x, Mode::kTrain), 0.5);
  const auto dx = enc.backward(lg.grad).reshaped({4, 43});
  EXPECT_LT(max_rel_diff(dx, numeric_grad(x, loss)), kGradTol);
  for (auto* p : enc.params()) {
    const auto analytic = p->grad;
    const auto num = numeric_grad(p->value, [&](const Tensor<double>& v) {
      const auto keep = p->value;
      p->value = v;
      const double out = loss(x);
      p->value = keep;
      return out;
    });
    EXPECT_LT(max_rel_diff(analytic, num), kGradTol) << p->name;
  }
}

TEST(InfoNce, SinglePairHasZeroLoss) {
  Rng rng = make_rng(4);
  const auto z = random_tensor({2, 5}, rng);
  EXPECT_NEAR(info_nce(z, 0.5).loss, 0.0, 1e-12);
}

TEST(InfoNce, IdenticalRows) {
  for (std::size_t n : {2u, 3u, 8u}) {
    Tensor<double> z({2 * n, 2}, 0.0);
    for (std::size_t i = 0; i < 2 * n; ++i) z.at(i, 0) = 1.0;
    EXPECT_NEAR(info_nce(z, 0.5).loss, 0.5 * std::log(2.0 * n - 1), 1e-12);
  }
}

TEST(InfoNce, EnumeratedBasisExample) {
  // rows e1, e2, e1, e2: each row sees similarities {0, 1, 0} at temperature 0.5.
  Tensor<double> z({4, 2}, {1, 0, 0, 1, 1, 0, 0, 1});
  EXPECT_NEAR(info_nce(z, 0.5).loss, 0.5 * std::log(2 + std::exp(2.0)) - 1.0, 1e-12);
  EXPECT_THROW(info_nce(Tensor<double>({3, 2}), 0.5), ShapeMismatch);
}

TEST(Encoder, EvalOutputIndependentOfBatchComposition) {
  Encoder<float> enc({}, 5);
  Rng rng = make_rng(6);
  Tensor<float> batch({6, 100});
  for (auto& v : batch.values()) v = static_cast<float>(uniform(rng, 0, 1));
  const auto all = enc.encode(batch, Mode::kEval);
  for (std::size_t i = 0; i < 6; ++i) {
    Tensor<float> one({1, 100});
    for (std::size_t j = 0; j < 100; ++j) one.at(0, j) = batch.at(i, j);
    const auto h = enc.encode(one, Mode::kEval);
    for (std::size_t j = 0; j < h.dim(1); ++j) EXPECT_NEAR(h.at(0, j), all.at(i, j), 1e-6);
  }
}

TEST(Encoder, ProjectionsAreUnitNorm) {
  Encoder<float> enc({}, 7);
  Rng rng = make_rng(8);
  Tensor<float> batch({8, 100});
  for (auto& v : batch.values()) v = static_cast<float>(uniform(rng, 0, 1));
  const auto z = enc.forward(batch, Mode::kTrain);
  for (std::size_t i = 0; i < 8; ++i) {
    double ss = 0;
    for (std::size_t j = 0; j < z.dim(1); ++j) ss += double(z.at(i, j)) * z.at(i, j);
    EXPECT_NEAR(std::sqrt(ss), 1.0, 1e-5);
  }
}

TEST(Encoder, SeedDeterminesInitialization) {
  Encoder<float> a({}, 9), b({}, 9), c({}, 10);
  EXPECT_EQ(a.params()[0]->value, b.params()[0]->value);
  EXPECT_NE(a.params()[0]->value, c.params()[0]->value);
}

TEST(Checkpoint, RoundTripIsBitwise) {
  const auto dir = std::filesystem::temp_directory_path() / "fnlearn_test_ckpt";
  std::filesystem::create_directories(dir);
  Encoder<float> enc({}, 11);
  Tensor<float> batch({4, 100});
  Rng rng = make_rng(12);
  for (auto& v : batch.values()) v = static_cast<float>(uniform(rng, 0, 1));
  enc.forward(batch, Mode::kTrain);  // moves the running statistics off their defaults
  save_encoder(dir / "enc", enc, {42, 7});
  CheckpointInfo info;
  auto back = load_encoder<float>(dir / "enc", &info);
  EXPECT_EQ(info.seed, 42u);
  EXPECT_EQ(info.steps, 7);
  const auto pa = enc.params(), pb = back.params();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(pa[k]->value, pb[k]->value) << pa[k]->name;
  const auto ba = enc.buffers(), bb = back.buffers();
  for (std::size_t k = 0; k < ba.size(); ++k) EXPECT_EQ(*ba[k].value, *bb[k].value) << ba[k].name;
  EXPECT_EQ(enc.encode(batch, Mode::kEval), back.encode(batch, Mode::kEval));
  EXPECT_THROW(load_encoder<float>(dir / "absent"), MissingArtifact);
  std::filesystem::remove_all(dir);
}

TEST(Adam, ZeroGradientIsNoOp) {
  Param<double> p("w", {5});
  for (std::size_t i = 0; i < 5; ++i) p.value[i] = i + 0.5;
  const auto before = p.value;
  Adam<double> opt({0.01, 0.9, 0.999, 1e-8, 0.0});
  for (int s = 0; s < 10; ++s) opt.step({&p});
  EXPECT_EQ(p.value, before);
}

TEST(Adam, FirstStepMovesByLearningRate) {
  Param<double> p("w", {4});
  p.grad = Tensor<double>({4}, {3.0, -0.2, 1e-3, -50.0});
  Adam<double> opt({0.01, 0.9, 0.999, 1e-8, 0.0});
  opt.step({&p});
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(p.value[i], p.grad[i] > 0 ? -0.01 : 0.01, 1e-6);
}

TEST(Adam, WeightDecayEntersTheGradient) {
  Param<double> p("w", {1});
  p.value[0] = 2.0;
  Adam<double> opt({0.1, 0.9, 0.999, 1e-8, 0.5});
  opt.step({&p});
  EXPECT_NEAR(p.value[0], 1.9, 1e-6);
}

TEST(Training, DeterministicAndFinite) {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.total_curves = 20;
  cfg.seed = 13;
  EXPECT_EQ(cfg.total_steps(), 3u);
  auto a = train_encoder(cfg, {}, {}, fresh_curve_source());
  auto b = train_encoder(cfg, {}, {}, fresh_curve_source());
  ASSERT_EQ(a.losses.size(), 3u);
  EXPECT_EQ(a.losses, b.losses);
  for (double l : a.losses) EXPECT_TRUE(std::isfinite(l));
  EXPECT_EQ(a.encoder.params().back()->value, b.encoder.params().back()->value);
}

TEST(Embed, RawAndEncoderShapes) {
  std::vector<Vector> curves(3, Vector::LinSpaced(100, 0, 1));
  EXPECT_EQ(raw_embed(curves).cols(), 100);
  Encoder<float> enc({}, 14);
  const auto h = embed(enc, curves, 2);
  EXPECT_EQ(h.rows(), 3);
  EXPECT_EQ(h.cols(), 128);
  EXPECT_THROW(embed(enc, {Vector::Zero(50)}), ShapeMismatch);
}
