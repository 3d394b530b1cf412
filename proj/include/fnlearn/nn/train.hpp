#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <vector>

#include "fnlearn/augment.hpp"
#include "fnlearn/curves.hpp"
#include "fnlearn/nn/adam.hpp"
#include "fnlearn/nn/encoder.hpp"
#include "fnlearn/nn/loss.hpp"

namespace fnlearn::nn {

struct TrainConfig {
  std::size_t batch_size = 512;
  double learning_rate = 1e-3;
  double weight_decay = 1e-6;
  std::size_t total_curves = 500000;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  std::size_t total_steps() const { return (total_curves + batch_size - 1) / batch_size; }
};

/// Produces one normalized curve from a dedicated random stream.
using CurveSource = std::function<Vector(Rng&)>;

inline CurveSource fresh_curve_source(Grid grid = gp::default_grid()) {
  return [grid = std::move(grid)](Rng& rng) { return generate_training_curve(grid, rng).values; };
}

struct StepRecord {
  std::size_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  Encoder<float> encoder;
  std::vector<double> losses;
};

/// Stacks rows of [first..., second...] into a [2N, T] float batch.
inline Tensor<float> pair_batch(const std::vector<augment::PositivePair>& pairs) {
  const std::size_t n = pairs.size(), t = static_cast<std::size_t>(pairs.front().first.size());
  Tensor<float> batch({2 * n, t});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < t; ++j) {
      batch.at(i, j) = static_cast<float>(pairs[i].first[static_cast<Eigen::Index>(j)]);
      batch.at(n + i, j) = static_cast<float>(pairs[i].second[static_cast<Eigen::Index>(j)]);
    }
  return batch;
}

/// Draws the positive pairs for one optimizer step. Curve i of step s uses
/// its own streams, so the batch is independent of evaluation order.
inline std::vector<augment::PositivePair> draw_step_pairs(const TrainConfig& cfg, std::size_t step,
                                                          const CurveSource& source, const Grid& grid,
                                                          const augment::AugmentConfig& aug) {
  std::vector<augment::PositivePair> pairs;
  pairs.reserve(cfg.batch_size);
  for (std::size_t i = 0; i < cfg.batch_size; ++i) {
    Rng curve_rng = make_rng(cfg.seed, {tag(Stream::kTrainCurves), step, i});
    Rng aug_rng = make_rng(cfg.seed, {tag(Stream::kAugment), step, i});
    pairs.push_back(augment::make_pair(source(curve_rng), grid, aug, aug_rng));
  }
  return pairs;
}

/// Contrastive training: each step draws fresh curves, builds positive pairs,
/// and takes one Adam step on the contrastive loss of the 2N projections.
inline TrainResult train_encoder(const TrainConfig& cfg, const EncoderConfig& enc_cfg,
                                 const augment::AugmentConfig& aug, const CurveSource& source,
                                 const std::function<void(const StepRecord&)>& on_step = {},
                                 const Grid& grid = gp::default_grid()) {
  aug.validate();
  TrainResult out{Encoder<float>(enc_cfg, cfg.seed), {}};
  auto& enc = out.encoder;
  Adam<float> opt({cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay});
  const auto params = enc.params();
  const std::size_t steps = cfg.total_steps();
  out.losses.reserve(steps);
  for (std::size_t s = 0; s < steps; ++s) {
    const auto batch = pair_batch(draw_step_pairs(cfg, s, source, grid, aug));
    enc.zero_grad();
    const auto z = enc.forward(batch, Mode::kTrain);
    const auto lg = info_nce(z, enc_cfg.temperature);
    enc.backward(lg.grad);
    opt.step(params);
    out.losses.push_back(lg.loss);
    if (on_step) on_step({s, lg.loss});
  }
  return out;
}

/// A map from curves to fixed-length feature vectors.
using Embedder = std::function<Eigen::MatrixXd(const std::vector<Vector>&)>;

/// Eval-mode encoder outputs (the projector is not used).
inline Eigen::MatrixXd embed(Encoder<float>& enc, const std::vector<Vector>& curves, std::size_t chunk = 256) {
  const std::size_t n = curves.size(), len = enc.config().input_len;
  Eigen::MatrixXd out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(enc.config().rep_dim));
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t count = std::min(chunk, n - start);
    Tensor<float> batch({count, len});
    for (std::size_t i = 0; i < count; ++i) {
      const auto& c = curves[start + i];
      if (static_cast<std::size_t>(c.size()) != len) throw ShapeMismatch("embed: curve length mismatch");
      for (std::size_t j = 0; j < len; ++j) batch.at(i, j) = static_cast<float>(c[static_cast<Eigen::Index>(j)]);
    }
    const auto h = enc.encode(batch, Mode::kEval);
    for (std::size_t i = 0; i < count; ++i)
      for (std::size_t j = 0; j < h.dim(1); ++j)
        out(static_cast<Eigen::Index>(start + i), static_cast<Eigen::Index>(j)) = h.at(i, j);
  }
  return out;
}

inline Embedder encoder_embedder(std::shared_ptr<Encoder<float>> enc) {
  return [enc](const std::vector<Vector>& curves) { return embed(*enc, curves); };
}

/// The baseline that copies the raw input.
inline Eigen::MatrixXd raw_embed(const std::vector<Vector>& curves) {
  if (curves.empty()) return {};
  Eigen::MatrixXd out(static_cast<Eigen::Index>(curves.size()), curves.front().size());
  for (std::size_t i = 0; i < curves.size(); ++i) {
    if (curves[i].size() != out.cols()) throw ShapeMismatch("raw_embed: curve length mismatch");
    out.row(static_cast<Eigen::Index>(i)) = curves[i].transpose();
  }
  return out;
}

}  // namespace fnlearn::nn
