#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <utility>
#include <vector>

#include "fnlearn/curves.hpp"
#include "fnlearn/gp/gp.hpp"
#include "fnlearn/heads/classifier.hpp"
#include "fnlearn/nn/adam.hpp"

namespace fnlearn::heads {

enum class PromptSource { kCompositional, kSpectralMixture };

inline constexpr int kPromptLength = 80;
inline constexpr int kCgCandidate = 0;
inline constexpr int kSmCandidate = 1;

/// A prompt and two full-length completions that agree with it on the prompt
/// indices. Candidate 0 is the compositional completion, candidate 1 the
/// spectral-mixture completion.
struct MCProblem {
  Vector prompt;
  std::array<Vector, 2> candidates;
  int correct_index = 0;
  PromptSource source = PromptSource::kCompositional;
  KernelFamily prompt_family = KernelFamily::kLin;
  KernelFamily cg_completion_family = KernelFamily::kLin;
  // prompt * scale + offset is the prompt before normalization
  double offset = 0.0;
  double scale = 1.0;
};

/// Conditioned GPs for every family of one redraw on the prompt prefix.
class CompletionModel {
 public:
  CompletionModel(const HyperparamRedraw& redraw, const Grid& grid, int prompt_len = kPromptLength)
      : sampler_(redraw, grid) {
    for (int f = 0; f < gp::kNumFamilies; ++f) blocks_.emplace_back(redraw.specs[f], grid, prompt_len);
  }

  RedrawSampler& sampler() noexcept { return sampler_; }
  const gp::ObservedBlock& block(KernelFamily f) const { return blocks_[gp::index_of(f)]; }
  int prompt_length() const { return blocks_.front().observed(); }

  /// The compositional family whose spec gives the prompt the highest evidence.
  KernelFamily best_compositional(const Vector& prompt) const {
    int best = 0;
    double best_lml = -std::numeric_limits<double>::infinity();
    for (int f = 0; f < gp::kNumCompositional; ++f) {
      const double lml = blocks_[f].log_marginal_likelihood(prompt);
      if (lml > best_lml) {
        best_lml = lml;
        best = f;
      }
    }
    return gp::family_at(best);
  }

  Vector complete(KernelFamily f, const Vector& prompt) const {
    const Vector tail = block(f).extrapolate(prompt);
    Vector out(prompt.size() + tail.size());
    out << prompt, tail;
    return out;
  }

  /// Fills both candidates for `prompt`. Evidence and completions are computed
  /// on prompt * scale + offset and the tails are mapped back.
  MCProblem candidates_for(const Vector& prompt, double offset = 0.0, double scale = 1.0) const {
    MCProblem p;
    p.prompt = prompt;
    p.offset = offset;
    p.scale = scale;
    const Vector raw = raw_prompt(p);
    p.cg_completion_family = best_compositional(raw);
    for (const auto& [k, f] : {std::pair{kCgCandidate, p.cg_completion_family},
                              std::pair{kSmCandidate, KernelFamily::kSpectralMixture}}) {
      const Vector tail = (block(f).extrapolate(raw).array() - offset) / scale;
      p.candidates[k].resize(prompt.size() + tail.size());
      p.candidates[k] << prompt, tail;
    }
    return p;
  }

  static Vector raw_prompt(const MCProblem& p) { return (p.prompt.array() * p.scale + p.offset).matrix(); }

  /// Prompt source is CG or SM with probability 1/2; CG prompts pick one of
  /// the 13 compositional families uniformly.
  MCProblem build(Rng& rng) {
    const bool from_sm = std::bernoulli_distribution(0.5)(rng);
    const KernelFamily family =
        from_sm ? KernelFamily::kSpectralMixture
                : gp::family_at(std::uniform_int_distribution<int>(0, gp::kNumCompositional - 1)(rng));
    return build(family, rng);
  }

  MCProblem build(KernelFamily family, Rng& rng) {
    const Curve c = sampler_.sample(family, rng);
    MCProblem p = candidates_for(c.values.head(prompt_length()), c.offset, c.scale);
    p.prompt_family = family;
    p.source = gp::is_compositional(family) ? PromptSource::kCompositional : PromptSource::kSpectralMixture;
    p.correct_index = p.source == PromptSource::kCompositional ? kCgCandidate : kSmCandidate;
    return p;
  }

 private:
  RedrawSampler sampler_;
  std::vector<gp::ObservedBlock> blocks_;
};

inline MCProblem build_mc_problem(const HyperparamRedraw& redraw, const Grid& grid, Rng& rng) {
  CompletionModel model(redraw, grid);
  return model.build(rng);
}

/// Piecewise-linear resampling of `y` onto `length` evenly spaced positions
/// spanning the same index range.
inline Vector upsample_linear(const Vector& y, int length) {
  const auto n = y.size();
  if (n < 2 || length < 2) throw ShapeMismatch("upsample needs at least two points");
  Vector out(length);
  for (int i = 0; i < length; ++i) {
    const double pos = static_cast<double>(i) * static_cast<double>(n - 1) / (length - 1);
    const auto lo = std::min<Eigen::Index>(static_cast<Eigen::Index>(std::floor(pos)), n - 2);
    const double frac = pos - static_cast<double>(lo);
    out[i] = (1.0 - frac) * y[lo] + frac * y[lo + 1];
  }
  return out;
}

/// Encoder inputs for a set of problems: upsampled prompts and the candidates.
struct MCEmbeddings {
  MatrixXd prompt;
  std::array<MatrixXd, 2> candidates;
};

/// Choice model p_i proportional to exp<W h_i, W h_0>. Features are divided by
/// a per-dimension scale before projection, which keeps the map linear.
struct MCHead {
  MatrixXd w;  // 32 x d
  VectorXd scale;

  MatrixXd project(const MatrixXd& h) const {
    return (h.array().rowwise() / scale.transpose().array()).matrix() * w.transpose();
  }

  /// Rows are (p_CG, p_SM) per problem.
  MatrixXd probabilities(const MCEmbeddings& e) const {
    const MatrixXd u0 = project(e.prompt);
    MatrixXd logits(e.prompt.rows(), 2);
    for (int k = 0; k < 2; ++k) logits.col(k) = (project(e.candidates[k]).array() * u0.array()).rowwise().sum();
    return softmax_rows(logits);
  }

  std::vector<int> choose(const MCEmbeddings& e) const {
    const MatrixXd p = probabilities(e);
    std::vector<int> out(p.rows());
    for (Eigen::Index i = 0; i < p.rows(); ++i) out[i] = argmax(p.row(i));
    return out;
  }
};

struct MCTrainConfig {
  int projection_dim = 32;
  int epochs = 3000;  // upper bound; training stops once the loss plateaus
  int plateau_window = 100;
  double plateau_tol = 1e-3;
  double learning_rate = 0.01;
  double init_scale = 0.1;
};

inline VectorXd mc_feature_scale(const MCEmbeddings& e) {
  const auto d = e.prompt.cols();
  VectorXd s(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    double ss = e.prompt.col(j).squaredNorm() + e.candidates[0].col(j).squaredNorm() +
                e.candidates[1].col(j).squaredNorm();
    const double rms = std::sqrt(ss / (3.0 * static_cast<double>(e.prompt.rows())));
    s[j] = rms > 1e-12 ? rms : 1.0;
  }
  return s;
}

/// Random projection without any training; the chance-level reference.
inline MCHead untrained_mc_head(const MCEmbeddings& e, Rng& rng, const MCTrainConfig& cfg = {}) {
  MCHead head;
  head.scale = mc_feature_scale(e);
  const auto d = e.prompt.cols();
  head.w.resize(cfg.projection_dim, d);
  std::normal_distribution<double> nd(0.0, cfg.init_scale / std::sqrt(static_cast<double>(d)));
  for (Eigen::Index i = 0; i < head.w.size(); ++i) head.w.data()[i] = nd(rng);
  return head;
}

/// Full-batch Adam on the mean cross-entropy of the correct choice. Stops when
/// the loss fell by less than plateau_tol over the last plateau_window epochs.
inline MCHead fit_mc_head(const MCEmbeddings& e, const std::vector<int>& correct, Rng& rng,
                          const MCTrainConfig& cfg = {}) {
  const auto n = e.prompt.rows();
  if (static_cast<std::size_t>(n) != correct.size() || n == 0) throw ShapeMismatch("MC head: label count mismatch");
  MCHead head = untrained_mc_head(e, rng, cfg);
  const auto d = e.prompt.cols();
  const MatrixXd x0 = e.prompt.array().rowwise() / head.scale.transpose().array();
  const std::array<MatrixXd, 2> xk = {
      MatrixXd(e.candidates[0].array().rowwise() / head.scale.transpose().array()),
      MatrixXd(e.candidates[1].array().rowwise() / head.scale.transpose().array())};

  nn::Param<double> w("mc.w", {static_cast<std::size_t>(cfg.projection_dim), static_cast<std::size_t>(d)});
  Eigen::Map<MatrixXd>(w.value.data(), cfg.projection_dim, d) = head.w;  // column-major layout
  nn::Adam<double> opt({cfg.learning_rate, 0.9, 0.999, 1e-8, 0.0});
  const std::vector<nn::Param<double>*> params = {&w};
  std::vector<double> history;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Eigen::Map<const MatrixXd> wm(w.value.data(), cfg.projection_dim, d);
    const MatrixXd u0 = x0 * wm.transpose();
    const std::array<MatrixXd, 2> uk = {xk[0] * wm.transpose(), xk[1] * wm.transpose()};
    MatrixXd logits(n, 2);
    for (int k = 0; k < 2; ++k) logits.col(k) = (uk[k].array() * u0.array()).rowwise().sum();
    MatrixXd g = softmax_rows(logits);
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) loss -= std::log(std::max(g(i, correct[i]), 1e-300));
    history.push_back(loss / static_cast<double>(n));
    if (epoch >= cfg.plateau_window && history[epoch - cfg.plateau_window] - history.back() < cfg.plateau_tol) break;
    for (Eigen::Index i = 0; i < n; ++i) g(i, correct[i]) -= 1.0;
    g /= static_cast<double>(n);
    MatrixXd grad = MatrixXd::Zero(cfg.projection_dim, d);
    for (int k = 0; k < 2; ++k) {
      grad.noalias() += (uk[k].array().colwise() * g.col(k).array()).matrix().transpose() * x0;
      grad.noalias() += (u0.array().colwise() * g.col(k).array()).matrix().transpose() * xk[k];
    }
    Eigen::Map<MatrixXd>(w.grad.data(), cfg.projection_dim, d) = grad;
    opt.step(params);
  }
  head.w = Eigen::Map<const MatrixXd>(w.value.data(), cfg.projection_dim, d);
  return head;
}

}  // namespace fnlearn::heads
