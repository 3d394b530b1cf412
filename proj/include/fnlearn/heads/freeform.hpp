#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <vector>

#include "fnlearn/curves.hpp"
#include "fnlearn/errors.hpp"
#include "fnlearn/gp/gp.hpp"
#include "fnlearn/heads/classifier.hpp"

namespace fnlearn::heads {

inline constexpr int kDefaultLags = 20;
inline constexpr int kForecastHorizon = 20;
inline constexpr double kDefaultRidge = 1e-6;

/// Class-conditional autoregression
///
///   y_i ~ (w_0 + w_0^c) + sum_{j=1..L} (w_j + w_j^c) y_{i-j}
///
/// with shared weights w and per-class deviations w^c that sum to zero over
/// the classes for every lag.
struct ARModel {
  int lags = kDefaultLags;
  VectorXd shared;      // L + 1, intercept first
  MatrixXd deviations;  // classes x (L + 1)
  double ridge = 0.0;   // absolute penalty used in the fit

  int classes() const { return static_cast<int>(deviations.rows()); }
  VectorXd effective(int cls) const { return shared + deviations.row(cls).transpose(); }
};

namespace detail {

/// [1, y_{i-1}, ..., y_{i-L}].
inline VectorXd lag_features(const Vector& y, int i, int lags) {
  VectorXd x(lags + 1);
  x[0] = 1.0;
  for (int j = 1; j <= lags; ++j) x[j] = y[i - j];
  return x;
}

struct ClassMoments {
  std::vector<MatrixXd> gram;
  std::vector<VectorXd> cross;
};

/// Per-class sums of x x^T and x y over one-step targets i in [lags, fit_end).
inline ClassMoments moments(const std::vector<Vector>& curves, const std::vector<int>& classes, int n_classes,
                            int lags, int fit_end) {
  const int p = lags + 1;
  ClassMoments m{std::vector<MatrixXd>(n_classes, MatrixXd::Zero(p, p)),
                 std::vector<VectorXd>(n_classes, VectorXd::Zero(p))};
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const auto& y = curves[k];
    const int c = classes[k];
    if (c < 0 || c >= n_classes) throw MissingClass("class index out of range");
    const int end = std::min<int>(fit_end, static_cast<int>(y.size()));
    if (end <= lags) throw ShapeMismatch("curve shorter than the lag window");
    for (int i = lags; i < end; ++i) {
      const VectorXd x = lag_features(y, i, lags);
      m.gram[c].noalias() += x * x.transpose();
      m.cross[c].noalias() += x * y[i];
    }
  }
  return m;
}

inline VectorXd solve_spd(const MatrixXd& a, const VectorXd& b) {
  Eigen::LLT<MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw SingularSystem("regularized normal equations are not positive definite");
  VectorXd x = llt.solve(b);
  if (!x.allFinite()) throw SingularSystem("normal-equation solve produced non-finite weights");
  return x;
}

}  // namespace detail

/// Joint ridge least squares for shared weights and zero-sum deviations.
/// The last class's deviation is minus the sum of the others; the penalty is
/// lambda (|w|^2 + sum_c |w^c|^2). With `relative` the absolute penalty is
/// lambda * trace(A^T A) / dim.
inline ARModel fit_freeform(const std::vector<Vector>& curves, const std::vector<int>& classes, int n_classes,
                            double lambda = kDefaultRidge, bool relative = true, int lags = kDefaultLags,
                            int fit_end = 80) {
  if (curves.size() != classes.size()) throw ShapeMismatch("one class per curve required");
  if (curves.empty()) throw SingularSystem("no training curves");
  const int p = lags + 1, k = n_classes, dim = k * p;
  const auto m = detail::moments(curves, classes, k, lags, fit_end);

  // Selector E_c maps theta = [w, d_0..d_{K-2}] to the class's effective weights.
  auto block_sign = [&](int c, int b) -> double {
    if (b == 0) return 1.0;
    if (c == k - 1) return -1.0;
    return b - 1 == c ? 1.0 : 0.0;
  };
  MatrixXd ata = MatrixXd::Zero(dim, dim);
  VectorXd aty = VectorXd::Zero(dim);
  for (int c = 0; c < k; ++c) {
    for (int bi = 0; bi < k; ++bi) {
      const double si = block_sign(c, bi);
      if (si == 0.0) continue;
      aty.segment(bi * p, p) += si * m.cross[c];
      for (int bj = 0; bj < k; ++bj) {
        const double sj = block_sign(c, bj);
        if (sj == 0.0) continue;
        ata.block(bi * p, bj * p, p, p) += si * sj * m.gram[c];
      }
    }
  }
  const double lam = relative ? lambda * ata.trace() / dim : lambda;
  MatrixXd pen = MatrixXd::Identity(dim, dim);
  for (int bi = 1; bi < k; ++bi)
    for (int bj = 1; bj < k; ++bj) pen.block(bi * p, bj * p, p, p) += MatrixXd::Identity(p, p);
  const VectorXd theta = detail::solve_spd(ata + lam * pen, aty);

  ARModel model;
  model.lags = lags;
  model.ridge = lam;
  model.shared = theta.head(p);
  model.deviations = MatrixXd::Zero(k, p);
  for (int c = 0; c + 1 < k; ++c) {
    model.deviations.row(c) = theta.segment((c + 1) * p, p).transpose();
    model.deviations.row(k - 1) -= model.deviations.row(c);
  }
  return model;
}

/// Unconditional autoregression y_i ~ w_0 + sum_j w_j y_{i-j}.
inline ARModel uncond_ar_fit(const std::vector<Vector>& curves, double lambda = kDefaultRidge,
                             bool relative = true, int lags = kDefaultLags, int fit_end = 80) {
  if (curves.empty()) throw SingularSystem("no training curves");
  const std::vector<int> zeros(curves.size(), 0);
  const auto m = detail::moments(curves, zeros, 1, lags, fit_end);
  const int p = lags + 1;
  const double lam = relative ? lambda * m.gram[0].trace() / p : lambda;
  ARModel model;
  model.lags = lags;
  model.ridge = lam;
  model.shared = detail::solve_spd(m.gram[0] + lam * MatrixXd::Identity(p, p), m.cross[0]);
  model.deviations = MatrixXd::Zero(1, p);
  return model;
}

/// Recursive rollout: each prediction is appended and used as a lag input.
inline Vector forecast(const ARModel& model, int cls, const Vector& prompt, int horizon = kForecastHorizon) {
  if (prompt.size() < model.lags) throw ShapeMismatch("prompt shorter than the lag window");
  const VectorXd v = model.effective(cls);
  std::vector<double> hist(prompt.data(), prompt.data() + prompt.size());
  Vector out(horizon);
  for (int h = 0; h < horizon; ++h) {
    double pred = v[0];
    const auto n = hist.size();
    for (int j = 1; j <= model.lags; ++j) pred += v[j] * hist[n - j];
    hist.push_back(pred);
    out[h] = pred;
  }
  return out;
}

inline Vector uncond_ar_forecast(const ARModel& model, const Vector& prompt, int horizon = kForecastHorizon) {
  return forecast(model, 0, prompt, horizon);
}

/// Ideal-observer completion: posterior mean under the generating kernel.
inline Vector gpio_forecast(const KernelSpec& true_spec, const Grid& grid, const Vector& prompt) {
  return gp::posterior_mean(true_spec, grid, prompt);
}

/// Ideal observer for a normalized prompt with known map values = (raw - offset) / scale:
/// conditions on the raw-scale prompt the kernel generated, then maps the
/// completion back. Normalization adds a constant the kernel cannot express.
inline Vector gpio_forecast(const KernelSpec& true_spec, const Grid& grid, const Vector& prompt, double offset,
                            double scale) {
  const Vector raw = prompt.array() * scale + offset;
  return (gpio_forecast(true_spec, grid, raw).array() - offset) / scale;
}

}  // namespace fnlearn::heads
