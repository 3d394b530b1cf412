#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "fnlearn/errors.hpp"
#include "fnlearn/gp/kernel.hpp"
#include "fnlearn/random.hpp"

namespace fnlearn::gp {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Strictly increasing abscissae shared by every curve.
class Grid {
 public:
  explicit Grid(std::vector<double> points) : points_(std::move(points)) {
    if (points_.empty()) throw FormatError("grid must be non-empty");
    for (std::size_t i = 1; i < points_.size(); ++i)
      if (!(points_[i] > points_[i - 1])) throw FormatError("grid points must be strictly increasing");
    even_ = false;
  }

  static Grid evenly_spaced(int count, double lo, double hi) {
    std::vector<double> p(count);
    const double step = count > 1 ? (hi - lo) / (count - 1) : 0.0;
    for (int i = 0; i < count; ++i) p[i] = lo + step * i;
    if (count > 1) p.back() = hi;
    Grid g(std::move(p));
    g.even_ = count > 1;
    g.step_ = step;
    return g;
  }

  int size() const noexcept { return static_cast<int>(points_.size()); }
  double operator[](int i) const { return points_[i]; }
  double front() const { return points_.front(); }
  double back() const { return points_.back(); }
  std::span<const double> points() const noexcept { return points_; }
  std::span<const double> head(int m) const { return std::span<const double>(points_).first(m); }
  bool evenly_spaced() const noexcept { return even_; }
  double step() const noexcept { return step_; }

 private:
  std::vector<double> points_;
  bool even_ = false;
  double step_ = 0.0;
};

/// 100 evenly spaced points on [0, 10].
inline Grid default_grid() { return Grid::evenly_spaced(100, 0.0, 10.0); }

/// Dense kernel matrix K(xs, ys).
inline Matrix kernel_matrix(const KernelSpec& spec, std::span<const double> xs, std::span<const double> ys) {
  Matrix k(xs.size(), ys.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    for (std::size_t j = 0; j < ys.size(); ++j) k(i, j) = kernel_value(spec, xs[i], ys[j]);
  return k;
}

/// Symmetric K(xs, xs). On an evenly spaced grid the stationary atoms are
/// Toeplitz, so they are evaluated once per lag.
inline Matrix kernel_matrix(const KernelSpec& spec, std::span<const double> xs, double even_step = 0.0) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Matrix k(n, n);
  if (even_step > 0.0) {
    const AtomUsage a = atoms_of(spec.family);
    const bool mixture = spec.family == KernelFamily::kSpectralMixture;
    std::vector<double> rbf(n, 0.0), per(n, 0.0), mix(n, 0.0);
    for (Eigen::Index lag = 0; lag < n; ++lag) {
      const double d = xs[lag] - xs[0];
      if (a.rbf) rbf[lag] = rbf_atom(spec, d);
      if (a.per) per[lag] = periodic_atom(spec, d);
      if (mixture) mix[lag] = mixture_value(spec, d);
    }
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index i = j; i < n; ++i) {
        const auto lag = i - j;
        const double v = mixture ? mix[lag]
                                 : combine_atoms(spec.family, a.lin ? linear_atom(spec, xs[i], xs[j]) : 0.0,
                                                 rbf[lag], per[lag]);
        k(i, j) = v;
        k(j, i) = v;
      }
    }
    return k;
  }
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = j; i < n; ++i) {
      const double v = kernel_value(spec, xs[i], xs[j]);
      k(i, j) = v;
      k(j, i) = v;
    }
  return k;
}

inline constexpr double kJitterStart = 1e-8;
inline constexpr double kJitterStop = 1e-2;

/// A covariance matrix together with the jitter that made it factorizable
/// and its lower Cholesky factor.
struct CovMatrix {
  Matrix entries;
  double jitter = 0.0;
  Matrix lower;
};

/// Factors K + jitter*I, growing jitter tenfold from 1e-8 to 1e-2 times the
/// mean diagonal until Cholesky succeeds.
inline CovMatrix factorize(Matrix entries) {
  const auto n = entries.rows();
  double scale = entries.diagonal().mean();
  if (!(scale > 0.0) || !std::isfinite(scale)) scale = 1.0;
  for (double rel = kJitterStart; rel <= kJitterStop * (1 + 1e-9); rel *= 10.0) {
    const double jitter = rel * scale;
    Matrix a = entries;
    a.diagonal().array() += jitter;
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success && llt.matrixL().toDenseMatrix().allFinite()) {
      CovMatrix out;
      out.lower = llt.matrixL();
      out.entries = std::move(entries);
      out.jitter = jitter;
      return out;
    }
  }
  throw JitterExhausted("covariance not positive definite after jitter " +
                        std::to_string(kJitterStop) + "*mean(diag) (n=" + std::to_string(n) + ")");
}

inline CovMatrix covariance(const KernelSpec& spec, const Grid& grid) {
  return factorize(kernel_matrix(spec, grid.points(), grid.evenly_spaced() ? grid.step() : 0.0));
}

/// y = L z with z standard normal.
inline Vector sample_gp(const CovMatrix& cov, Rng& rng) {
  Vector z(cov.lower.rows());
  std::normal_distribution<double> nd(0.0, 1.0);
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = nd(rng);
  return cov.lower.triangularView<Eigen::Lower>() * z;
}

inline Vector sample_gp(const KernelSpec& spec, const Grid& grid, Rng& rng) {
  return sample_gp(covariance(spec, grid), rng);
}

/// GP conditioned on the observed prefix x_1..x_m of a point set. Holds the
/// factor of the jittered observed block so many observation vectors can be
/// scored or extrapolated cheaply.
class ObservedBlock {
 public:
  ObservedBlock(const KernelSpec& spec, std::span<const double> xs, int m, double even_step = 0.0)
      : spec_(spec), xs_(xs.begin(), xs.end()), m_(m) {
    if (m < 1 || m > static_cast<int>(xs.size())) throw ShapeMismatch("observed count out of range");
    cov_ = factorize(kernel_matrix(spec, std::span<const double>(xs_).first(m), even_step));
    half_logdet_ = cov_.lower.diagonal().array().log().sum();
  }

  ObservedBlock(const KernelSpec& spec, const Grid& grid, int m)
      : ObservedBlock(spec, grid.points(), m, grid.evenly_spaced() ? grid.step() : 0.0) {}

  int observed() const noexcept { return m_; }
  const CovMatrix& covariance() const noexcept { return cov_; }

  /// (K + jitter I)^{-1} y via the Cholesky factor.
  Vector solve(const Vector& y) const {
    check(y);
    return cov_.lower.transpose().triangularView<Eigen::Upper>().solve(
        cov_.lower.triangularView<Eigen::Lower>().solve(y));
  }

  /// -1/2 y'K^{-1}y - 1/2 log det K - m/2 log 2 pi on the jittered block.
  double log_marginal_likelihood(const Vector& y) const {
    check(y);
    const Vector alpha = cov_.lower.triangularView<Eigen::Lower>().solve(y);
    return -0.5 * alpha.squaredNorm() - half_logdet_ - 0.5 * m_ * std::log(2.0 * std::numbers::pi);
  }

  /// K(x_query, x_obs) K_obs^{-1} y.
  Vector posterior_mean(const Vector& y, std::span<const int> query) const {
    const Vector w = solve(y);
    Vector out(query.size());
    for (std::size_t q = 0; q < query.size(); ++q) {
      const double xq = xs_.at(query[q]);
      double acc = 0.0;
      for (int j = 0; j < m_; ++j) acc += kernel_value(spec_, xq, xs_[j]) * w[j];
      out[q] = acc;
    }
    return out;
  }

  /// Posterior mean on every point after the observed prefix.
  Vector extrapolate(const Vector& y) const {
    std::vector<int> q(xs_.size() - m_);
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = m_ + static_cast<int>(i);
    return posterior_mean(y, q);
  }

 private:
  void check(const Vector& y) const {
    if (y.size() != m_) throw ShapeMismatch("observation length " + std::to_string(y.size()) +
                                            " != " + std::to_string(m_));
  }

  KernelSpec spec_;
  std::vector<double> xs_;
  int m_;
  CovMatrix cov_;
  double half_logdet_ = 0.0;
};

/// Posterior mean at `query` given the first y_obs.size() grid values.
inline Vector posterior_mean(const KernelSpec& spec, const Grid& grid, const Vector& y_obs,
                             std::span<const int> query) {
  return ObservedBlock(spec, grid, static_cast<int>(y_obs.size())).posterior_mean(y_obs, query);
}

/// Posterior mean on indices m..T-1 of the grid.
inline Vector posterior_mean(const KernelSpec& spec, const Grid& grid, const Vector& y_obs) {
  return ObservedBlock(spec, grid, static_cast<int>(y_obs.size())).extrapolate(y_obs);
}

inline double log_marginal_likelihood(const KernelSpec& spec, const Grid& grid, const Vector& y_obs) {
  return ObservedBlock(spec, grid, static_cast<int>(y_obs.size())).log_marginal_likelihood(y_obs);
}

inline double log_marginal_likelihood(const KernelSpec& spec, std::span<const double> xs, const Vector& y_obs) {
  return ObservedBlock(spec, xs, static_cast<int>(y_obs.size())).log_marginal_likelihood(y_obs);
}

}  // namespace fnlearn::gp
