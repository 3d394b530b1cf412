#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

#include "fnlearn/gp/gp.hpp"
#include "fnlearn/nn/tensor.hpp"
#include "fnlearn/random.hpp"

namespace fnlearn::oracle {

/// Independent evaluation of the posterior mean: builds both covariance
/// blocks entry by entry and solves with partial-pivot LU.
inline Eigen::VectorXd dense_posterior_mean(const gp::KernelSpec& spec, const std::vector<double>& xs, int m,
                                            double jitter, const Eigen::VectorXd& y) {
  const int n = static_cast<int>(xs.size());
  Eigen::MatrixXd koo(m, m), kqo(n - m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) koo(i, j) = gp::kernel_value(spec, xs[i], xs[j]) + (i == j ? jitter : 0.0);
  for (int i = m; i < n; ++i)
    for (int j = 0; j < m; ++j) kqo(i - m, j) = gp::kernel_value(spec, xs[i], xs[j]);
  return kqo * koo.partialPivLu().solve(y);
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)}); }

/// Central differences of a scalar function of a tensor.
inline nn::Tensor<double> numeric_grad(nn::Tensor<double> x, const std::function<double(const nn::Tensor<double>&)>& f,
                                       double h = 1e-6) {
  nn::Tensor<double> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

/// max_i |a_i - b_i| / max(1e-3, |a_i| + |b_i|) -- relative with an absolute floor.
inline double max_rel_diff(const nn::Tensor<double>& a, const nn::Tensor<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = std::abs(a[i] - b[i]) / std::max(1e-3, std::abs(a[i]) + std::abs(b[i]));
    worst = std::max(worst, d);
  }
  return worst;
}

inline nn::Tensor<double> random_tensor(typename nn::Tensor<double>::Shape shape, Rng& rng, double sd = 1.0) {
  nn::Tensor<double> t(std::move(shape));
  std::normal_distribution<double> nd(0.0, sd);
  for (auto& v : t.values()) v = nd(rng);
  return t;
}

inline double dot(const nn::Tensor<double>& a, const nn::Tensor<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace fnlearn::oracle
