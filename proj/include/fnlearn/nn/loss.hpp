#pragma once

#include <cmath>
#include <vector>

#include "fnlearn/nn/tensor.hpp"

namespace fnlearn::nn {

template <class T>
struct LossAndGrad {
  double loss = 0.0;
  Tensor<T> grad;
};

/// Contrastive loss over 2N projections where row i pairs with row i+N (mod 2N):
///
///   L = -(1/2N) sum_i [ <z_i, z_{i+N}> - tau log sum_{j != i} exp(<z_i, z_j>/tau) ]
///
/// Returns the loss and dL/dZ. Rows are expected to be unit norm but the
/// gradient is exact for any Z.
template <class T>
LossAndGrad<T> info_nce(const Tensor<T>& z, double tau) {
  if (z.rank() != 2 || z.dim(0) < 2 || z.dim(0) % 2 != 0)
    throw ShapeMismatch("info_nce expects [2N, D] with N >= 1");
  const std::size_t rows = z.dim(0), n = rows / 2;
  using DMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const DMat zd = as_matrix(z).template cast<double>();
  const DMat sim = zd * zd.transpose();

  // p(i, j) = softmax over j != i of sim(i, j) / tau.
  DMat p = DMat::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(rows));
  double total = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < rows; ++j)
      if (j != i) best = std::max(best, sim(i, j) / tau);
    double acc = 0.0;
    for (std::size_t j = 0; j < rows; ++j)
      if (j != i) {
        const double e = std::exp(sim(i, j) / tau - best);
        p(i, j) = e;
        acc += e;
      }
    p.row(static_cast<Eigen::Index>(i)) /= acc;
    const double lse = tau * (best + std::log(acc));
    total += sim(i, (i + n) % rows) - lse;
  }
  LossAndGrad<T> out;
  out.loss = -total / static_cast<double>(rows);

  // d/dz_i: positive terms contribute 2 z_{i+N}; the LSE terms contribute
  // (P + P^T) Z.
  DMat partner(static_cast<Eigen::Index>(rows), zd.cols());
  for (std::size_t i = 0; i < rows; ++i) partner.row(static_cast<Eigen::Index>(i)) = zd.row(static_cast<Eigen::Index>((i + n) % rows));
  const DMat g = (-(2.0 * partner) + (p + p.transpose()) * zd) / static_cast<double>(rows);
  out.grad = Tensor<T>(z.shape());
  as_matrix(out.grad) = g.cast<T>();
  return out;
}

}  // namespace fnlearn::nn
