#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fnlearn/errors.hpp"
#include "fnlearn/random.hpp"

namespace fnlearn::heads {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Row-wise softmax of logits.
inline MatrixXd softmax_rows(const MatrixXd& logits) {
  MatrixXd p = logits;
  for (Eigen::Index i = 0; i < p.rows(); ++i) {
    const double m = p.row(i).maxCoeff();
    p.row(i) = (p.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

/// Index of the largest entry; ties go to the lowest index.
inline int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (Eigen::Index j = 1; j < row.size(); ++j)
    if (row[j] > row[best]) best = static_cast<int>(j);
  return best;
}

/// Multinomial logistic regression on the raw features (no rescaling).
struct LinearClassifier {
  MatrixXd weights;  // classes x d
  VectorXd bias;     // classes
  double l2 = 0.0;

  int classes() const { return static_cast<int>(weights.rows()); }

  MatrixXd logits(const MatrixXd& x) const {
    if (x.cols() != weights.cols()) throw ShapeMismatch("classifier feature width mismatch");
    return (x * weights.transpose()).rowwise() + bias.transpose();
  }

  MatrixXd predict_proba(const MatrixXd& x) const { return softmax_rows(logits(x)); }

  std::vector<int> predict(const MatrixXd& x) const {
    const MatrixXd l = logits(x);
    std::vector<int> out(l.rows());
    for (Eigen::Index i = 0; i < l.rows(); ++i) out[i] = argmax(l.row(i));
    return out;
  }
};

struct SgdSchedule {
  int updates = 3000;
  int batch = 32;
  double learning_rate = 0.1;
};

inline constexpr std::array<double, 5> kDefaultL2Grid = {1e-4, 1e-3, 1e-2, 1e-1, 1.0};

namespace detail {

/// Mini-batch SGD on mean cross-entropy + (l2/2)|W|^2 with step size
/// lr / sqrt(1 + t/100), over reshuffled passes of the data.
inline void sgd_fit(LinearClassifier& clf, const MatrixXd& z, const std::vector<int>& y, int classes,
                    const SgdSchedule& sched, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(y.size());
  clf.weights = MatrixXd::Zero(classes, z.cols());
  clf.bias = VectorXd::Zero(classes);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  const Eigen::Index batch = std::min<Eigen::Index>(sched.batch, n);
  Eigen::Index cursor = n;
  MatrixXd xb(batch, z.cols());
  MatrixXd target(batch, classes);
  for (int t = 0; t < sched.updates; ++t) {
    target.setZero();
    for (Eigen::Index b = 0; b < batch; ++b) {
      if (cursor == n) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      const auto idx = order[cursor++];
      xb.row(b) = z.row(idx);
      target(b, y[idx]) = 1.0;
    }
    const MatrixXd p = softmax_rows((xb * clf.weights.transpose()).rowwise() + clf.bias.transpose());
    const MatrixXd g = (p - target) / static_cast<double>(batch);
    const double lr = sched.learning_rate / std::sqrt(1.0 + t / 100.0);
    clf.weights -= lr * (g.transpose() * xb + clf.l2 * clf.weights);
    clf.bias -= lr * g.colwise().sum().transpose();
  }
}

}  // namespace detail

/// Fits with a fixed penalty.
inline LinearClassifier fit_classifier_fixed(const MatrixXd& features, const std::vector<int>& labels,
                                             int classes, double l2, Rng& rng, const SgdSchedule& sched = {}) {
  if (features.rows() != static_cast<Eigen::Index>(labels.size()))
    throw ShapeMismatch("feature rows != label count");
  if (labels.empty()) throw MissingClass("no training examples");
  LinearClassifier clf;
  clf.l2 = l2;
  detail::sgd_fit(clf, features, labels, classes, sched, rng);
  return clf;
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || truth.empty()) throw ShapeMismatch("accuracy: size mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += predicted[i] == truth[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

/// Stratified k-fold assignment: the r-th example of each class goes to fold r mod k.
inline std::vector<int> stratified_folds(const std::vector<int>& labels, int classes, int folds) {
  std::vector<int> seen(classes, 0), out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = seen[labels[i]]++ % folds;
  return out;
}

/// Selects the penalty by stratified k-fold cross-validation over `l2_grid`
/// (ties go to the larger penalty), then refits on all data.
inline LinearClassifier fit_classifier(const MatrixXd& features, const std::vector<int>& labels, int classes,
                                       std::span<const double> l2_grid, Rng& rng, int folds = 3,
                                       const SgdSchedule& sched = {}) {
  std::vector<int> count(classes, 0);
  for (int l : labels) {
    if (l < 0 || l >= classes) throw MissingClass("label out of range");
    ++count[l];
  }
  for (int c = 0; c < classes; ++c)
    if (count[c] == 0) throw MissingClass("class " + std::to_string(c) + " has no training examples");
  if (l2_grid.empty()) throw ConfigError("empty l2 grid");

  double chosen = l2_grid.front();
  if (l2_grid.size() > 1) {
    const auto fold_of = stratified_folds(labels, classes, folds);
    double best = -1.0;
    for (double l2 : l2_grid) {
      double acc_sum = 0.0;
      int used = 0;
      for (int f = 0; f < folds; ++f) {
        std::vector<Eigen::Index> tr, te;
        for (std::size_t i = 0; i < labels.size(); ++i) (fold_of[i] == f ? te : tr).push_back(i);
        if (te.empty() || tr.empty()) continue;
        std::vector<int> ytr, yte;
        for (auto i : tr) ytr.push_back(labels[i]);
        for (auto i : te) yte.push_back(labels[i]);
        const auto clf = fit_classifier_fixed(features(tr, Eigen::all), ytr, classes, l2, rng, sched);
        acc_sum += accuracy(clf.predict(features(te, Eigen::all)), yte);
        ++used;
      }
      const double acc = used ? acc_sum / used : 0.0;
      if (acc >= best) {
        best = acc;
        chosen = l2;
      }
    }
  }
  return fit_classifier_fixed(features, labels, classes, chosen, rng, sched);
}

inline LinearClassifier fit_classifier(const MatrixXd& features, const std::vector<int>& labels, int classes,
                                       Rng& rng) {
  return fit_classifier(features, labels, classes, kDefaultL2Grid, rng);
}

}  // namespace fnlearn::heads
