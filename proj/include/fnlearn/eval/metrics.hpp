#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "fnlearn/errors.hpp"
#include "fnlearn/heads/multiple_choice.hpp"

namespace fnlearn::eval {

/// Sample Pearson correlation. Throws ConstantInput when either side has
/// zero variance.
inline double pearson(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2) throw ShapeMismatch("pearson: need equal lengths >= 2");
  const Eigen::ArrayXd da = a.array() - a.mean();
  const Eigen::ArrayXd db = b.array() - b.mean();
  const double saa = da.square().sum(), sbb = db.square().sum();
  if (!(saa > 0.0) || !(sbb > 0.0)) throw ConstantInput("pearson: constant input");
  const double r = (da * db).sum() / std::sqrt(saa * sbb);
  return std::clamp(r, -1.0, 1.0);
}

/// Pearson with constant inputs scored as 0.
inline double pearson_or_zero(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  try {
    return pearson(a, b);
  } catch (const ConstantInput&) {
    return 0.0;
  }
}

/// Root-mean-square difference.
inline double l2_metric(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() == 0) throw ShapeMismatch("l2_metric: length mismatch");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

/// Mean p_CG over CG-sourced prompts minus mean p_SM over SM-sourced prompts.
/// `probs` rows are (p_CG, p_SM).
inline double delta_acc(const Eigen::MatrixXd& probs, std::span<const heads::PromptSource> sources) {
  if (static_cast<std::size_t>(probs.rows()) != sources.size() || probs.cols() != 2)
    throw ShapeMismatch("delta_acc: need one (p1, p2) row per source");
  double cg = 0.0, sm = 0.0;
  std::size_t ncg = 0, nsm = 0;
  for (std::size_t i = 0; i < sources.size(); ++i) {
    if (sources[i] == heads::PromptSource::kCompositional) {
      cg += probs(static_cast<Eigen::Index>(i), heads::kCgCandidate);
      ++ncg;
    } else {
      sm += probs(static_cast<Eigen::Index>(i), heads::kSmCandidate);
      ++nsm;
    }
  }
  if (ncg == 0 || nsm == 0) throw MissingSource("delta_acc: both prompt sources must be present");
  return cg / static_cast<double>(ncg) - sm / static_cast<double>(nsm);
}

/// Fraction of problems whose argmax choice (ties to the lower index) is correct.
inline double choice_accuracy(const Eigen::MatrixXd& probs, std::span<const int> correct) {
  if (static_cast<std::size_t>(probs.rows()) != correct.size() || correct.empty())
    throw ShapeMismatch("choice_accuracy: size mismatch");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < correct.size(); ++i)
    hit += heads::argmax(probs.row(static_cast<Eigen::Index>(i))) == correct[i];
  return static_cast<double>(hit) / static_cast<double>(correct.size());
}

struct Aggregate {
  double mean = 0.0;
  double ci95 = 0.0;
  std::size_t count = 0;
};

/// Mean and 95% half-width 1.96 * sd / sqrt(n) with the (n-1) sample sd.
inline Aggregate aggregate(std::span<const double> xs) {
  Aggregate a;
  a.count = xs.size();
  if (xs.empty()) return a;
  double s = 0.0;
  for (double x : xs) s += x;
  a.mean = s / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.ci95 = 1.96 * std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
  }
  return a;
}

}  // namespace fnlearn::eval
