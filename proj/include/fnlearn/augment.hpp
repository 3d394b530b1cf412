#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "fnlearn/curves.hpp"
#include "fnlearn/errors.hpp"
#include "fnlearn/random.hpp"

namespace fnlearn::augment {

struct AugmentConfig {
  double kde_bandwidth = 0.1;
  double warp_extension = 0.4;
  double rescale_min_span = 0.8;
  int warp_point_count = 0;  // 0 means one warp point per grid point

  void validate() const {
    if (!(kde_bandwidth > 0)) throw ConfigError("kde_bandwidth must be > 0");
    if (!(warp_extension >= 0)) throw ConfigError("warp_extension must be >= 0");
    if (!(rescale_min_span > 0 && rescale_min_span < 1)) throw ConfigError("rescale_min_span must be in (0,1)");
    if (warp_point_count < 0) throw ConfigError("warp_point_count must be >= 0");
  }
};

/// Negates y with probability 1/2.
inline Vector t1_reflect(const Vector& y, Rng& rng) {
  return std::bernoulli_distribution(0.5)(rng) ? Vector(-y) : y;
}

/// Kernel-smoothed resampling of y placed at the sorted warp points:
/// out_i = sum_j w_ij y_j with w_ij proportional to exp(-(x'_j - x_i)^2 / 2 sigma^2).
/// Each row is shifted by its largest exponent before exponentiating so no row
/// underflows to all zeros.
inline Vector kde_resample(const Vector& y, std::span<const double> grid_points,
                           std::span<const double> warp_points, double bandwidth) {
  if (static_cast<std::size_t>(y.size()) != warp_points.size())
    throw ShapeMismatch("warp points must pair one-to-one with curve values");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  const auto n = warp_points.size();
  Vector out(grid_points.size());
  std::vector<double> e(n);
  for (std::size_t i = 0; i < grid_points.size(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      const double d = warp_points[j] - grid_points[i];
      e[j] = -d * d * inv;
      best = std::max(best, e[j]);
    }
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = std::exp(e[j] - best);
      num += w * y[j];
      den += w;
    }
    out[i] = num / den;
  }
  return out;
}

/// Draws [a, b] containing the grid span, extended by up to `warp_extension`
/// of the span on each side, then sorted uniform warp points inside it.
inline std::vector<double> draw_warp_points(const Grid& grid, const AugmentConfig& cfg, Rng& rng) {
  const double x1 = grid.front(), xt = grid.back();
  const double width = xt - x1;
  const double a = uniform(rng, x1 - cfg.warp_extension * width, x1);
  const double b = uniform(rng, xt, xt + cfg.warp_extension * width);
  const int count = cfg.warp_point_count > 0 ? cfg.warp_point_count : grid.size();
  std::vector<double> pts(count);
  for (auto& p : pts) p = uniform(rng, a, b);
  std::sort(pts.begin(), pts.end());
  return pts;
}

inline Vector t2_warp(const Vector& y, const Grid& grid, const AugmentConfig& cfg, Rng& rng) {
  if (y.size() != grid.size()) throw ShapeMismatch("curve length differs from grid");
  const auto pts = draw_warp_points(grid, cfg, rng);
  if (static_cast<Eigen::Index>(pts.size()) != y.size())
    throw ShapeMismatch("warp_point_count must equal the curve length");
  return kde_resample(y, grid.points(), pts, cfg.kde_bandwidth);
}

struct RescaleInterval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Span s ~ U(min_span, 1), lo ~ U(0, 1 - s), hi = lo + s.
inline RescaleInterval draw_rescale_interval(const AugmentConfig& cfg, Rng& rng) {
  const double span = uniform(rng, cfg.rescale_min_span, 1.0);
  const double lo = uniform(rng, 0.0, 1.0 - span);
  return {lo, lo + span};
}

/// Affine map sending min(y) to iv.lo and max(y) to iv.hi.
inline Vector rescale_to(const Vector& y, RescaleInterval iv) {
  const double lo = y.minCoeff(), hi = y.maxCoeff();
  if (!(hi - lo > kDegenerateSpan)) throw DegenerateCurve("cannot rescale a constant curve");
  return ((y.array() - lo) / (hi - lo)) * (iv.hi - iv.lo) + iv.lo;
}

inline Vector t3_rescale(const Vector& y, const AugmentConfig& cfg, Rng& rng) {
  return rescale_to(y, draw_rescale_interval(cfg, rng));
}

/// T3(T2(T1(y))).
inline Vector augment(const Vector& y, const Grid& grid, const AugmentConfig& cfg, Rng& rng) {
  return t3_rescale(t2_warp(t1_reflect(y, rng), grid, cfg, rng), cfg, rng);
}

struct PositivePair {
  Vector first;
  Vector second;
  Vector source;
};

inline PositivePair make_pair(const Vector& y, const Grid& grid, const AugmentConfig& cfg, Rng& rng) {
  PositivePair p;
  p.first = augment(y, grid, cfg, rng);
  p.second = augment(y, grid, cfg, rng);
  p.source = y;
  return p;
}

}  // namespace fnlearn::augment
