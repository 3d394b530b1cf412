#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fnlearn/errors.hpp"
#include "fnlearn/gp/gp.hpp"
#include "fnlearn/gp/kernel.hpp"
#include "fnlearn/random.hpp"

namespace fnlearn {

using gp::Grid;
using gp::KernelFamily;
using gp::KernelSpec;
using gp::Vector;

/// Values on the shared grid plus where they came from.
struct Curve {
  Vector values;
  std::optional<KernelFamily> origin;
  int redraw_id = -1;
  // Normalization map, values = (raw - offset) / scale. Known for generated
  // curves only; datasets do not store it.
  double offset = 0.0;
  double scale = 1.0;

  int size() const noexcept { return static_cast<int>(values.size()); }
};

/// SM with probability 1/2, each compositional family with probability 1/26.
inline KernelFamily sample_family(Rng& rng) {
  const int k = std::uniform_int_distribution<int>(0, 2 * gp::kNumCompositional - 1)(rng);
  return k < gp::kNumCompositional ? gp::family_at(k) : KernelFamily::kSpectralMixture;
}

inline constexpr double kDegenerateSpan = 1e-12;

/// Affine map sending min to 0 and max to 1.
inline Vector normalize(const Vector& raw) {
  const double lo = raw.minCoeff();
  const double hi = raw.maxCoeff();
  if (!(hi - lo > kDegenerateSpan)) throw DegenerateCurve("curve is constant; cannot normalize");
  return (raw.array() - lo) / (hi - lo);
}

inline Curve normalize(const Curve& raw) {
  Curve out = raw;
  out.values = normalize(raw.values);
  return out;
}

/// One fixed hyperparameter assignment per family.
struct HyperparamRedraw {
  int redraw_id = 0;
  std::array<KernelSpec, gp::kNumFamilies> specs;

  const KernelSpec& spec(KernelFamily f) const { return specs[gp::index_of(f)]; }
  friend bool operator==(const HyperparamRedraw&, const HyperparamRedraw&) = default;
};

inline HyperparamRedraw make_redraw(int redraw_id, std::uint64_t master_seed) {
  HyperparamRedraw r;
  r.redraw_id = redraw_id;
  for (int f = 0; f < gp::kNumFamilies; ++f) {
    Rng rng = make_rng(master_seed, {tag(Stream::kRedraw), static_cast<std::uint64_t>(redraw_id),
                                     static_cast<std::uint64_t>(f)});
    r.specs[f] = gp::sample_hyperparams(gp::family_at(f), rng);
  }
  return r;
}

inline std::vector<HyperparamRedraw> make_redraws(int count, std::uint64_t master_seed) {
  if (count < 1) throw ConfigError("redraw count must be >= 1");
  std::vector<HyperparamRedraw> out;
  out.reserve(count);
  for (int r = 0; r < count; ++r) out.push_back(make_redraw(r, master_seed));
  return out;
}

inline constexpr int kMaxResamples = 10;

namespace detail {
template <class Draw>
Vector draw_normalized(Draw&& draw, Curve* map_out = nullptr) {
  for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
    Vector raw = draw();
    if (raw.maxCoeff() - raw.minCoeff() > kDegenerateSpan) {
      if (map_out) {
        map_out->offset = raw.minCoeff();
        map_out->scale = raw.maxCoeff() - raw.minCoeff();
      }
      return normalize(raw);
    }
  }
  throw DegenerateCurve("10 consecutive constant samples");
}
}  // namespace detail

/// Generates normalized curves from a fixed redraw. Covariance factors are
/// computed once per family and reused.
class RedrawSampler {
 public:
  RedrawSampler(const HyperparamRedraw& redraw, const Grid& grid) : redraw_(redraw), grid_(grid) {}

  const HyperparamRedraw& redraw() const noexcept { return redraw_; }
  const Grid& grid() const noexcept { return grid_; }

  const gp::CovMatrix& covariance(KernelFamily f) {
    auto& slot = cache_[gp::index_of(f)];
    if (!slot) slot = gp::covariance(redraw_.spec(f), grid_);
    return *slot;
  }

  Curve sample(KernelFamily f, Rng& rng) {
    const auto& cov = covariance(f);
    Curve c;
    c.values = detail::draw_normalized([&] { return gp::sample_gp(cov, rng); }, &c);
    c.origin = f;
    c.redraw_id = redraw_.redraw_id;
    return c;
  }

  /// Family drawn from the generative mixture, then a curve.
  Curve sample(Rng& rng) {
    const KernelFamily f = sample_family(rng);
    return sample(f, rng);
  }

 private:
  HyperparamRedraw redraw_;
  Grid grid_;
  std::array<std::optional<gp::CovMatrix>, gp::kNumFamilies> cache_;
};

inline Curve generate_curve(const HyperparamRedraw& redraw, const Grid& grid, Rng& rng) {
  const KernelFamily f = sample_family(rng);
  const auto cov = gp::covariance(redraw.spec(f), grid);
  Curve c;
  c.values = detail::draw_normalized([&] { return gp::sample_gp(cov, rng); }, &c);
  c.origin = f;
  c.redraw_id = redraw.redraw_id;
  return c;
}

/// Encoder-training curve: family, then fresh hyperparameters, then a sample.
inline Curve generate_training_curve(const Grid& grid, Rng& rng) {
  const KernelFamily f = sample_family(rng);
  const KernelSpec spec = gp::sample_hyperparams(f, rng);
  const auto cov = gp::covariance(spec, grid);
  Curve c;
  c.values = detail::draw_normalized([&] { return gp::sample_gp(cov, rng); }, &c);
  c.origin = f;
  return c;
}

// ---------------------------------------------------------------------------
// Persistence

enum class Split { kTrain, kEval };

struct CurveDataset {
  std::vector<Curve> curves;
  Grid grid = gp::default_grid();
  int redraw_id = -1;
  Split split = Split::kTrain;
};

/// Header `T=<int> n=<int> redraw=<int>`, then per curve a `label=<tag>` line
/// and a line of T comma-separated reals at 17 significant digits.
inline void write_dataset(std::ostream& os, const CurveDataset& ds) {
  const int t = ds.grid.size();
  os << "T=" << t << " n=" << ds.curves.size() << " redraw=" << ds.redraw_id << '\n';
  char buf[40];
  for (const auto& c : ds.curves) {
    if (c.size() != t) throw ShapeMismatch("curve length differs from grid");
    os << "label=" << (c.origin ? gp::tag_of(*c.origin) : std::string_view("none")) << '\n';
    for (int i = 0; i < t; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", c.values[i]);
      if (i) os << ',';
      os << buf;
    }
    os << '\n';
  }
}

inline CurveDataset read_dataset(std::istream& is, Grid grid = gp::default_grid()) {
  CurveDataset ds;
  std::string line;
  if (!std::getline(is, line)) throw FormatError("dataset: missing header");
  int t = 0, redraw = 0;
  long n = 0;
  if (std::sscanf(line.c_str(), "T=%d n=%ld redraw=%d", &t, &n, &redraw) != 3)
    throw FormatError("dataset: bad header '" + line + "'");
  if (t != grid.size()) throw FormatError("dataset: T does not match grid");
  ds.grid = std::move(grid);
  ds.redraw_id = redraw;
  ds.curves.reserve(n);
  for (long k = 0; k < n; ++k) {
    if (!std::getline(is, line) || !line.starts_with("label="))
      throw FormatError("dataset: expected label line for curve " + std::to_string(k));
    Curve c;
    const auto tag = std::string_view(line).substr(6);
    if (tag != "none") {
      c.origin = gp::parse_family(tag);
      if (!c.origin) throw FormatError("dataset: unknown label '" + std::string(tag) + "'");
    }
    c.redraw_id = redraw;
    if (!std::getline(is, line)) throw FormatError("dataset: missing values for curve " + std::to_string(k));
    c.values.resize(t);
    const char* p = line.c_str();
    for (int i = 0; i < t; ++i) {
      char* end = nullptr;
      c.values[i] = std::strtod(p, &end);
      if (end == p) throw FormatError("dataset: bad value in curve " + std::to_string(k));
      p = end;
      if (i + 1 < t) {
        if (*p != ',') throw FormatError("dataset: expected ',' in curve " + std::to_string(k));
        ++p;
      }
    }
    if (*p != '\0' && *p != '\r') throw FormatError("dataset: trailing data in curve " + std::to_string(k));
    ds.curves.push_back(std::move(c));
  }
  return ds;
}

inline void save_dataset(const std::filesystem::path& path, const CurveDataset& ds) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  write_dataset(os, ds);
  if (!os) throw Error("write failed: " + path.string());
}

inline CurveDataset load_dataset(const std::filesystem::path& path, Grid grid = gp::default_grid()) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifact(path.string());
  try {
    return read_dataset(is, std::move(grid));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

/// Redraw manifest: `redraw=<id>` then one kernel-spec line per family.
inline void write_redraw(std::ostream& os, const HyperparamRedraw& r) {
  os << "redraw=" << r.redraw_id << '\n';
  for (const auto& s : r.specs) os << gp::to_string(s) << '\n';
}

inline HyperparamRedraw read_redraw(std::istream& is) {
  HyperparamRedraw r;
  std::string line;
  if (!std::getline(is, line) || std::sscanf(line.c_str(), "redraw=%d", &r.redraw_id) != 1)
    throw FormatError("redraw manifest: bad header");
  for (int f = 0; f < gp::kNumFamilies; ++f) {
    if (!std::getline(is, line)) throw FormatError("redraw manifest: truncated");
    r.specs[f] = gp::parse_kernel_spec(line);
    if (r.specs[f].family != gp::family_at(f)) throw FormatError("redraw manifest: families out of order");
  }
  return r;
}

inline void save_redraw(const std::filesystem::path& path, const HyperparamRedraw& r) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  write_redraw(os, r);
}

inline HyperparamRedraw load_redraw(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw MissingArtifact(path.string());
  return read_redraw(is);
}

}  // namespace fnlearn
