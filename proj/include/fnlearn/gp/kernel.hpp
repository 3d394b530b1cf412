#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fnlearn/errors.hpp"
#include "fnlearn/random.hpp"

namespace fnlearn::gp {

/// The 13 compositional-grammar kernels followed by the spectral mixture.
/// The enumerator value doubles as the class label used by the heads.
enum class KernelFamily : int {
  kLin = 0,
  kRbf,
  kPer,
  kLinPlusPer,
  kLinPlusRbf,
  kRbfPlusPer,
  kLinTimesPer,
  kLinTimesRbf,
  kRbfTimesPer,
  kLinPlusRbfPlusPer,
  kLinPlusPerTimesRbf,
  kPerPlusLinTimesRbf,
  kLinTimesRbfTimesPer,
  kSpectralMixture,
};

inline constexpr int kNumFamilies = 14;
inline constexpr int kNumCompositional = 13;

inline constexpr std::array<KernelFamily, kNumFamilies> kAllFamilies = {
    KernelFamily::kLin,          KernelFamily::kRbf,
    KernelFamily::kPer,          KernelFamily::kLinPlusPer,
    KernelFamily::kLinPlusRbf,   KernelFamily::kRbfPlusPer,
    KernelFamily::kLinTimesPer,  KernelFamily::kLinTimesRbf,
    KernelFamily::kRbfTimesPer,  KernelFamily::kLinPlusRbfPlusPer,
    KernelFamily::kLinPlusPerTimesRbf, KernelFamily::kPerPlusLinTimesRbf,
    KernelFamily::kLinTimesRbfTimesPer, KernelFamily::kSpectralMixture,
};

inline constexpr std::array<std::string_view, kNumFamilies> kFamilyTags = {
    "LIN",     "RBF",     "PER",         "LIN+PER",     "LIN+RBF",
    "RBF+PER", "LIN*PER", "LIN*RBF",     "RBF*PER",     "LIN+RBF+PER",
    "LIN+PER*RBF", "PER+LIN*RBF", "LIN*RBF*PER", "SM",
};

constexpr int index_of(KernelFamily f) noexcept { return static_cast<int>(f); }
constexpr KernelFamily family_at(int i) noexcept { return static_cast<KernelFamily>(i); }
constexpr std::string_view tag_of(KernelFamily f) noexcept { return kFamilyTags[index_of(f)]; }
constexpr bool is_compositional(KernelFamily f) noexcept {
  return f != KernelFamily::kSpectralMixture;
}

inline std::optional<KernelFamily> parse_family(std::string_view tag) {
  for (int i = 0; i < kNumFamilies; ++i)
    if (kFamilyTags[i] == tag) return family_at(i);
  return std::nullopt;
}

/// Which of the three atoms a compositional family references.
struct AtomUsage {
  bool lin = false;
  bool rbf = false;
  bool per = false;
};

constexpr AtomUsage atoms_of(KernelFamily f) noexcept {
  using enum KernelFamily;
  switch (f) {
    case kLin: return {true, false, false};
    case kRbf: return {false, true, false};
    case kPer: return {false, false, true};
    case kLinPlusPer:
    case kLinTimesPer: return {true, false, true};
    case kLinPlusRbf:
    case kLinTimesRbf: return {true, true, false};
    case kRbfPlusPer:
    case kRbfTimesPer: return {false, true, true};
    case kLinPlusRbfPlusPer:
    case kLinPlusPerTimesRbf:
    case kPerPlusLinTimesRbf:
    case kLinTimesRbfTimesPer: return {true, true, true};
    case kSpectralMixture: return {};
  }
  return {};
}

/// Combines atom values according to the family's grammar expression.
constexpr double combine_atoms(KernelFamily f, double lin, double rbf, double per) noexcept {
  using enum KernelFamily;
  switch (f) {
    case kLin: return lin;
    case kRbf: return rbf;
    case kPer: return per;
    case kLinPlusPer: return lin + per;
    case kLinPlusRbf: return lin + rbf;
    case kRbfPlusPer: return rbf + per;
    case kLinTimesPer: return lin * per;
    case kLinTimesRbf: return lin * rbf;
    case kRbfTimesPer: return rbf * per;
    case kLinPlusRbfPlusPer: return lin + rbf + per;
    case kLinPlusPerTimesRbf: return lin + per * rbf;
    case kPerPlusLinTimesRbf: return per + lin * rbf;
    case kLinTimesRbfTimesPer: return lin * rbf * per;
    case kSpectralMixture: return 0.0;
  }
  return 0.0;
}

struct MixtureComponent {
  double weight = 0.0;
  double mean = 0.0;   // mu
  double scale = 0.0;  // sigma, signed as drawn
  friend bool operator==(const MixtureComponent&, const MixtureComponent&) = default;
};

inline constexpr double kPeriodFloor = 0.01;

/// A kernel family with a concrete hyperparameter assignment.
///
/// Unused hyperparameters are left unset; `theta()` lists exactly the ones the
/// family's formula references.
struct KernelSpec {
  KernelFamily family = KernelFamily::kLin;
  std::optional<double> lin_offset;   // theta1
  std::optional<double> rbf_length;   // theta2
  std::optional<double> rbf_var;      // theta3
  std::optional<double> per_var;      // theta4
  std::optional<double> per_period;   // theta5, clamped
  std::optional<double> per_length;   // theta6
  std::vector<MixtureComponent> mixture;

  friend bool operator==(const KernelSpec&, const KernelSpec&) = default;

  /// Ordered name -> value view of the hyperparameters.
  std::vector<std::pair<std::string, double>> theta() const {
    std::vector<std::pair<std::string, double>> out;
    auto put = [&](const char* name, const std::optional<double>& v) {
      if (v) out.emplace_back(name, *v);
    };
    put("theta1", lin_offset);
    put("theta2", rbf_length);
    put("theta3", rbf_var);
    put("theta4", per_var);
    put("theta5", per_period);
    put("theta6", per_length);
    if (family == KernelFamily::kSpectralMixture) {
      out.emplace_back("m", static_cast<double>(mixture.size()));
      for (std::size_t c = 0; c < mixture.size(); ++c) {
        const auto idx = std::to_string(c + 1);
        out.emplace_back("w" + idx, mixture[c].weight);
        out.emplace_back("mu" + idx, mixture[c].mean);
        out.emplace_back("sigma" + idx, mixture[c].scale);
      }
    }
    return out;
  }

  /// Throws FormatError when the hyperparameters do not match the family.
  void validate() const {
    const AtomUsage a = atoms_of(family);
    auto need = [&](bool used, const std::optional<double>& v, const char* name) {
      if (used != v.has_value())
        throw FormatError(std::string(tag_of(family)) + (used ? " requires " : " must not set ") + name);
    };
    need(a.lin, lin_offset, "theta1");
    need(a.rbf, rbf_length, "theta2");
    need(a.rbf, rbf_var, "theta3");
    need(a.per, per_var, "theta4");
    need(a.per, per_period, "theta5");
    need(a.per, per_length, "theta6");
    if (a.rbf && (*rbf_length <= 0 || *rbf_var <= 0)) throw FormatError("theta2/theta3 must be positive");
    if (a.per && (*per_var <= 0 || *per_length <= 0)) throw FormatError("theta4/theta6 must be positive");
    if (a.per && *per_period < kPeriodFloor) throw FormatError("theta5 below clamp");
    if (family == KernelFamily::kSpectralMixture) {
      if (mixture.size() < 2 || mixture.size() > 6) throw FormatError("SM requires 2 <= m <= 6");
      for (const auto& c : mixture)
        if (c.weight < 0 || c.weight > 1) throw FormatError("SM weight outside [0,1]");
    } else if (!mixture.empty()) {
      throw FormatError("mixture components on a compositional kernel");
    }
  }
};

/// Draws hyperparameters for `family` from the generative priors.
inline KernelSpec sample_hyperparams(KernelFamily family, Rng& rng) {
  KernelSpec s;
  s.family = family;
  if (family == KernelFamily::kSpectralMixture) {
    const int m = std::uniform_int_distribution<int>(2, 6)(rng);
    s.mixture.resize(m);
    for (auto& c : s.mixture) {
      c.weight = uniform(rng, 0.0, 1.0);
      c.mean = normal(rng, 0.0, 0.01);
      c.scale = normal(rng, 0.0, 0.02);
    }
    return s;
  }
  const AtomUsage a = atoms_of(family);
  if (a.lin) s.lin_offset = normal(rng, 0.0, 2.0);
  if (a.rbf) {
    s.rbf_length = uniform(rng, 1.0, 5.0);
    s.rbf_var = uniform(rng, 1.0, 3.0);
  }
  if (a.per) {
    s.per_var = uniform(rng, 1.0, 3.0);
    s.per_period = std::max(uniform(rng, 0.0, 0.5), kPeriodFloor);
    s.per_length = uniform(rng, 1.0, 5.0);
  }
  return s;
}

inline double linear_atom(const KernelSpec& s, double xi, double xj) {
  return (xi - *s.lin_offset) * (xj - *s.lin_offset);
}

inline double rbf_atom(const KernelSpec& s, double diff) {
  const double l = *s.rbf_length;
  return *s.rbf_var * std::exp(-(diff * diff) / (l * l));
}

inline double periodic_atom(const KernelSpec& s, double diff) {
  const double sn = std::sin(2.0 * std::numbers::pi * std::abs(diff) / *s.per_period);
  const double l = *s.per_length;
  return *s.per_var * std::exp(-(sn * sn) / (l * l));
}

inline double mixture_value(const KernelSpec& s, double diff) {
  constexpr double pi = std::numbers::pi;
  double acc = 0.0;
  for (const auto& c : s.mixture)
    acc += c.weight * std::exp(-2.0 * pi * pi * diff * diff * std::abs(c.scale)) *
           std::cos(2.0 * pi * diff * c.mean);
  return acc;
}

inline double kernel_value(const KernelSpec& s, double xi, double xj) {
  if (s.family == KernelFamily::kSpectralMixture) return mixture_value(s, xi - xj);
  const AtomUsage a = atoms_of(s.family);
  const double d = xi - xj;
  const double lin = a.lin ? linear_atom(s, xi, xj) : 0.0;
  const double rbf = a.rbf ? rbf_atom(s, d) : 0.0;
  const double per = a.per ? periodic_atom(s, d) : 0.0;
  return combine_atoms(s.family, lin, rbf, per);
}

// ---------------------------------------------------------------------------
// Text form: `family=<tag>; theta={name: value, ...}`

namespace detail {
inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline double parse_real(std::string_view s) {
  // strtod round-trips %.17g exactly.
  std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (end == tmp.c_str() || *end != '\0') throw FormatError("bad real: '" + tmp + "'");
  return v;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}
}  // namespace detail

inline std::string to_string(const KernelSpec& s) {
  std::string out = "family=";
  out += tag_of(s.family);
  out += "; theta={";
  bool first = true;
  for (const auto& [name, value] : s.theta()) {
    if (!first) out += ", ";
    first = false;
    out += name;
    out += ": ";
    out += name == "m" ? std::to_string(static_cast<int>(value)) : detail::format_real(value);
  }
  out += "}";
  return out;
}

inline KernelSpec parse_kernel_spec(std::string_view text) {
  using detail::trim;
  text = trim(text);
  constexpr std::string_view kFamily = "family=";
  constexpr std::string_view kTheta = "theta={";
  if (!text.starts_with(kFamily)) throw FormatError("kernel spec must start with 'family='");
  const auto semi = text.find(';');
  if (semi == std::string_view::npos) throw FormatError("kernel spec missing ';'");
  const auto tag = trim(text.substr(kFamily.size(), semi - kFamily.size()));
  const auto family = parse_family(tag);
  if (!family) throw FormatError("unknown kernel family '" + std::string(tag) + "'");
  auto rest = trim(text.substr(semi + 1));
  if (!rest.starts_with(kTheta) || !rest.ends_with("}")) throw FormatError("kernel spec missing theta={...}");
  rest = rest.substr(kTheta.size(), rest.size() - kTheta.size() - 1);

  std::map<std::string, double, std::less<>> kv;
  while (!trim(rest).empty()) {
    const auto comma = rest.find(',');
    const auto item = trim(rest.substr(0, comma));
    const auto colon = item.find(':');
    if (colon == std::string_view::npos) throw FormatError("theta entry missing ':'");
    kv[std::string(trim(item.substr(0, colon)))] = detail::parse_real(trim(item.substr(colon + 1)));
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }

  KernelSpec s;
  s.family = *family;
  auto take = [&](const std::string& name) -> std::optional<double> {
    auto it = kv.find(name);
    if (it == kv.end()) return std::nullopt;
    const double v = it->second;
    kv.erase(it);
    return v;
  };
  s.lin_offset = take("theta1");
  s.rbf_length = take("theta2");
  s.rbf_var = take("theta3");
  s.per_var = take("theta4");
  s.per_period = take("theta5");
  s.per_length = take("theta6");
  if (auto m = take("m")) {
    const int count = static_cast<int>(*m);
    s.mixture.resize(count);
    for (int c = 0; c < count; ++c) {
      const auto idx = std::to_string(c + 1);
      auto w = take("w" + idx), mu = take("mu" + idx), sg = take("sigma" + idx);
      if (!w || !mu || !sg) throw FormatError("SM component " + idx + " incomplete");
      s.mixture[c] = {*w, *mu, *sg};
    }
  }
  if (!kv.empty()) throw FormatError("unexpected hyperparameter '" + kv.begin()->first + "'");
  s.validate();
  return s;
}

}  // namespace fnlearn::gp
