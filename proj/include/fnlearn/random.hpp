#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fnlearn {

using Rng = std::mt19937_64;

namespace detail {
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}
}  // namespace detail

/// Derives an independent stream seed from a base seed and a path of tags.
/// Streams keyed by (seed, a, b, ...) never depend on how many values any
/// other stream consumed, so generation order and threading do not matter.
inline std::uint64_t derive_seed(std::uint64_t base,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = detail::splitmix64(base);
  for (std::uint64_t p : path) h = detail::splitmix64(h ^ detail::splitmix64(p + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(base, path));
}

/// Stream tags for the top-level purposes a seed is used for.
enum class Stream : std::uint64_t {
  kRedraw = 1,
  kTrainCurves,
  kAugment,
  kInit,
  kClassify,
  kMultipleChoice,
  kFreeform,
  kHeadFit,
  kDataset,
  kPreview,
};

constexpr std::uint64_t tag(Stream s) noexcept { return static_cast<std::uint64_t>(s); }

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double normal(Rng& rng, double mean, double stddev) {
  return std::normal_distribution<double>(mean, stddev)(rng);
}

}  // namespace fnlearn
