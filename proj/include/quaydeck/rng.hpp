#ifndef QUAYDECK_RNG_HPP_
#define QUAYDECK_RNG_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <string_view>

#include "quaydeck/error.hpp"

namespace quaydeck {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent child seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a over a stream name, so `derive_seed(root, "travel")` is stable
/// across builds.
constexpr std::uint64_t name_hash(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view stream) noexcept {
  return mix64(root ^ mix64(name_hash(stream)));
}

constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) noexcept {
  return mix64(mix64(root) + index);
}

inline Rng make_rng(std::uint64_t root, std::string_view stream) {
  return Rng(derive_seed(root, stream));
}

/// Uniform double in [0, 1) built from the top 53 bits. Unlike
/// std::uniform_real_distribution this is identical across standard libraries.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)) % n;
}

/// Standard normal via Box-Muller on uniform01 (portable, no cached state).
inline double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Normal(mean, sd) truncated to [min, max] by rejection.
struct TruncatedNormal {
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;

  void validate(std::string_view what) const {
    if (!(min > 0.0)) throw ConfigError(std::string(what) + ": lower truncation bound must be > 0");
    if (!(max >= min)) throw ConfigError(std::string(what) + ": max must be >= min");
    if (!(sd >= 0.0)) throw ConfigError(std::string(what) + ": sd must be >= 0");
  }

  double sample(Rng& rng) const {
    if (sd == 0.0 || min == max) return std::clamp(mean, min, max);
    for (int attempt = 0; attempt < 1000; ++attempt) {
      const double x = mean + sd * standard_normal(rng);
      if (x >= min && x <= max) return x;
    }
    return std::clamp(mean, min, max);
  }

  bool operator==(const TruncatedNormal&) const = default;
};

/// Durations are kept on a 2^-10 s grid so that every timeline sum and
/// difference is exact in binary64.
inline constexpr double kTimeQuantum = 0x1.0p-10;

inline double quantize_time(double seconds) {
  return std::round(seconds / kTimeQuantum) * kTimeQuantum;
}

}  // namespace quaydeck

#endif  // QUAYDECK_RNG_HPP_
