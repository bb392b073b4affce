#ifndef QUAYDECK_TESTS_MOO_FIXTURES_HPP_
#define QUAYDECK_TESTS_MOO_FIXTURES_HPP_

#include <algorithm>
#include <functional>
#include <vector>

#include "quaydeck/moo.hpp"
#include "quaydeck/rng.hpp"

namespace quaydeck::fixtures {

/// O(n^2) dominance oracle: indices not dominated by any point and not an
/// exact repeat of an earlier point.
inline std::vector<std::size_t> brute_force_front(const std::vector<Objectives>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool keep = true;
    for (std::size_t j = 0; j < pts.size() && keep; ++j) {
      if (j == i) continue;
      const bool j_dom = pts[j][0] <= pts[i][0] && pts[j][1] <= pts[i][1] && (pts[j][0] < pts[i][0] || pts[j][1] < pts[i][1]);
      const bool earlier_dup = j < i && pts[j] == pts[i];
      if (j_dom || earlier_dup) keep = false;
    }
    if (keep) out.push_back(i);
  }
  return out;
}

/// O(n^2) rank oracle: peel non-dominated layers one at a time.
std::vector<int> brute_force_ranks(const std::vector<Objectives>& f) {
  std::vector<int> rank(f.size(), -1);
  for (int r = 0;; ++r) {
    std::vector<std::size_t> layer;
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (rank[i] >= 0) continue;
      bool dom = false;
      for (std::size_t j = 0; j < f.size() && !dom; ++j)
        if (rank[j] < 0 && j != i && f[j][0] <= f[i][0] && f[j][1] <= f[i][1] && f[j] != f[i]) dom = true;
      if (!dom) layer.push_back(i);
    }
    if (layer.empty()) break;
    for (std::size_t i : layer) rank[i] = r;
  }
  return rank;
}

/// Monte-Carlo estimate of the area in [0, 1]^2 dominated by `pts`.
inline double monte_carlo_hv(const std::vector<Objectives>& pts, int samples, std::uint64_t seed) {
  Rng rng(seed);
  long long hit = 0;
  for (int s = 0; s < samples; ++s) {
    const double x = uniform01(rng), y = uniform01(rng);
    for (const auto& p : pts)
      if (p[0] <= x && p[1] <= y) {
        ++hit;
        break;
      }
  }
  return static_cast<double>(hit) / samples;
}

/// Jittered Monte-Carlo estimate: one uniform sample in each cell of a
/// side x side grid over [0, 1]^2.
inline double stratified_hv(const std::vector<Objectives>& pts, int side, std::uint64_t seed) {
  Rng rng(seed);
  long long hit = 0;
  for (int i = 0; i < side; ++i)
    for (int j = 0; j < side; ++j) {
      const double x = (i + uniform01(rng)) / side, y = (j + uniform01(rng)) / side;
      for (const auto& p : pts)
        if (p[0] <= x && p[1] <= y) {
          ++hit;
          break;
        }
    }
  return static_cast<double>(hit) / (static_cast<double>(side) * side);
}

/// Random points with coarse coordinates so ties and duplicates occur.
inline std::vector<Objectives> random_points(std::size_t n, Rng& rng, bool coarse) {
  std::vector<Objectives> pts(n);
  for (auto& p : pts) {
    if (coarse) {
      p = {static_cast<double>(uniform_index(rng, 20)), static_cast<double>(uniform_index(rng, 20))};
    } else {
      p = {uniform01(rng), uniform01(rng)};
    }
  }
  return pts;
}

/// Random mutually non-dominated front inside [0, 1]^2.
inline std::vector<Objectives> random_front(std::size_t n, Rng& rng) {
  std::vector<double> xs(n), ys(n);
  for (auto& x : xs) x = uniform01(rng);
  for (auto& y : ys) y = uniform01(rng);
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end(), std::greater<>());
  std::vector<Objectives> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back({xs[i], ys[i]});
  return out;
}

}  // namespace quaydeck::fixtures

#endif  // QUAYDECK_TESTS_MOO_FIXTURES_HPP_
