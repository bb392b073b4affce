#ifndef QUAYDECK_CALIB_HPP_
#define QUAYDECK_CALIB_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "quaydeck/env.hpp"
#include "quaydeck/json_util.hpp"
#include "quaydeck/moo.hpp"

namespace quaydeck {

inline constexpr const char* kAnchorFormat = "quaydeck-anchors/1";

/// How a requested preference maps to a direction in normalized objective
/// space. Literal uses p itself; Reciprocal uses (1/p1, 1/p2), which is
/// parallel to (p2, p1).
enum class TargetDirection { Literal, Reciprocal };

inline std::string to_string(TargetDirection d) { return d == TargetDirection::Literal ? "literal" : "reciprocal"; }

inline TargetDirection parse_direction(const std::string& s) {
  if (s == "literal") return TargetDirection::Literal;
  if (s == "reciprocal") return TargetDirection::Reciprocal;
  throw ConfigError("unknown calibration direction '" + s + "'");
}

/// Angle of a point seen from the normalized origin, in [0, pi/2] for the
/// positive quadrant.
inline double direction_angle(const Objectives& z) { return std::atan2(z[1], z[0]); }

inline double target_angle(const Preference& p, TargetDirection dir) {
  return dir == TargetDirection::Literal ? std::atan2(p[1], p[0]) : std::atan2(p[0], p[1]);
}

struct Anchor {
  Preference preference{};
  Objectives point{};  // normalized
  double angle = 0.0;
  bool operator==(const Anchor&) const = default;
};

struct AnchorSet {
  std::vector<Anchor> anchors;  // strictly increasing angle
  Bounds bounds;
  TargetDirection direction = TargetDirection::Literal;
};

/// Pareto-filters normalized (preference, point) pairs, sorts by angle and
/// drops repeated angles (first kept).
inline AnchorSet make_anchor_set(const std::vector<Preference>& prefs, const std::vector<Objectives>& normalized,
                                 const Bounds& bounds, TargetDirection dir) {
  if (prefs.size() != normalized.size()) throw ShapeError("one point per preference required");
  AnchorSet s;
  s.bounds = bounds;
  s.direction = dir;
  for (std::size_t i : pareto_indices(normalized))
    s.anchors.push_back({prefs[i], normalized[i], direction_angle(normalized[i])});
  std::stable_sort(s.anchors.begin(), s.anchors.end(), [](const Anchor& a, const Anchor& b) { return a.angle < b.angle; });
  s.anchors.erase(std::unique(s.anchors.begin(), s.anchors.end(),
                              [](const Anchor& a, const Anchor& b) { return a.angle == b.angle; }),
                  s.anchors.end());
  if (s.anchors.size() < 2) throw ValidationError("anchor set needs at least two distinct non-dominated anchors");
  return s;
}

struct CalibrationResult {
  Preference preference{};
  bool clamped = false;  // target outside the anchor fan
  int lower = -1, upper = -1;
  double alpha_t = 0.0, alpha_c = 0.0;
};

/// Interpolates the preferences of the two anchors bracketing the target
/// direction by the fraction of the bracket angle the target covers.
inline CalibrationResult calibrate(const Preference& target, const AnchorSet& set) {
  const Preference p = check_simplex(target);
  const auto& a = set.anchors;
  if (a.size() < 2) throw ValidationError("anchor set needs at least two anchors");
  const double t = target_angle(p, set.direction);
  CalibrationResult r;
  if (t <= a.front().angle || t >= a.back().angle) {
    const bool low = t <= a.front().angle;
    const std::size_t k = low ? 0 : a.size() - 1;
    r.preference = a[k].preference;
    r.lower = r.upper = static_cast<int>(k);
    r.clamped = t != a[k].angle;
    return r;
  }
  std::size_t i = 0;
  while (i + 2 < a.size() && a[i + 1].angle <= t) ++i;
  r.lower = static_cast<int>(i);
  r.upper = static_cast<int>(i + 1);
  r.alpha_c = a[i + 1].angle - a[i].angle;
  r.alpha_t = t - a[i].angle;
  const Preference& p1 = a[i].preference;
  const Preference& p3 = a[i + 1].preference;
  if (r.alpha_c == 0.0 || r.alpha_t == 0.0) {
    r.preference = p1;
    return r;
  }
  if (r.alpha_t == r.alpha_c) {
    r.preference = p3;
    return r;
  }
  const double f = r.alpha_t / r.alpha_c;
  Preference q{std::max(0.0, p1[0] + f * (p3[0] - p1[0])), std::max(0.0, p1[1] + f * (p3[1] - p1[1]))};
  const double s = q[0] + q[1];
  if (!(s > 0.0)) throw NumericError("calibration produced a zero preference");
  r.preference = {q[0] / s, q[1] / s};
  return r;
}

/// Angle between the point reached under the calibrated preference and the
/// requested direction.
inline double misalignment(const Objectives& normalized_point, const Preference& target, TargetDirection dir) {
  return std::abs(direction_angle(normalized_point) - target_angle(target, dir));
}

using PointEvaluator = std::function<Objectives(const Preference&)>;

struct CalibrationRound {
  int round = 0;
  double mean_misalignment = 0.0;
  double max_misalignment = 0.0;
  std::vector<Preference> calibrated;  // per grid direction
};

struct AnchorBuild {
  AnchorSet set;
  std::vector<CalibrationRound> rounds;  // round 0 = raw grid
};

/// Evaluates the grid, then repeatedly recalibrates each grid direction
/// against all evaluated pairs, stopping after `iterations` rounds or once
/// the worst misalignment drops below `tol` radians.
inline AnchorBuild build_anchor_set(const PointEvaluator& eval, const std::vector<Preference>& grid, int iterations,
                                    TargetDirection dir = TargetDirection::Literal, double tol = 1e-3) {
  if (grid.size() < 2) throw ConfigError("anchor grid needs at least two preferences");
  if (iterations < 0) throw ConfigError("iterations must be >= 0");
  std::vector<Preference> prefs = grid;
  std::vector<Objectives> raw;
  for (const auto& p : grid) raw.push_back(eval(p));
  Bounds bounds;
  try {
    bounds = compute_bounds(raw);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("degenerate front: ") + e.what());
  }
  auto normalized_all = [&] {
    std::vector<Objectives> z;
    for (const auto& x : raw) z.push_back(normalize_point(x, bounds));
    return z;
  };
  AnchorBuild out;
  std::vector<Objectives> current(raw.begin(), raw.end());
  std::vector<Preference> calibrated = grid;
  auto record_round = [&](int k) {
    CalibrationRound r;
    r.round = k;
    r.calibrated = calibrated;
    for (std::size_t g = 0; g < grid.size(); ++g) {
      const double m = misalignment(normalize_point(current[g], bounds), grid[g], dir);
      r.mean_misalignment += m / static_cast<double>(grid.size());
      r.max_misalignment = std::max(r.max_misalignment, m);
    }
    out.rounds.push_back(r);
  };
  out.set = make_anchor_set(prefs, normalized_all(), bounds, dir);
  record_round(0);
  for (int k = 1; k <= iterations && out.rounds.back().max_misalignment >= tol; ++k) {
    for (std::size_t g = 0; g < grid.size(); ++g) {
      calibrated[g] = calibrate(grid[g], out.set).preference;
      current[g] = eval(calibrated[g]);
      prefs.push_back(calibrated[g]);
      raw.push_back(current[g]);
    }
    out.set = make_anchor_set(prefs, normalized_all(), bounds, dir);
    record_round(k);
  }
  return out;
}

inline std::string export_anchors_tsv(const AnchorSet& s) {
  std::ostringstream out;
  out << "# " << kAnchorFormat << "\n";
  out << "# direction\t" << to_string(s.direction) << "\n";
  out << "# bounds\t" << format_double(s.bounds.min[0]) << '\t' << format_double(s.bounds.max[0]) << '\t'
      << format_double(s.bounds.min[1]) << '\t' << format_double(s.bounds.max[1]) << "\n";
  out << "p1\tp2\tnorm_idle\tnorm_empty\n";
  for (const auto& a : s.anchors)
    out << format_double(a.preference[0]) << '\t' << format_double(a.preference[1]) << '\t' << format_double(a.point[0])
        << '\t' << format_double(a.point[1]) << '\n';
  return out.str();
}

inline AnchorSet parse_anchors_tsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  auto fields = [](const std::string& l) {
    std::vector<std::string> cols;
    std::istringstream ls(l);
    for (std::string c; std::getline(ls, c, '\t');) cols.push_back(c);
    return cols;
  };
  if (!std::getline(in, line) || line != std::string("# ") + kAnchorFormat)
    throw ParseError("format", "not a " + std::string(kAnchorFormat) + " table");
  AnchorSet s;
  if (!std::getline(in, line)) throw ParseError("direction", "missing");
  auto d = fields(line);
  if (d.size() != 2 || d[0] != "# direction") throw ParseError("direction", "malformed");
  s.direction = parse_direction(d[1]);
  if (!std::getline(in, line)) throw ParseError("bounds", "missing");
  auto b = fields(line);
  if (b.size() != 5 || b[0] != "# bounds") throw ParseError("bounds", "malformed");
  std::vector<Preference> prefs;
  std::vector<Objectives> pts;
  try {
    s.bounds = {{std::stod(b[1]), std::stod(b[3])}, {std::stod(b[2]), std::stod(b[4])}};
    std::getline(in, line);  // column header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto c = fields(line);
      if (c.size() != 4) throw ParseError("anchor", "expected 4 columns");
      prefs.push_back({std::stod(c[0]), std::stod(c[1])});
      pts.push_back({std::stod(c[2]), std::stod(c[3])});
    }
  } catch (const std::invalid_argument&) {
    throw ParseError("anchor", "non-numeric field");
  }
  return make_anchor_set(prefs, pts, s.bounds, s.direction);
}

}  // namespace quaydeck

#endif  // QUAYDECK_CALIB_HPP_
