#ifndef QUAYDECK_MOO_HPP_
#define QUAYDECK_MOO_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "quaydeck/env.hpp"
#include "quaydeck/json_util.hpp"
#include "quaydeck/parallel.hpp"

namespace quaydeck {

inline constexpr const char* kFrontFormat = "quaydeck-front/1";

using Objectives = std::array<double, 2>;

/// Minimization dominance: a <= b everywhere and a != b.
inline bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("dominance test on vectors of different length");
  bool strict = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strict = true;
  }
  return strict;
}

inline bool dominates(const Objectives& a, const Objectives& b) {
  return a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1]);
}

struct PolicyPoint {
  Preference preference{};
  Objectives objectives{};  // idle seconds, empty meters (episode means)
  std::string label;
  bool operator==(const PolicyPoint&) const = default;
};

struct Bounds {
  Objectives min{};
  Objectives max{};
  bool operator==(const Bounds&) const = default;
};

struct ParetoSet {
  std::vector<PolicyPoint> points;
};

/// Indices of the non-dominated points, in input order. Among exact
/// duplicates only the first occurrence survives.
inline std::vector<std::size_t> pareto_indices(const std::vector<Objectives>& pts) {
  std::vector<std::size_t> order(pts.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (pts[a][0] != pts[b][0]) return pts[a][0] < pts[b][0];
    if (pts[a][1] != pts[b][1]) return pts[a][1] < pts[b][1];
    return a < b;
  });
  std::vector<std::size_t> keep;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i : order)
    if (pts[i][1] < best) {
      keep.push_back(i);
      best = pts[i][1];
    }
  std::sort(keep.begin(), keep.end());
  return keep;
}

inline ParetoSet pareto_filter(const std::vector<PolicyPoint>& points) {
  if (points.empty()) throw ValidationError("pareto_filter needs at least one point");
  std::vector<Objectives> objs;
  for (const auto& p : points) objs.push_back(p.objectives);
  ParetoSet out;
  for (std::size_t i : pareto_indices(objs)) out.points.push_back(points[i]);
  return out;
}

/// Min/max per objective over the union; both objectives must vary.
inline Bounds compute_bounds(const std::vector<Objectives>& pts) {
  if (pts.empty()) throw ValidationError("normalization needs points");
  Bounds b{pts[0], pts[0]};
  for (const auto& p : pts)
    for (int j = 0; j < 2; ++j) {
      b.min[static_cast<std::size_t>(j)] = std::min(b.min[static_cast<std::size_t>(j)], p[static_cast<std::size_t>(j)]);
      b.max[static_cast<std::size_t>(j)] = std::max(b.max[static_cast<std::size_t>(j)], p[static_cast<std::size_t>(j)]);
    }
  for (int j = 0; j < 2; ++j)
    if (!(b.max[static_cast<std::size_t>(j)] > b.min[static_cast<std::size_t>(j)]))
      throw ValidationError("degenerate comparison set: objective " + std::to_string(j + 1) + " is constant");
  return b;
}

inline Objectives normalize_point(const Objectives& x, const Bounds& b) {
  return {(x[0] - b.min[0]) / (b.max[0] - b.min[0]), (x[1] - b.min[1]) / (b.max[1] - b.min[1])};
}

inline std::vector<Objectives> normalize(const std::vector<Objectives>& pts, Bounds* bounds_out = nullptr) {
  const Bounds b = compute_bounds(pts);
  if (bounds_out) *bounds_out = b;
  std::vector<Objectives> out;
  for (const auto& p : pts) out.push_back(normalize_point(p, b));
  return out;
}

/// Area dominated by `pts` and bounded by `ref`; dominated inputs add nothing.
inline double hypervolume_2d(std::vector<Objectives> pts, const Objectives& ref = {1.0, 1.0}) {
  for (const auto& p : pts) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw ValidationError("non-finite point in hypervolume");
    if (p[0] > ref[0] || p[1] > ref[1]) throw ValidationError("point lies beyond the hypervolume reference");
  }
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  double prev_y = ref[1];
  for (const auto& p : pts)
    if (p[1] < prev_y) {
      area += (ref[0] - p[0]) * (prev_y - p[1]);
      prev_y = p[1];
    }
  return area;
}

/// Mean squared gap between consecutive points, summed over objectives.
inline double sparsity(const std::vector<Objectives>& pts) {
  if (pts.size() < 2) throw ValidationError("sparsity needs at least two points");
  double total = 0.0;
  for (std::size_t j = 0; j < 2; ++j) {
    std::vector<double> v;
    for (const auto& p : pts) v.push_back(p[j]);
    std::sort(v.begin(), v.end());
    for (std::size_t i = 0; i + 1 < v.size(); ++i) total += (v[i] - v[i + 1]) * (v[i] - v[i + 1]);
  }
  return total / static_cast<double>(pts.size() - 1);
}

/// Componentwise mean objectives over C rollouts on seeds base..base+C-1.
inline PolicyPoint evaluate_policy(const DispatchPolicy& policy, const Preference& pref, const TerminalInstance& inst,
                                   int C, std::uint64_t base_seed, int jobs = 1,
                                   RolloutMode mode = RolloutMode::Greedy, const std::string& label = {}) {
  if (C < 1) throw ConfigError("evaluation needs C >= 1");
  std::vector<ObjectiveVector> objs(static_cast<std::size_t>(C));
  parallel_for(objs.size(), jobs, [&](std::size_t c) {
    objs[c] = rollout(policy, inst, pref, base_seed + c, mode).objectives;
  });
  PolicyPoint out;
  out.preference = check_simplex(pref);
  out.label = label;
  for (const auto& o : objs) {
    out.objectives[0] += o.idle_s;
    out.objectives[1] += o.empty_m;
  }
  out.objectives[0] /= C;
  out.objectives[1] /= C;
  return out;
}

/// Reporting units: QC idle minutes per QC, empty meters per task.
inline Objectives report_units(const Objectives& raw, const TerminalInstance& inst) {
  const double tasks = std::max(inst.total_tasks(), 1);
  return {raw[0] / 60.0 / inst.qc_count, raw[1] / tasks};
}

/// Tab-separated front table. Normalized columns use `bounds` when given.
inline std::string export_front_tsv(const std::vector<PolicyPoint>& pts, const TerminalInstance* inst = nullptr,
                                    const Bounds* bounds = nullptr) {
  std::ostringstream out;
  out << "# " << kFrontFormat << "\n";
  out << "label\tp1\tp2\tidle_s\tempty_m\tidle_min_per_qc\tempty_m_per_task\tnorm_idle\tnorm_empty\n";
  for (const auto& p : pts) {
    out << (p.label.empty() ? "-" : p.label) << '\t' << format_double(p.preference[0]) << '\t'
        << format_double(p.preference[1]) << '\t' << format_double(p.objectives[0]) << '\t'
        << format_double(p.objectives[1]);
    if (inst) {
      const auto r = report_units(p.objectives, *inst);
      out << '\t' << format_double(r[0]) << '\t' << format_double(r[1]);
    } else {
      out << "\t-\t-";
    }
    if (bounds) {
      const auto z = normalize_point(p.objectives, *bounds);
      out << '\t' << format_double(z[0]) << '\t' << format_double(z[1]);
    } else {
      out << "\t-\t-";
    }
    out << '\n';
  }
  return out.str();
}

inline std::vector<PolicyPoint> parse_front_tsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != std::string("# ") + kFrontFormat)
    throw ParseError("format", "not a " + std::string(kFrontFormat) + " table");
  if (!std::getline(in, line) || line.rfind("label\t", 0) != 0) throw ParseError("header", "missing column header");
  std::vector<PolicyPoint> out;
  int lineno = 2;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, '\t');) cols.push_back(c);
    if (cols.size() < 5) throw ParseError("line " + std::to_string(lineno), "expected at least 5 columns");
    PolicyPoint p;
    p.label = cols[0] == "-" ? "" : cols[0];
    try {
      p.preference = {std::stod(cols[1]), std::stod(cols[2])};
      p.objectives = {std::stod(cols[3]), std::stod(cols[4])};
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(lineno), "non-numeric field");
    }
    out.push_back(p);
  }
  return out;
}

inline std::vector<Objectives> objectives_of(const std::vector<PolicyPoint>& pts) {
  std::vector<Objectives> out;
  for (const auto& p : pts) out.push_back(p.objectives);
  return out;
}

struct FrontMetrics {
  double hypervolume = 0.0;
  double sparsity = 0.0;  // NaN when the filtered front has one point
  std::size_t size = 0;
};

/// HV and sparsity of each front after normalizing over the union of all.
inline std::vector<FrontMetrics> compare_fronts(const std::vector<std::vector<PolicyPoint>>& fronts, Bounds* bounds_out = nullptr) {
  std::vector<Objectives> all;
  for (const auto& f : fronts)
    for (const auto& p : f) all.push_back(p.objectives);
  const Bounds b = compute_bounds(all);
  if (bounds_out) *bounds_out = b;
  std::vector<FrontMetrics> out;
  for (const auto& f : fronts) {
    FrontMetrics m;
    if (f.empty()) {
      out.push_back(m);
      continue;
    }
    std::vector<Objectives> z;
    for (const auto& p : pareto_filter(f).points) z.push_back(normalize_point(p.objectives, b));
    m.size = z.size();
    m.hypervolume = hypervolume_2d(z);
    m.sparsity = z.size() >= 2 ? sparsity(z) : std::numeric_limits<double>::quiet_NaN();
    out.push_back(m);
  }
  return out;
}

}  // namespace quaydeck

#endif  // QUAYDECK_MOO_HPP_
