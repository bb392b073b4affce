#ifndef QUAYDECK_PLOT_HPP_
#define QUAYDECK_PLOT_HPP_

#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "quaydeck/moo.hpp"

namespace quaydeck {

struct ScatterSeries {
  std::string label;
  std::vector<Objectives> points;  // normalized to [0, 1]^2
};

/// Scatter data as TSV: label, x, y.
inline std::string scatter_tsv(const std::vector<ScatterSeries>& series) {
  std::ostringstream out;
  out << "label\tnorm_idle\tnorm_empty\n";
  for (const auto& s : series)
    for (const auto& p : s.points) out << s.label << '\t' << format_double(p[0]) << '\t' << format_double(p[1]) << '\n';
  return out.str();
}

/// Minimal SVG scatter over the unit square, one colour per series.
inline std::string scatter_svg(const std::vector<ScatterSeries>& series, const std::string& x_label = "QC idle (normalized)",
                               const std::string& y_label = "empty distance (normalized)") {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  const double W = 480, H = 400, L = 60, R = 140, T = 20, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  auto X = [&](double v) { return L + v * pw; };
  auto Y = [&](double v) { return T + (1.0 - v) * ph; };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = k / 4.0;
    o << "<text x=\"" << num(X(v)) << "\" y=\"" << num(T + ph + 15) << "\" text-anchor=\"middle\">" << num(v) << "</text>\n";
    o << "<text x=\"" << num(L - 6) << "\" y=\"" << num(Y(v) + 4) << "\" text-anchor=\"end\">" << num(v) << "</text>\n";
  }
  o << "<text x=\"" << num(L + pw / 2) << "\" y=\"" << num(H - 10) << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  o << "<text transform=\"translate(15," << num(T + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">" << y_label << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* c = colors[s % 8];
    for (const auto& p : series[s].points)
      o << "<circle cx=\"" << num(X(p[0])) << "\" cy=\"" << num(Y(p[1])) << "\" r=\"3.5\" fill=\"" << c << "\" fill-opacity=\"0.8\"/>\n";
    const double ly = T + 14 + 16.0 * static_cast<double>(s);
    o << "<circle cx=\"" << num(L + pw + 16) << "\" cy=\"" << num(ly - 4) << "\" r=\"4\" fill=\"" << c << "\"/>\n";
    o << "<text x=\"" << num(L + pw + 26) << "\" y=\"" << num(ly) << "\">" << series[s].label << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

/// Groups points by label and normalizes over the union of all of them.
inline std::vector<ScatterSeries> normalized_series(const std::vector<PolicyPoint>& pts, Bounds* bounds_out = nullptr) {
  const Bounds b = compute_bounds(objectives_of(pts));
  if (bounds_out) *bounds_out = b;
  std::vector<ScatterSeries> out;
  std::map<std::string, std::size_t> index;
  for (const auto& p : pts) {
    auto [it, fresh] = index.emplace(p.label, out.size());
    if (fresh) out.push_back({p.label, {}});
    out[it->second].points.push_back(normalize_point(p.objectives, b));
  }
  return out;
}

}  // namespace quaydeck

#endif  // QUAYDECK_PLOT_HPP_
