#ifndef QUAYDECK_TESTS_NN_FIXTURES_HPP_
#define QUAYDECK_TESTS_NN_FIXTURES_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "quaydeck/env.hpp"
#include "quaydeck/nn/network.hpp"
#include "quaydeck/rng.hpp"

namespace quaydeck::fixtures {

/// Random feature rows for distinct QCs drawn from [0, qc_count).
inline StateFeatures random_features(int rows, int qc_count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<int> ids(static_cast<std::size_t>(qc_count));
  for (int i = 0; i < qc_count; ++i) ids[static_cast<std::size_t>(i)] = i;
  std::shuffle(ids.begin(), ids.end(), rng);
  ids.resize(static_cast<std::size_t>(rows));
  std::sort(ids.begin(), ids.end());
  StateFeatures f;
  f.rows = rows;
  f.qcs = ids;
  f.values.assign(static_cast<std::size_t>(rows) * kFeatureWidth, 0.0);
  for (int r = 0; r < rows; ++r) {
    double* row = f.values.data() + static_cast<std::size_t>(r) * kFeatureWidth;
    for (int c = 0; c < kIdCodeFirst; ++c) row[c] = uniform01(rng) * 1.5;
    row[kTaskTypeLoading] = uniform01(rng) < 0.5 ? 1.0 : 0.0;
    encode_qc_id(ids[static_cast<std::size_t>(r)], {row + kIdCodeFirst, kIdBits});
  }
  return f;
}

/// Rows of `f` reordered so that new row i is old row perm[i].
inline StateFeatures permute_rows(const StateFeatures& f, const std::vector<int>& perm) {
  StateFeatures g = f;
  for (int i = 0; i < f.rows; ++i) {
    const auto src = f.row(perm[static_cast<std::size_t>(i)]);
    std::copy(src.begin(), src.end(), g.values.begin() + static_cast<std::ptrdiff_t>(i) * kFeatureWidth);
    g.qcs[static_cast<std::size_t>(i)] = f.qcs[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
  }
  return g;
}

/// Direct evaluation of log pi(action) through the public forward only.
inline double log_pi(const nn::PolicyParams& P, const StateFeatures& f, const Preference& p, int action) {
  const auto probs = nn::forward(P, f, p).record_probs(0);
  return std::log(probs[static_cast<std::size_t>(action)]);
}

struct GradCheck {
  std::string worst_tensor;
  double worst_rel = 0.0;
  std::vector<double> per_tensor;  // max relative error per tensor
};

/// Central finite differences with step h against analytic gradients `G`.
/// Relative error per component uses max(|a|, |n|, floor) as denominator.
inline GradCheck finite_difference_check(nn::PolicyParams P, const nn::PolicyParams& G, const StateFeatures& f,
                                         const Preference& p, int action, double h = 1e-5, double floor = 1e-6) {
  GradCheck out;
  const auto layout = nn::param_layout(P.dims, P.fusion);
  for (std::size_t ti = 0; ti < P.tensors.size(); ++ti) {
    double worst = 0.0;
    auto& vals = P.tensors[ti].values;
    for (std::size_t k = 0; k < vals.size(); ++k) {
      const double saved = vals[k];
      vals[k] = saved + h;
      const double up = log_pi(P, f, p, action);
      vals[k] = saved - h;
      const double dn = log_pi(P, f, p, action);
      vals[k] = saved;
      const double num = (up - dn) / (2.0 * h);
      const double ana = G.tensors[ti].values[k];
      const double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), floor});
      worst = std::max(worst, rel);
    }
    out.per_tensor.push_back(worst);
    if (worst >= out.worst_rel) {
      out.worst_rel = worst;
      out.worst_tensor = layout[ti].name;
    }
  }
  return out;
}

}  // namespace quaydeck::fixtures

#endif  // QUAYDECK_TESTS_NN_FIXTURES_HPP_
