#ifndef QUAYDECK_ENV_HPP_
#define QUAYDECK_ENV_HPP_

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "quaydeck/error.hpp"
#include "quaydeck/instance.hpp"
#include "quaydeck/rng.hpp"
#include "quaydeck/sim.hpp"

namespace quaydeck {

/// Nine scalar observation items plus a 5-bit QC id code.
inline constexpr int kFeatureWidth = 14;
inline constexpr int kIdBits = 5;

/// Column of each observation item in a feature row.
enum FeatureColumn : int {
  kRemainingTasks = 0,
  kWorkingTrucks = 1,
  kTaskPathDistance = 2,
  kEmptyLegDistance = 3,
  kQcQueue = 4,
  kYardQueue = 5,
  kTaskTypeLoading = 6,
  kHeadingTrucks = 7,
  kYardDistance = 8,
  kIdCodeFirst = 9,
};

using Preference = std::array<double, 2>;

/// Validates that `p` lies on the 2-simplex within `tol`, returning the
/// renormalized vector.
inline Preference check_simplex(const Preference& p, double tol = 1e-9) {
  if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw ValidationError("preference must be finite");
  if (p[0] < 0.0 || p[1] < 0.0) throw ValidationError("preference components must be >= 0");
  const double s = p[0] + p[1];
  if (std::abs(s - 1.0) > tol) throw ValidationError("preference must sum to 1");
  return {p[0] / s, p[1] / s};
}

/// Evenly spaced preferences from [1, 0] to [0, 1].
inline std::vector<Preference> preference_grid(int n) {
  if (n < 2) throw ConfigError("preference grid needs at least 2 points");
  std::vector<Preference> out;
  for (int k = 0; k < n; ++k) {
    const double w = static_cast<double>(k) / static_cast<double>(n - 1);
    out.push_back({1.0 - w, w});
  }
  return out;
}

/// Divisors applied to raw feature values.
struct FeatureScales {
  double distance_m = 1.0;  // berth length
  double count = 1.0;       // truck count
  bool operator==(const FeatureScales&) const = default;
};

inline FeatureScales feature_scales_for(const TerminalInstance& inst) {
  return {inst.berth_length_m(), static_cast<double>(inst.truck_count)};
}

/// One row per active QC, ascending QC index.
struct StateFeatures {
  int rows = 0;
  std::vector<double> values;  // rows x kFeatureWidth, row-major
  std::vector<int> qcs;        // QC id of each row

  std::span<const double> row(int i) const {
    return {values.data() + static_cast<std::size_t>(i) * kFeatureWidth, kFeatureWidth};
  }
  /// Per-QC candidacy flags.
  std::vector<bool> active_mask(int qc_count) const {
    std::vector<bool> m(static_cast<std::size_t>(qc_count), false);
    for (int q : qcs) m[static_cast<std::size_t>(q)] = true;
    return m;
  }
};

/// Writes the 5-bit binary code of `qc` (most significant bit first).
inline void encode_qc_id(int qc, std::span<double> out) {
  for (int b = 0; b < kIdBits; ++b) out[static_cast<std::size_t>(b)] = ((qc >> (kIdBits - 1 - b)) & 1) ? 1.0 : 0.0;
}

/// Observation for the truck of decision `dp`.
inline StateFeatures observe(const Simulator& sim, const DecisionPoint& dp, const FeatureScales& scales) {
  const auto& inst = sim.instance();
  const NodeId here = sim.trucks()[static_cast<std::size_t>(dp.truck)].node;
  StateFeatures f;
  f.qcs = dp.active_qcs;
  f.rows = static_cast<int>(f.qcs.size());
  f.values.assign(static_cast<std::size_t>(f.rows) * kFeatureWidth, 0.0);
  for (int r = 0; r < f.rows; ++r) {
    const int q = f.qcs[static_cast<std::size_t>(r)];
    const auto task = sim.next_task(q);
    if (!task) throw InternalError("active QC without an unassigned task");
    double* row = f.values.data() + static_cast<std::size_t>(r) * kFeatureWidth;
    const NodeId first = inst.first_node(*task);
    const NodeId second = inst.second_node(*task);
    const NodeId yard = inst.yard_node(task->yard_index);
    row[kRemainingTasks] = sim.remaining_unassigned(q) / scales.count;
    row[kWorkingTrucks] = sim.working_trucks(q) / scales.count;
    row[kTaskPathDistance] = (distance(inst, here, first) + distance(inst, first, second)) / scales.distance_m;
    row[kEmptyLegDistance] = distance(inst, here, first) / scales.distance_m;
    row[kQcQueue] = sim.qc_queue_length(q) / scales.count;
    row[kYardQueue] = sim.yard_queue_length(task->yard_index) / scales.count;
    row[kTaskTypeLoading] = task->type == TaskType::Loading ? 1.0 : 0.0;
    row[kHeadingTrucks] = sim.heading_trucks(q) / scales.count;
    row[kYardDistance] = distance(inst, here, yard) / scales.distance_m;
    encode_qc_id(q, {row + kIdCodeFirst, kIdBits});
    for (int c = 0; c < kFeatureWidth; ++c)
      if (!std::isfinite(row[c])) throw NumericError("non-finite feature");
  }
  return f;
}

/// Per-step rewards (both non-positive).
struct RewardVector {
  double idle = 0.0;  // -QC idle seconds credited to this dispatch
  double dist = 0.0;  // -empty meters of this dispatch
  bool operator==(const RewardVector&) const = default;
};

struct StepResult {
  RewardVector reward;  // idle component is 0 until finalize_rewards
  TaskRef task;
  bool done = false;
};

/// MOMDP view of a Simulator: one decision per idle-truck request.
class Env {
 public:
  Env(const TerminalInstance& inst, std::uint64_t seed, FeatureScales scales)
      : sim_(inst, seed), scales_(scales) {
    advance();
  }
  Env(const TerminalInstance& inst, std::uint64_t seed) : Env(inst, seed, feature_scales_for(inst)) {}

  bool done() const { return !decision_.has_value(); }
  const DecisionPoint& decision() const {
    if (!decision_) throw InvalidAction("episode is done");
    return *decision_;
  }
  const StateFeatures& features() const {
    if (!decision_) throw InvalidAction("episode is done");
    return features_;
  }
  const Simulator& sim() const { return sim_; }
  const FeatureScales& scales() const { return scales_; }

  StepResult step(int qc) {
    if (!decision_) throw InvalidAction("episode is done");
    const std::size_t before = sim_.log().dispatches.size();
    sim_.apply_dispatch(*decision_, qc);
    const DispatchRecord& rec = sim_.log().dispatches[before];
    StepResult out;
    out.reward.dist = -rec.empty_distance;
    out.task = rec.task;
    advance();
    out.done = done();
    return out;
  }

 private:
  void advance() {
    decision_ = sim_.next_decision();
    if (decision_) features_ = observe(sim_, *decision_, scales_);
  }

  Simulator sim_;
  FeatureScales scales_;
  std::optional<DecisionPoint> decision_;
  StateFeatures features_;
};

struct Transition {
  StateFeatures features;
  Preference preference{};
  int action = 0;  // row index into features
  int qc = 0;
  double log_prob = 0.0;
  TaskRef task;
  RewardVector reward;
};

struct Trajectory {
  std::vector<Transition> steps;
  ObjectiveVector objectives;
  std::uint64_t seed = 0;
  bool finalized = false;
};

/// Credits each dispatch with the QC idle time its arrival caused. After this
/// the negated reward sums equal the episode objectives exactly.
inline void finalize_rewards(Trajectory& traj, const EpisodeLog& log) {
  if (!log.finished) throw ValidationError("episode not finished");
  if (traj.steps.size() != log.dispatches.size())
    throw ValidationError("trajectory has " + std::to_string(traj.steps.size()) + " steps but the log has " +
                          std::to_string(log.dispatches.size()) + " dispatches");
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    auto& step = traj.steps[t];
    if (!(step.task == log.dispatches[t].task)) throw ValidationError("trajectory/log dispatch order mismatch");
    step.reward.idle = -idle_contribution(log, step.task.qc, step.task.order);
  }
  traj.objectives = episode_objectives(log);
  traj.finalized = true;
}

/// A dispatch rule: a probability distribution over the active rows.
class DispatchPolicy {
 public:
  virtual ~DispatchPolicy() = default;
  virtual std::vector<double> probabilities(const StateFeatures& features, const Preference& pref) const = 0;
  /// Feature normalization this policy expects on `inst`.
  virtual FeatureScales scales_for(const TerminalInstance& inst) const { return feature_scales_for(inst); }
};

class UniformRandomPolicy final : public DispatchPolicy {
 public:
  std::vector<double> probabilities(const StateFeatures& f, const Preference&) const override {
    return std::vector<double>(static_cast<std::size_t>(f.rows), 1.0 / f.rows);
  }
};

enum class RolloutMode { Sample, Greedy };

/// Index of the largest probability; ties go to the lowest row (= lowest QC).
inline int argmax_lowest(const std::vector<double>& probs) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(probs.size()); ++i)
    if (probs[static_cast<std::size_t>(i)] > probs[static_cast<std::size_t>(best)]) best = i;
  return best;
}

inline int sample_index(const std::vector<double>& probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    acc += probs[static_cast<std::size_t>(i)];
    if (u < acc) return i;
  }
  for (int i = static_cast<int>(probs.size()) - 1; i >= 0; --i)
    if (probs[static_cast<std::size_t>(i)] > 0.0) return i;
  return 0;
}

/// Runs one full episode under `policy` and returns the finalized trajectory.
inline Trajectory rollout(const DispatchPolicy& policy, const TerminalInstance& inst, const Preference& pref,
                          std::uint64_t seed, RolloutMode mode) {
  const Preference p = check_simplex(pref);
  Env env(inst, seed, policy.scales_for(inst));
  Rng action_rng = make_rng(seed, "action");
  Trajectory traj;
  traj.seed = seed;
  traj.steps.reserve(static_cast<std::size_t>(inst.total_tasks()));
  while (!env.done()) {
    Transition tr;
    tr.features = env.features();
    tr.preference = p;
    const auto probs = policy.probabilities(tr.features, p);
    if (static_cast<int>(probs.size()) != tr.features.rows) throw ShapeError("policy returned wrong arity");
    tr.action = mode == RolloutMode::Greedy ? argmax_lowest(probs) : sample_index(probs, action_rng);
    tr.qc = tr.features.qcs[static_cast<std::size_t>(tr.action)];
    tr.log_prob = std::log(probs[static_cast<std::size_t>(tr.action)]);
    const StepResult r = env.step(tr.qc);
    tr.reward = r.reward;
    tr.task = r.task;
    traj.steps.push_back(std::move(tr));
  }
  finalize_rewards(traj, env.sim().log());
  return traj;
}

/// Trajectory export in the episode-log schema, one record per decision.
inline std::string export_trajectory_jsonl(const Trajectory& traj) {
  std::string out;
  out += OrderedJson{{"schema", kLogSchema}, {"record", "trajectory"}, {"seed", traj.seed},
                     {"steps", traj.steps.size()}}
             .dump() +
         "\n";
  for (std::size_t t = 0; t < traj.steps.size(); ++t) {
    const auto& s = traj.steps[t];
    out += OrderedJson{{"record", "transition"},
                       {"t", t},
                       {"qc", s.qc},
                       {"task", {s.task.qc, s.task.order}},
                       {"preference", {s.preference[0], s.preference[1]}},
                       {"log_prob", s.log_prob},
                       {"r_idle", s.reward.idle},
                       {"r_dist", s.reward.dist}}
               .dump() +
           "\n";
  }
  if (traj.finalized)
    out += OrderedJson{{"record", "summary"}, {"idle_s", traj.objectives.idle_s}, {"empty_m", traj.objectives.empty_m}}
               .dump() +
           "\n";
  return out;
}

}  // namespace quaydeck

#endif  // QUAYDECK_ENV_HPP_
