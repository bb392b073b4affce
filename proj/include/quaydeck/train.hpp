#ifndef QUAYDECK_TRAIN_HPP_
#define QUAYDECK_TRAIN_HPP_

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "quaydeck/env.hpp"
#include "quaydeck/json_util.hpp"
#include "quaydeck/nn/checkpoint.hpp"
#include "quaydeck/nn/network.hpp"
#include "quaydeck/parallel.hpp"
#include "quaydeck/rng.hpp"

namespace quaydeck {

inline constexpr const char* kTrainLogSchema = "quaydeck-train/1";

struct PpoConfig {
  int iterations = 5000;       // K
  int episodes_per_iter = 10;  // N
  int epochs = 10;             // M
  int batch_size = 32;         // B
  double clip = 0.2;           // epsilon
  double gamma = 1.0;
  std::vector<Preference> preferences = preference_grid(11);
  double learning_rate = 3e-4;
  double grad_clip = 5.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::array<double, 2> objective_scales{0.0, 0.0};  // <= 0: estimate by warm-up
  std::array<double, 2> z_star{0.0, 0.0};
  int warmup_rollouts = 32;
  int checkpoint_every = 0;  // 0: only at the end
  std::uint64_t seed = 1;
  nn::NetDims dims;
  nn::FusionMode fusion = nn::FusionMode::Hadamard;
  int jobs = 1;

  void validate() const {
    if (iterations < 1 || episodes_per_iter < 1 || epochs < 1 || batch_size < 1)
      throw ConfigError("iterations, episodes, epochs and batch size must be >= 1");
    if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("clip epsilon must lie in (0, 1)");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("discount must lie in (0, 1]");
    if (preferences.empty()) throw ConfigError("preference set is empty");
    for (const auto& p : preferences) check_simplex(p);
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(grad_clip > 0.0)) throw ConfigError("gradient clip must be positive");
    if (warmup_rollouts < 1) throw ConfigError("warm-up needs at least one rollout");
    if (jobs < 1) throw ConfigError("jobs must be >= 1");
    dims.validate();
  }

  OrderedJson to_json() const {
    OrderedJson prefs = OrderedJson::array();
    for (const auto& p : preferences) prefs.push_back({p[0], p[1]});
    return {{"iterations", iterations},
            {"episodes_per_iter", episodes_per_iter},
            {"epochs", epochs},
            {"batch_size", batch_size},
            {"clip", clip},
            {"gamma", gamma},
            {"preferences", prefs},
            {"learning_rate", learning_rate},
            {"grad_clip", grad_clip},
            {"objective_scales", {objective_scales[0], objective_scales[1]}},
            {"z_star", {z_star[0], z_star[1]}},
            {"warmup_rollouts", warmup_rollouts},
            {"seed", seed},
            {"fusion_mode", nn::to_string(fusion)},
            {"dims", nn::detail::dims_to_json(dims)}};
  }
};

/// Weighted Tchebycheff value of one step, negated so larger is better.
inline double scalarize_step(const Preference& p, const RewardVector& r, const std::array<double, 2>& z_star,
                             const std::array<double, 2>& scales) {
  if (!(scales[0] > 0.0 && scales[1] > 0.0)) throw ConfigError("objective scales must be positive");
  const double o0 = -r.idle / scales[0];
  const double o1 = -r.dist / scales[1];
  return -std::max(p[0] * std::abs(o0 - z_star[0]), p[1] * std::abs(o1 - z_star[1]));
}

inline double episode_return(const Trajectory& traj, const Preference& p, double gamma,
                             const std::array<double, 2>& z_star, const std::array<double, 2>& scales) {
  if (!traj.finalized) throw ValidationError("trajectory rewards are not finalized");
  double total = 0.0;
  double disc = 1.0;
  for (const auto& s : traj.steps) {
    total += disc * scalarize_step(p, s.reward, z_star, scales);
    disc *= gamma;
  }
  return total;
}

/// Shared-baseline advantages: A_k = R_k - mean(R).
inline std::vector<double> advantages(const std::vector<double>& returns) {
  if (returns.empty()) throw ValidationError("no returns");
  const double mean = std::accumulate(returns.begin(), returns.end(), 0.0) / static_cast<double>(returns.size());
  std::vector<double> a(returns.size());
  for (std::size_t k = 0; k < returns.size(); ++k) a[k] = returns[k] - mean;
  return a;
}

struct AdamState {
  nn::PolicyParams m, v;
  long long t = 0;
  explicit AdamState(const nn::PolicyParams& p) : m(nn::zeros_like(p)), v(nn::zeros_like(p)) {}
};

/// One Adam descent step on `grad`.
inline void adam_step(nn::PolicyParams& params, const nn::PolicyParams& grad, AdamState& st, const PpoConfig& cfg) {
  ++st.t;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(st.t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(st.t));
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    auto& w = params.tensors[i].values;
    const auto& g = grad.tensors[i].values;
    auto& m = st.m.tensors[i].values;
    auto& v = st.v.tensors[i].values;
    for (std::size_t k = 0; k < w.size(); ++k) {
      m[k] = b1 * m[k] + (1.0 - b1) * g[k];
      v[k] = b2 * v[k] + (1.0 - b2) * g[k] * g[k];
      w[k] -= cfg.learning_rate * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.adam_eps);
    }
  }
}

inline double grad_norm(const nn::PolicyParams& g) {
  double s = 0.0;
  for (const auto& t : g.tensors)
    for (double x : t.values) s += x * x;
  return std::sqrt(s);
}

struct UpdateStats {
  double loss = 0.0;         // mean of -surrogate over mini-batches
  double ratio_mean = 0.0;
  double first_ratio_max_dev = 0.0;  // max |ratio - 1| on the very first mini-batch
  double clip_fraction = 0.0;
  double entropy = 0.0;  // mean policy entropy over records, first epoch
  double grad_norm = 0.0;
  int minibatches = 0;
  bool aborted = false;
  std::string diagnostic;
};

/// Record (episode k, step t) pairs of a set of trajectories.
struct RecordRef {
  int episode = 0;
  int step = 0;
};

/// Clipped-surrogate value and logit gradient of one mini-batch.
struct SurrogateEval {
  double objective = 0.0;  // mean of min(r A, clip(r) A)
  std::vector<double> ratios;
  int clipped = 0;
  double entropy = 0.0;
};

inline SurrogateEval surrogate_batch(const nn::PolicyParams& params, const std::vector<Trajectory>& trajs,
                                     const std::vector<double>& adv, const std::vector<RecordRef>& batch, double clip,
                                     nn::PolicyParams* grad) {
  std::vector<const StateFeatures*> states;
  std::vector<Preference> prefs;
  states.reserve(batch.size());
  prefs.reserve(batch.size());
  for (const auto& r : batch) {
    const auto& tr = trajs[static_cast<std::size_t>(r.episode)].steps[static_cast<std::size_t>(r.step)];
    states.push_back(&tr.features);
    prefs.push_back(tr.preference);
  }
  const auto T = nn::forward_batch(params, states, prefs);
  SurrogateEval out;
  Eigen::VectorXd dl = Eigen::VectorXd::Zero(T.total_rows());
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t j = 0; j < batch.size(); ++j) {
    const auto& tr = trajs[static_cast<std::size_t>(batch[j].episode)].steps[static_cast<std::size_t>(batch[j].step)];
    const double A = adv[static_cast<std::size_t>(batch[j].episode)];
    const int b = static_cast<int>(j);
    const double ratio = std::exp(T.log_prob(b, tr.action) - tr.log_prob);
    const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
    out.objective += std::min(ratio * A, clipped * A) * inv;
    out.ratios.push_back(ratio);
    const bool active = A >= 0.0 ? ratio <= 1.0 + clip : ratio >= 1.0 - clip;
    if (!active) ++out.clipped;
    const int o = T.offsets[j];
    for (int i = 0; i < T.rows_of(b); ++i) {
      const double q = T.probs[o + i];
      if (q > 0.0) out.entropy -= q * std::log(q) * inv;
    }
    if (grad && active) {
      // Loss is -objective; d(ratio)/d(logits) = ratio * (onehot - probs).
      const double c = -A * ratio * inv;
      for (int i = 0; i < T.rows_of(b); ++i) dl[o + i] -= c * T.probs[o + i];
      dl[o + tr.action] += c;
    }
  }
  if (grad) nn::backward_logits(params, T, dl, *grad);
  return out;
}

/// M epochs of shuffled mini-batch ascent on the clipped surrogate.
inline UpdateStats ppo_update(nn::PolicyParams& params, AdamState& adam, const std::vector<Trajectory>& trajs,
                              const std::vector<double>& adv, const PpoConfig& cfg, Rng& shuffle_rng) {
  if (trajs.size() != adv.size()) throw ValidationError("one advantage per trajectory required");
  std::vector<RecordRef> records;
  for (std::size_t k = 0; k < trajs.size(); ++k)
    for (std::size_t t = 0; t < trajs[k].steps.size(); ++t) records.push_back({static_cast<int>(k), static_cast<int>(t)});
  UpdateStats st;
  if (records.empty()) return st;
  const std::size_t B = static_cast<std::size_t>(cfg.batch_size);
  std::size_t ratio_count = 0, clipped = 0;
  double entropy_sum = 0.0;
  std::size_t entropy_batches = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(records.begin(), records.end(), shuffle_rng);
    for (std::size_t start = 0; start < records.size(); start += B) {
      const std::vector<RecordRef> batch(records.begin() + static_cast<std::ptrdiff_t>(start),
                                         records.begin() + static_cast<std::ptrdiff_t>(std::min(start + B, records.size())));
      auto grad = nn::zeros_like(params);
      const auto ev = surrogate_batch(params, trajs, adv, batch, cfg.clip, &grad);
      if (!std::isfinite(ev.objective)) {
        st.aborted = true;
        st.diagnostic = "non-finite surrogate at epoch " + std::to_string(epoch) + ", record " + std::to_string(start);
        return st;
      }
      if (st.minibatches == 0)
        for (double r : ev.ratios) st.first_ratio_max_dev = std::max(st.first_ratio_max_dev, std::abs(r - 1.0));
      for (double r : ev.ratios) st.ratio_mean += r;
      ratio_count += ev.ratios.size();
      clipped += static_cast<std::size_t>(ev.clipped);
      if (epoch == 0) {
        entropy_sum += ev.entropy * static_cast<double>(batch.size());
        entropy_batches += batch.size();
      }
      const double gn = grad_norm(grad);
      if (!std::isfinite(gn)) {
        st.aborted = true;
        st.diagnostic = "non-finite gradient at epoch " + std::to_string(epoch);
        return st;
      }
      if (gn > cfg.grad_clip)
        for (auto& t : grad.tensors)
          for (double& x : t.values) x *= cfg.grad_clip / gn;
      adam_step(params, grad, adam, cfg);
      st.loss += -ev.objective;
      st.grad_norm += gn;
      ++st.minibatches;
    }
  }
  st.loss /= st.minibatches;
  st.grad_norm /= st.minibatches;
  st.ratio_mean /= static_cast<double>(ratio_count);
  st.clip_fraction = static_cast<double>(clipped) / static_cast<double>(ratio_count);
  st.entropy = entropy_sum / static_cast<double>(entropy_batches);
  return st;
}

/// Mean per-step cost of each objective under the uniform-random policy.
inline std::array<double, 2> estimate_objective_scales(const TerminalInstance& inst, int rollouts, std::uint64_t seed,
                                                       int jobs = 1) {
  UniformRandomPolicy random;
  std::vector<Trajectory> trajs(static_cast<std::size_t>(rollouts));
  parallel_for(trajs.size(), jobs, [&](std::size_t i) {
    trajs[i] = rollout(random, inst, {0.5, 0.5}, derive_seed(seed, static_cast<std::uint64_t>(i)), RolloutMode::Sample);
  });
  double idle = 0.0, dist = 0.0, steps = 0.0;
  for (const auto& t : trajs) {
    idle += t.objectives.idle_s;
    dist += t.objectives.empty_m;
    steps += static_cast<double>(t.steps.size());
  }
  if (steps == 0.0) return {1.0, 1.0};
  return {idle > 0.0 ? idle / steps : 1.0, dist > 0.0 ? dist / steps : 1.0};
}

struct IterationRecord {
  int iteration = 0;
  Preference preference{};
  double mean_idle_s = 0.0;
  double mean_empty_m = 0.0;
  double mean_return = 0.0;
  double advantage_sum = 0.0;
  UpdateStats update;

  OrderedJson to_json() const {
    OrderedJson j = {{"schema", kTrainLogSchema},
                     {"iteration", iteration},
                     {"preference", {preference[0], preference[1]}},
                     {"mean_idle_s", mean_idle_s},
                     {"mean_empty_m", mean_empty_m},
                     {"mean_return", mean_return},
                     {"advantage_sum", advantage_sum},
                     {"loss", update.loss},
                     {"entropy", update.entropy},
                     {"ratio_mean", update.ratio_mean},
                     {"first_ratio_max_dev", update.first_ratio_max_dev},
                     {"clip_fraction", update.clip_fraction},
                     {"grad_norm", update.grad_norm},
                     {"aborted", update.aborted}};
    if (update.aborted) j["diagnostic"] = update.diagnostic;
    return j;
  }
};

struct TrainResult {
  nn::Checkpoint checkpoint;
  std::vector<IterationRecord> log;
  std::vector<double> wall_seconds;  // per iteration; kept out of the deterministic log
};

struct TrainHooks {
  std::function<void(const IterationRecord&, double wall_s)> on_iteration;
  std::function<void(int iteration, const nn::Checkpoint&)> on_checkpoint;
};

inline std::uint64_t episode_seed(std::uint64_t root, int iteration, int episode, int per_iter) {
  return derive_seed(derive_seed(root, "episodes"),
                     static_cast<std::uint64_t>(iteration) * static_cast<std::uint64_t>(per_iter) +
                         static_cast<std::uint64_t>(episode));
}

/// Preference-conditioned PPO over the preference set of `cfg`.
inline TrainResult train(const PpoConfig& cfg, const TerminalInstance& inst, const TrainHooks& hooks = {}) {
  cfg.validate();
  inst.validate();
  const std::uint64_t root = cfg.seed;
  TrainResult res;
  nn::Checkpoint& ck = res.checkpoint;
  ck.params = nn::init_params(derive_seed(root, "params"), cfg.dims, cfg.fusion);
  ck.feature_scales = feature_scales_for(inst);
  ck.objective_scales = cfg.objective_scales;
  if (!(ck.objective_scales[0] > 0.0 && ck.objective_scales[1] > 0.0))
    ck.objective_scales = estimate_objective_scales(inst, cfg.warmup_rollouts, derive_seed(root, "warmup"), cfg.jobs);
  ck.meta = {{"trainer", kTrainLogSchema}, {"config", cfg.to_json()}, {"instance_seed", inst.seed}};

  AdamState adam(ck.params);
  Rng pref_rng = make_rng(root, "preference");
  Rng shuffle_rng = make_rng(root, "shuffle");
  const auto N = static_cast<std::size_t>(cfg.episodes_per_iter);
  for (int it = 0; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.iteration = it;
    rec.preference = cfg.preferences[uniform_index(pref_rng, cfg.preferences.size())];
    const nn::NetPolicy policy(ck.params, ck.feature_scales);
    std::vector<Trajectory> trajs(N);
    parallel_for(N, cfg.jobs, [&](std::size_t k) {
      trajs[k] = rollout(policy, inst, rec.preference, episode_seed(root, it, static_cast<int>(k), cfg.episodes_per_iter),
                         RolloutMode::Sample);
    });
    std::vector<double> returns(N);
    for (std::size_t k = 0; k < N; ++k) {
      returns[k] = episode_return(trajs[k], rec.preference, cfg.gamma, cfg.z_star, ck.objective_scales);
      rec.mean_idle_s += trajs[k].objectives.idle_s / static_cast<double>(N);
      rec.mean_empty_m += trajs[k].objectives.empty_m / static_cast<double>(N);
      rec.mean_return += returns[k] / static_cast<double>(N);
    }
    const auto adv = advantages(returns);
    rec.advantage_sum = std::accumulate(adv.begin(), adv.end(), 0.0);
    nn::PolicyParams next = ck.params;
    AdamState next_adam = adam;
    rec.update = ppo_update(next, next_adam, trajs, adv, cfg, shuffle_rng);
    if (!rec.update.aborted) {
      ck.params = std::move(next);
      adam = std::move(next_adam);
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    ck.meta["iterations_done"] = it + 1;
    res.log.push_back(rec);
    res.wall_seconds.push_back(wall);
    if (hooks.on_iteration) hooks.on_iteration(rec, wall);
    if (hooks.on_checkpoint && cfg.checkpoint_every > 0 && (it + 1) % cfg.checkpoint_every == 0 &&
        it + 1 < cfg.iterations)
      hooks.on_checkpoint(it + 1, ck);
  }
  return res;
}

inline std::string training_log_jsonl(const std::vector<IterationRecord>& log) {
  std::string out;
  for (const auto& r : log) out += r.to_json().dump() + "\n";
  return out;
}

}  // namespace quaydeck

#endif  // QUAYDECK_TRAIN_HPP_
