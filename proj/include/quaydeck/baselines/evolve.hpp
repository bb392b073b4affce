#ifndef QUAYDECK_BASELINES_EVOLVE_HPP_
#define QUAYDECK_BASELINES_EVOLVE_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "quaydeck/baselines/tree.hpp"
#include "quaydeck/moo.hpp"
#include "quaydeck/parallel.hpp"

namespace quaydeck::baselines {

/// How candidate rules are scored: greedy rollouts on a fixed seed pool.
struct EvalConfig {
  int C = 4;                     // seeds per fitness evaluation during evolution
  std::uint64_t seed_base = 1000;
  int final_C = 16;              // seeds for the returned front
  std::uint64_t final_seed_base = 1;
  int jobs = 1;
};

struct Individual {
  ExprTree tree;
  Objectives fitness{};
  int rank = 0;
  double crowding = 0.0;
  bool operator==(const Individual&) const = default;
};

struct GenerationRecord {
  int generation = 0;
  std::size_t first_front = 0;
  Objectives best{};  // componentwise best fitness in the population
};

struct EvolutionResult {
  std::vector<Individual> front;  // re-evaluated at final_C, non-dominated
  ParetoSet set;
  std::vector<GenerationRecord> history;
};

inline Objectives tree_fitness(const ExprTree& t, const TerminalInstance& inst, int C, std::uint64_t base) {
  return evaluate_policy(TreePolicy(t), {0.5, 0.5}, inst, C, base, 1, RolloutMode::Greedy).objectives;
}

inline void evaluate_all(std::vector<Individual>& pop, const TerminalInstance& inst, const EvalConfig& ev) {
  parallel_for(pop.size(), ev.jobs, [&](std::size_t i) { pop[i].fitness = tree_fitness(pop[i].tree, inst, ev.C, ev.seed_base); });
}

/// Re-evaluates the candidates at full C, Pareto-filters, and drops repeated
/// fitness vectors (first kept).
inline EvolutionResult finalize_front(std::vector<Individual> cands, const TerminalInstance& inst,
                                      const EvalConfig& ev, const std::string& label) {
  parallel_for(cands.size(), ev.jobs, [&](std::size_t i) {
    cands[i].fitness = tree_fitness(cands[i].tree, inst, ev.final_C, ev.final_seed_base);
  });
  std::vector<Objectives> f;
  for (const auto& c : cands) f.push_back(c.fitness);
  EvolutionResult out;
  for (std::size_t i : pareto_indices(f)) {
    out.front.push_back(cands[i]);
    out.set.points.push_back({{0.5, 0.5}, cands[i].fitness, label});
  }
  return out;
}

// ---- NSGA-II

/// Fast non-dominated sort. Returns fronts of indices; rank[i] is the front
/// index of i.
inline std::vector<std::vector<std::size_t>> fast_nondominated_sort(const std::vector<Objectives>& f,
                                                                    std::vector<int>* rank = nullptr) {
  const std::size_t n = f.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<int> count(n, 0), r(n, 0);
  std::vector<std::vector<std::size_t>> fronts(1);
  for (std::size_t p = 0; p < n; ++p) {
    for (std::size_t q = 0; q < n; ++q) {
      if (dominates(f[p], f[q])) dominated[p].push_back(q);
      else if (dominates(f[q], f[p])) ++count[p];
    }
    if (count[p] == 0) fronts[0].push_back(p);
  }
  for (std::size_t k = 0; !fronts[k].empty(); ++k) {
    std::vector<std::size_t> next;
    for (std::size_t p : fronts[k])
      for (std::size_t q : dominated[p])
        if (--count[q] == 0) {
          r[q] = static_cast<int>(k + 1);
          next.push_back(q);
        }
    std::sort(next.begin(), next.end());
    fronts.push_back(std::move(next));
  }
  fronts.pop_back();
  if (rank) *rank = r;
  return fronts;
}

/// Crowding distance within one front; extreme points get +inf.
inline std::vector<double> crowding_distance(const std::vector<Objectives>& f, const std::vector<std::size_t>& front) {
  const std::size_t m = front.size();
  std::vector<double> d(m, 0.0);
  if (m <= 2) {
    std::fill(d.begin(), d.end(), std::numeric_limits<double>::infinity());
    return d;
  }
  std::vector<std::size_t> order(m);
  for (std::size_t o = 0; o < 2; ++o) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return f[front[a]][o] < f[front[b]][o]; });
    const double lo = f[front[order.front()]][o], hi = f[front[order.back()]][o];
    d[order.front()] = d[order.back()] = std::numeric_limits<double>::infinity();
    if (hi == lo) continue;
    for (std::size_t k = 1; k + 1 < m; ++k)
      d[order[k]] += (f[front[order[k + 1]]][o] - f[front[order[k - 1]]][o]) / (hi - lo);
  }
  return d;
}

/// Lower rank wins, then larger crowding.
inline bool crowded_less(const Individual& a, const Individual& b) {
  return a.rank < b.rank || (a.rank == b.rank && a.crowding > b.crowding);
}

struct Nsga2Config {
  int pop = 100;
  int generations = 50;
  double p_cross = 0.5;
  double p_mut = 0.5;
  TreeLimits limits;
  EvalConfig eval;
  std::uint64_t seed = 1;

  void validate() const {
    if (pop < 2 || pop % 2 != 0) throw ConfigError("nsga2: pop must be even and >= 2");
    if (generations < 0) throw ConfigError("nsga2: generations must be >= 0");
    if (p_cross < 0 || p_cross > 1 || p_mut < 0 || p_mut > 1) throw ConfigError("nsga2: probabilities must be in [0, 1]");
    if (limits.max_depth < 1) throw ConfigError("max tree depth must be >= 1");
    if (eval.C < 1 || eval.final_C < 1) throw ConfigError("evaluation C must be >= 1");
  }
};

/// Assigns rank and crowding to every member.
inline std::vector<std::vector<std::size_t>> assign_rank_crowding(std::vector<Individual>& pop) {
  std::vector<Objectives> f;
  for (const auto& p : pop) f.push_back(p.fitness);
  auto fronts = fast_nondominated_sort(f);
  for (std::size_t k = 0; k < fronts.size(); ++k) {
    const auto d = crowding_distance(f, fronts[k]);
    for (std::size_t j = 0; j < fronts[k].size(); ++j) {
      pop[fronts[k][j]].rank = static_cast<int>(k);
      pop[fronts[k][j]].crowding = d[j];
    }
  }
  return fronts;
}

/// Elitist survivor selection of `n` members from a ranked pool.
inline std::vector<Individual> select_survivors(std::vector<Individual> pool, std::size_t n) {
  const auto fronts = assign_rank_crowding(pool);
  std::vector<Individual> out;
  for (const auto& fr : fronts) {
    if (out.size() + fr.size() <= n) {
      for (std::size_t i : fr) out.push_back(pool[i]);
      continue;
    }
    std::vector<std::size_t> last = fr;
    std::stable_sort(last.begin(), last.end(), [&](std::size_t a, std::size_t b) { return pool[a].crowding > pool[b].crowding; });
    for (std::size_t k = 0; out.size() < n; ++k) out.push_back(pool[last[k]]);
    break;
  }
  return out;
}

inline const Individual& binary_tournament(const std::vector<Individual>& pop, Rng& rng) {
  const auto& a = pop[uniform_index(rng, pop.size())];
  const auto& b = pop[uniform_index(rng, pop.size())];
  return crowded_less(b, a) ? b : a;
}

inline EvolutionResult nsga2_run(const Nsga2Config& cfg, const TerminalInstance& inst) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, "nsga2");
  const auto n = static_cast<std::size_t>(cfg.pop);
  std::vector<Individual> pop;
  for (auto& t : ramped_population(rng, n, cfg.limits)) pop.push_back({std::move(t), {}, 0, 0.0});
  evaluate_all(pop, inst, cfg.eval);
  assign_rank_crowding(pop);
  std::vector<GenerationRecord> history;
  auto record = [&](int g) {
    GenerationRecord r{g, 0, {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()}};
    for (const auto& p : pop) {
      if (p.rank == 0) ++r.first_front;
      r.best = {std::min(r.best[0], p.fitness[0]), std::min(r.best[1], p.fitness[1])};
    }
    history.push_back(r);
  };
  record(0);
  for (int g = 1; g <= cfg.generations; ++g) {
    std::vector<Individual> kids;
    while (kids.size() < n) {
      ExprTree a = binary_tournament(pop, rng).tree;
      ExprTree b = binary_tournament(pop, rng).tree;
      if (uniform01(rng) < cfg.p_cross) std::tie(a, b) = subtree_crossover(a, b, rng, cfg.limits);
      if (uniform01(rng) < cfg.p_mut) a = subtree_mutation(a, rng, cfg.limits);
      if (uniform01(rng) < cfg.p_mut) b = subtree_mutation(b, rng, cfg.limits);
      validate_tree(a, cfg.limits);
      validate_tree(b, cfg.limits);
      kids.push_back({std::move(a), {}, 0, 0.0});
      kids.push_back({std::move(b), {}, 0, 0.0});
    }
    evaluate_all(kids, inst, cfg.eval);
    std::vector<Individual> pool = pop;
    pool.insert(pool.end(), kids.begin(), kids.end());
    pop = select_survivors(std::move(pool), n);
    assign_rank_crowding(pop);
    record(g);
  }
  std::vector<Individual> first;
  for (const auto& p : pop)
    if (p.rank == 0) first.push_back(p);
  auto out = finalize_front(std::move(first), inst, cfg.eval, "nsga2");
  out.history = std::move(history);
  return out;
}

// ---- MOEA/D

/// Tchebycheff subproblem value max_j w_j |f_j - z_j| / scale_j.
inline double tchebycheff(const Objectives& f, const Preference& w, const Objectives& z, const Objectives& scale) {
  return std::max(w[0] * std::abs(f[0] - z[0]) / scale[0], w[1] * std::abs(f[1] - z[1]) / scale[1]);
}

/// Indices of the `t` weight vectors nearest to each weight (self first).
inline std::vector<std::vector<std::size_t>> weight_neighborhoods(const std::vector<Preference>& w, std::size_t t) {
  std::vector<std::vector<std::size_t>> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    std::vector<std::size_t> order(w.size());
    std::iota(order.begin(), order.end(), 0);
    auto dist = [&](std::size_t j) { return std::hypot(w[i][0] - w[j][0], w[i][1] - w[j][1]); };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });
    order.resize(std::min(t, w.size()));
    out[i] = std::move(order);
  }
  return out;
}

/// Adds `c` to a non-dominated archive unless dominated or a fitness repeat.
/// Returns true when the archive changed.
inline bool archive_insert(std::vector<Individual>& archive, const Individual& c) {
  for (const auto& a : archive)
    if (dominates(a.fitness, c.fitness) || a.fitness == c.fitness) return false;
  std::erase_if(archive, [&](const Individual& a) { return dominates(c.fitness, a.fitness); });
  archive.push_back(c);
  return true;
}

/// Replaces every neighbor slot whose subproblem value the child strictly
/// improves. Returns the replaced slots.
inline std::vector<std::size_t> replace_neighbors(std::vector<Individual>& pop, const Individual& child,
                                                  const std::vector<std::size_t>& hood,
                                                  const std::vector<Preference>& w, const Objectives& z,
                                                  const Objectives& scale) {
  std::vector<std::size_t> hit;
  for (std::size_t j : hood) {
    if (tchebycheff(child.fitness, w[j], z, scale) < tchebycheff(pop[j].fitness, w[j], z, scale)) {
      pop[j] = child;
      hit.push_back(j);
    }
  }
  return hit;
}

/// Per-objective spread of the population, used to put both objectives on a
/// comparable scale; a flat objective falls back to 1.
inline Objectives population_scale(const std::vector<Individual>& pop, const Objectives& z) {
  Objectives s{0, 0};
  for (const auto& p : pop)
    for (std::size_t o = 0; o < 2; ++o) s[o] = std::max(s[o], p.fitness[o] - z[o]);
  for (auto& v : s)
    if (!(v > 0)) v = 1.0;
  return s;
}

struct MoeadConfig {
  int pop = 100;
  int generations = 50;
  int neighborhood = 20;
  double p_cross = 0.5;
  double p_mut = 0.5;
  TreeLimits limits;
  EvalConfig eval;
  std::uint64_t seed = 1;

  void validate() const {
    if (pop < 2) throw ConfigError("moead: pop must be >= 2");
    if (generations < 0) throw ConfigError("moead: generations must be >= 0");
    if (neighborhood < 2) throw ConfigError("moead: neighborhood must be >= 2");
    if (p_cross < 0 || p_cross > 1 || p_mut < 0 || p_mut > 1) throw ConfigError("moead: probabilities must be in [0, 1]");
    if (limits.max_depth < 1) throw ConfigError("max tree depth must be >= 1");
    if (eval.C < 1 || eval.final_C < 1) throw ConfigError("evaluation C must be >= 1");
  }
};

/// Children of one generation are bred from the population at its start and
/// evaluated together; replacement then runs subproblem by subproblem.
inline EvolutionResult moead_run(const MoeadConfig& cfg, const TerminalInstance& inst,
                                 std::vector<std::vector<Individual>>* archive_trace = nullptr) {
  cfg.validate();
  Rng rng = make_rng(cfg.seed, "moead");
  const auto n = static_cast<std::size_t>(cfg.pop);
  const auto w = preference_grid(cfg.pop);
  const auto hood = weight_neighborhoods(w, static_cast<std::size_t>(cfg.neighborhood));
  std::vector<Individual> pop;
  for (auto& t : ramped_population(rng, n, cfg.limits)) pop.push_back({std::move(t), {}, 0, 0.0});
  evaluate_all(pop, inst, cfg.eval);
  Objectives z{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  std::vector<Individual> archive;
  for (const auto& p : pop) {
    z = {std::min(z[0], p.fitness[0]), std::min(z[1], p.fitness[1])};
    archive_insert(archive, p);
  }
  std::vector<GenerationRecord> history{{0, archive.size(), z}};
  if (archive_trace) archive_trace->push_back(archive);
  for (int g = 1; g <= cfg.generations; ++g) {
    std::vector<Individual> kids;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& h = hood[i];
      ExprTree a = pop[h[uniform_index(rng, h.size())]].tree;
      ExprTree b = pop[h[uniform_index(rng, h.size())]].tree;
      if (uniform01(rng) < cfg.p_cross) a = subtree_crossover(a, b, rng, cfg.limits).first;
      if (uniform01(rng) < cfg.p_mut) a = subtree_mutation(a, rng, cfg.limits);
      validate_tree(a, cfg.limits);
      kids.push_back({std::move(a), {}, 0, 0.0});
    }
    evaluate_all(kids, inst, cfg.eval);
    for (std::size_t i = 0; i < n; ++i) {
      z = {std::min(z[0], kids[i].fitness[0]), std::min(z[1], kids[i].fitness[1])};
      replace_neighbors(pop, kids[i], hood[i], w, z, population_scale(pop, z));
      archive_insert(archive, kids[i]);
    }
    history.push_back({g, archive.size(), z});
    if (archive_trace) archive_trace->push_back(archive);
  }
  auto out = finalize_front(archive, inst, cfg.eval, "moead");
  out.history = std::move(history);
  return out;
}

}  // namespace quaydeck::baselines

#endif  // QUAYDECK_BASELINES_EVOLVE_HPP_
