#ifndef QUAYDECK_TESTS_FIXTURES_HPP_
#define QUAYDECK_TESTS_FIXTURES_HPP_

#include <algorithm>
#include <string>
#include <tuple>
#include <vector>

#include "quaydeck/instance.hpp"
#include "quaydeck/rng.hpp"
#include "quaydeck/sim.hpp"

namespace quaydeck::fixtures {

/// Fixed-duration distribution (sd = 0 collapses to the mean).
inline TruncatedNormal constant(double v) { return {v, 0.0, v, v}; }

/// One QC at grid (4,0), one yard at (4,8), depot at (0,14), 10 m cells.
/// Empty speed 5 m/s, loaded 4 m/s, QC service 100 s, yard service 60 s.
/// depot->yard 100 m, depot->QC 180 m, yard<->QC 80 m.
inline TerminalInstance tiny_instance(TaskType type, int tasks, int trucks) {
  TerminalInstance inst;
  inst.qc_count = 1;
  inst.yard_count = 1;
  inst.truck_count = trucks;
  inst.cell_size_m = 10.0;
  inst.nodes = {{0, NodeKind::Qc, 0, 4, 0, YardClass::Import},
                {1, NodeKind::Yard, 0, 4, 8, YardClass::Export},
                {2, NodeKind::Depot, 0, 0, 14, YardClass::Import}};
  inst.task_lists.resize(1);
  for (int i = 0; i < tasks; ++i) inst.task_lists[0].push_back({0, i, type, 0});
  inst.dist.speed_empty = constant(5.0);
  inst.dist.speed_loaded = constant(4.0);
  inst.dist.qc_service = constant(100.0);
  inst.dist.yard_service = constant(60.0);
  inst.seed = 1;
  inst.validate();
  return inst;
}

/// Drives a simulator to completion, choosing the lowest active QC.
inline EpisodeLog run_lowest_qc(const TerminalInstance& inst, std::uint64_t seed) {
  Simulator sim(inst, seed);
  while (auto dp = sim.next_decision()) sim.apply_dispatch(*dp, dp->active_qcs.front());
  return sim.log();
}

/// Independent replay of crane queues from logged arrivals and sampled
/// durations. Returns an empty string when every logged start time equals
/// the recomputed one, otherwise a description of the first mismatch.
inline std::string replay_timeline_mismatch(const TerminalInstance& inst, const EpisodeLog& log) {
  // QCs: strict list order, start = max(arrival, previous completion).
  for (int q = 0; q < inst.qc_count; ++q) {
    const auto& list = log.tasks[static_cast<std::size_t>(q)];
    double prev_end = kTimeInit;
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& r = list[i];
      const double expect_start = i == 0 ? r.qc_arrival : std::max(r.qc_arrival, prev_end);
      if (r.qc_start != expect_start)
        return "qc " + std::to_string(q) + " task " + std::to_string(i) + " start mismatch";
      prev_end = r.qc_end;
    }
  }
  // Yards: FCFS by (arrival time, arrival sequence).
  std::vector<std::vector<const TaskRecord*>> visits(static_cast<std::size_t>(inst.yard_count));
  for (int q = 0; q < inst.qc_count; ++q)
    for (std::size_t i = 0; i < log.tasks[static_cast<std::size_t>(q)].size(); ++i) {
      const auto& r = log.tasks[static_cast<std::size_t>(q)][i];
      const int y = inst.task_lists[static_cast<std::size_t>(q)][i].yard_index;
      visits[static_cast<std::size_t>(y)].push_back(&r);
    }
  for (int y = 0; y < inst.yard_count; ++y) {
    auto& v = visits[static_cast<std::size_t>(y)];
    std::sort(v.begin(), v.end(), [](const TaskRecord* a, const TaskRecord* b) {
      return std::tie(a->yard_arrival, a->yard_arrival_seq) < std::tie(b->yard_arrival, b->yard_arrival_seq);
    });
    double free_at = kTimeInit;
    for (const TaskRecord* r : v) {
      const double expect = std::max(r->yard_arrival, free_at);
      if (r->yard_start != expect) return "yard " + std::to_string(y) + " FCFS start mismatch";
      free_at = r->yard_end;
    }
  }
  return {};
}

/// Drives a simulator to completion with a uniformly random active QC.
inline EpisodeLog run_random(const TerminalInstance& inst, std::uint64_t seed, std::uint64_t choice_seed) {
  Simulator sim(inst, seed);
  Rng rng(choice_seed);
  while (auto dp = sim.next_decision())
    sim.apply_dispatch(*dp, dp->active_qcs[uniform_index(rng, dp->active_qcs.size())]);
  return sim.log();
}

/// Travel, ordering and queue-wait constraints of a finished episode,
/// recomputed from raw timestamps, plus the crane replay above. Returns the
/// first violation or an empty string.
inline std::string constraint_violation(const TerminalInstance& inst, const EpisodeLog& log) {
  if (auto m = replay_timeline_mismatch(inst, log); !m.empty()) return m;
  if (static_cast<int>(log.dispatches.size()) != inst.total_tasks()) return "dispatch count";
  std::vector<std::vector<int>> seen(static_cast<std::size_t>(inst.qc_count));
  for (const auto& d : log.dispatches) seen[static_cast<std::size_t>(d.task.qc)].push_back(d.task.order);
  for (int q = 0; q < inst.qc_count; ++q) {
    const auto& list = log.tasks[static_cast<std::size_t>(q)];
    const std::string at = "qc " + std::to_string(q) + " task ";
    if (seen[static_cast<std::size_t>(q)].size() != list.size()) return at + "count";
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto& r = list[i];
      const std::string here = at + std::to_string(i) + ": ";
      if (seen[static_cast<std::size_t>(q)][i] != static_cast<int>(i)) return here + "dispatched out of order";
      if (!(r.dispatch_time <= r.qc_arrival && r.qc_arrival <= r.qc_start && r.qc_start <= r.qc_end))
        return here + "timestamps not ordered";
      const auto& spec = inst.task_lists[static_cast<std::size_t>(q)][i];
      const double expect_t =
          spec.type == TaskType::Loading ? r.empty_travel + r.yard_lambda() + r.loaded_travel : r.empty_travel;
      if (r.arrival_duration() != expect_t) return here + "arrival duration";
      if (i > 0) {
        const auto& p = list[i - 1];
        if (r.dispatch_time < p.dispatch_time) return here + "dispatch before predecessor";
        if (r.qc_start < p.qc_end) return here + "crane overlap";
        if (r.queue_wait() != std::max(p.qc_end - (r.dispatch_time + r.arrival_duration()), 0.0))
          return here + "queue wait";
      }
    }
  }
  return {};
}

}  // namespace quaydeck::fixtures

#endif  // QUAYDECK_TESTS_FIXTURES_HPP_
