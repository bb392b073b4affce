#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "quaydeck/sim.hpp"

using namespace quaydeck;
using quaydeck::fixtures::replay_timeline_mismatch;
using quaydeck::fixtures::run_lowest_qc;
using quaydeck::fixtures::run_random;
using quaydeck::fixtures::tiny_instance;

TEST(InitEpisode, AllTrucksAtDepot) {
  const auto inst = generate_instance(desk_config(), 5);
  Simulator sim(inst, 1);
  EXPECT_EQ(sim.clock(), 0.0);
  for (const auto& t : sim.trucks()) {
    EXPECT_EQ(t.node, inst.depot_node());
    EXPECT_EQ(t.status, TruckStatus::Idle);
    EXPECT_FALSE(t.current_task.has_value());
  }
}

TEST(InitEpisode, FirstDecisionIsTruckZeroAtTimeZero) {
  const auto inst = generate_instance(desk_config(), 5);
  Simulator sim(inst, 1);
  auto dp = sim.next_decision();
  ASSERT_TRUE(dp);
  EXPECT_EQ(dp->truck, 0);
  EXPECT_EQ(dp->clock, 0.0);
  EXPECT_EQ(dp->active_qcs.size(), 4u);
}

TEST(InitEpisode, InitialRequestsInTruckIdOrder) {
  const auto inst = generate_instance(desk_config(), 5);
  Simulator sim(inst, 1);
  for (int v = 0; v < inst.truck_count; ++v) {
    auto dp = sim.next_decision();
    ASSERT_TRUE(dp);
    EXPECT_EQ(dp->truck, v);
    EXPECT_EQ(dp->clock, 0.0);
    sim.apply_dispatch(*dp, dp->active_qcs[static_cast<std::size_t>(v) % dp->active_qcs.size()]);
  }
}

TEST(InitEpisode, ZeroTaskInstanceIsImmediatelyDone) {
  auto inst = tiny_instance(TaskType::Loading, 0, 1);
  Simulator sim(inst, 1);
  EXPECT_FALSE(sim.next_decision().has_value());
  EXPECT_TRUE(sim.done());
  EXPECT_EQ(episode_objectives(sim.log()), (ObjectiveVector{0.0, 0.0}));
}

TEST(InitEpisode, SeededDeterminism) {
  const auto inst = generate_instance(desk_config(), 5);
  const auto a = run_random(inst, 42, 7);
  const auto b = run_random(inst, 42, 7);
  EXPECT_EQ(a.events, b.events);
  EXPECT_EQ(export_log_jsonl(a), export_log_jsonl(b));
}

// Two loading tasks, two trucks, both from the depot (hand-traced):
//   t=0   both dispatched, empty leg 100 m / 5 m/s = 20 s
//   t=20  both reach the yard; truck 0 served 20..80, truck 1 waits, 80..140
//   t=100 truck 0 at QC (80 m / 4 m/s), served 100..200
//   t=160 truck 1 at QC, queues until 200 (L = 40), served 200..300
TEST(HandTraced, TwoLoadingTasksTwoTrucks) {
  const auto inst = tiny_instance(TaskType::Loading, 2, 2);
  const auto log = run_lowest_qc(inst, 3);
  const auto& t0 = log.tasks[0][0];
  const auto& t1 = log.tasks[0][1];
  EXPECT_EQ(t0.truck, 0);
  EXPECT_EQ(t1.truck, 1);
  EXPECT_EQ(t0.empty_distance, 100.0);
  EXPECT_EQ(t0.yard_start, 20.0);
  EXPECT_EQ(t1.yard_start, 80.0);
  EXPECT_EQ(t0.arrival_duration(), 100.0);
  EXPECT_EQ(t1.arrival_duration(), 160.0);
  EXPECT_EQ(t1.yard_lambda(), 120.0);
  EXPECT_EQ(t0.queue_wait(), 0.0);
  EXPECT_EQ(t1.queue_wait(), 40.0);
  EXPECT_EQ(t1.qc_start, 200.0);
  EXPECT_EQ(log.t_end, 300.0);
  const auto obj = episode_objectives(log);
  EXPECT_EQ(obj.idle_s, 100.0);  // first arrival at 100, second queued
  EXPECT_EQ(obj.empty_m, 200.0);
  EXPECT_EQ(replay_timeline_mismatch(inst, log), "");
}

// Two unloading tasks, one truck: the second arrival comes after the first
// completion, so L = 0 and the QC idles 232 - 136 = 96 s.
//   t=0    depot -> QC 180 m / 5 = 36 s, served 36..136
//   t=136  loaded to yard 80 m / 4 = 20 s, served 156..216, idle at yard
//   t=216  yard -> QC 80 m / 5 = 16 s, arrives 232, served 232..332
//   t=332  to yard, 352..412
TEST(HandTraced, LateArrivalHasZeroQueueWait) {
  const auto inst = tiny_instance(TaskType::Unloading, 2, 1);
  const auto log = run_lowest_qc(inst, 3);
  const auto& t1 = log.tasks[0][1];
  EXPECT_EQ(t1.dispatch_time, 216.0);
  EXPECT_EQ(t1.qc_arrival, 232.0);
  EXPECT_EQ(t1.queue_wait(), 0.0);
  EXPECT_EQ(log.t_end, 412.0);
  const auto obj = episode_objectives(log);
  EXPECT_EQ(obj.idle_s, 36.0 + 96.0);
  EXPECT_EQ(obj.empty_m, 180.0 + 80.0);
}

TEST(HandTraced, BackToBackWithTruckWaitingHasNoGapIdle) {
  // Three loading tasks, three trucks: each later truck waits at the QC.
  const auto inst = tiny_instance(TaskType::Loading, 3, 3);
  const auto log = run_lowest_qc(inst, 3);
  EXPECT_EQ(idle_contribution(log, 0, 1), 0.0);
  EXPECT_EQ(idle_contribution(log, 0, 2), 0.0);
}

TEST(NextDecision, RunsEventsToCompletionBeforeDone) {
  const auto inst = tiny_instance(TaskType::Loading, 2, 2);
  Simulator sim(inst, 3);
  int decisions = 0;
  while (auto dp = sim.next_decision()) {
    ++decisions;
    sim.apply_dispatch(*dp, 0);
  }
  EXPECT_EQ(decisions, 2);
  EXPECT_EQ(sim.log().t_end, 300.0);
  for (const auto& t : sim.log().tasks[0]) EXPECT_TRUE(t.done());
}

TEST(NextDecision, TEndBoundsEveryTimestamp) {
  const auto inst = generate_instance(desk_config(), 2);
  const auto log = run_random(inst, 9, 9);
  for (const auto& e : log.events) EXPECT_LE(e.time, log.t_end);
  for (const auto& list : log.tasks)
    for (const auto& t : list) EXPECT_LE(t.completed, log.t_end);
}

TEST(NextDecision, CannotAdvancePastDone) {
  const auto inst = tiny_instance(TaskType::Loading, 1, 1);
  Simulator sim(inst, 3);
  while (auto dp = sim.next_decision()) sim.apply_dispatch(*dp, 0);
  EXPECT_THROW(sim.next_decision(), InvalidAction);
}

TEST(ApplyDispatch, ForcedChoiceLogsEmptyLeg) {
  const auto inst = tiny_instance(TaskType::Loading, 1, 1);
  Simulator sim(inst, 3);
  auto dp = sim.next_decision();
  ASSERT_TRUE(dp);
  ASSERT_EQ(dp->active_qcs, std::vector<int>{0});
  sim.apply_dispatch(*dp, 0);
  ASSERT_EQ(sim.log().dispatches.size(), 1u);
  EXPECT_EQ(sim.log().dispatches[0].empty_distance, distance(inst, inst.depot_node(), inst.yard_node(0)));
  EXPECT_EQ(sim.log().dispatches[0].task, (TaskRef{0, 0}));
}

TEST(ApplyDispatch, EmptyQcIsInvalid) {
  auto inst = tiny_instance(TaskType::Loading, 1, 1);
  Simulator sim(inst, 3);
  auto dp = sim.next_decision();
  EXPECT_THROW(sim.apply_dispatch(*dp, 1), InvalidAction);
  sim.apply_dispatch(*dp, 0);
  EXPECT_THROW(sim.apply_dispatch(*dp, 0), InvalidAction);
}

TEST(ApplyDispatch, QcWithExhaustedListIsInvalid) {
  GeneratorConfig cfg = desk_config();
  cfg.qc_count = 2;
  cfg.task_count = 3;
  cfg.truck_count = 3;
  const auto inst = generate_instance(cfg, 4);
  Simulator sim(inst, 1);
  // QC 1 holds a single task.
  auto dp = sim.next_decision();
  sim.apply_dispatch(*dp, 1);
  dp = sim.next_decision();
  EXPECT_EQ(dp->active_qcs, std::vector<int>{0});
  EXPECT_THROW(sim.apply_dispatch(*dp, 1), InvalidAction);
}

// Idle and queue accounting plus yard FCFS, recomputed from raw timestamps.
TEST(SimInvariants, RandomEpisodesSatisfyConstraints) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    GeneratorConfig cfg = desk_config();
    cfg.dist.congestion.enabled = (s % 3 == 0);
    const auto inst = generate_instance(cfg, s);
    const auto log = run_random(inst, 100 + s, 200 + s);
    EXPECT_EQ(fixtures::constraint_violation(inst, log), "") << "seed " << s;
  }
}

TEST(SimInvariants, CheckerCatchesTamperedLogs) {
  const auto inst = generate_instance(desk_config(), 3);
  const auto log = run_random(inst, 1, 2);
  auto a = log;
  a.tasks[0][1].qc_start += 1.0;
  EXPECT_NE(fixtures::constraint_violation(inst, a), "");
  auto b = log;
  b.tasks[1][2].empty_travel += 0.5;
  EXPECT_NE(fixtures::constraint_violation(inst, b), "");
  auto c = log;
  std::swap(c.dispatches[0], c.dispatches[5]);
  EXPECT_NE(fixtures::constraint_violation(inst, c), "");
}

TEST(EpisodeObjectives, IncompleteLogRejected) {
  const auto inst = tiny_instance(TaskType::Loading, 2, 2);
  Simulator sim(inst, 3);
  auto dp = sim.next_decision();
  sim.apply_dispatch(*dp, 0);
  EXPECT_THROW(episode_objectives(sim.log()), ValidationError);
}

TEST(EpisodeLogExport, HasSchemaHeaderAndSummary) {
  const auto inst = tiny_instance(TaskType::Loading, 2, 2);
  const auto text = export_log_jsonl(run_lowest_qc(inst, 3));
  const auto first = Json::parse(text.substr(0, text.find('\n')));
  EXPECT_EQ(first["schema"], kLogSchema);
  const auto last_nl = text.rfind('\n', text.size() - 2);
  const auto last = Json::parse(text.substr(last_nl + 1));
  EXPECT_EQ(last["record"], "summary");
  EXPECT_EQ(last["idle_s"].get<double>(), 100.0);
}
