#ifndef QUAYDECK_SIM_HPP_
#define QUAYDECK_SIM_HPP_

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "quaydeck/error.hpp"
#include "quaydeck/instance.hpp"
#include "quaydeck/json_util.hpp"
#include "quaydeck/rng.hpp"

namespace quaydeck {

inline constexpr double kTimeInit = 0.0;
inline constexpr double kUnset = -1.0;

enum class TruckStatus {
  Idle,
  TravelingEmpty,
  QueuedAtYard,
  ServicedAtYard,
  TravelingLoaded,
  QueuedAtQc,
  ServicedAtQc,
  TravelingToYardLoaded,
};

inline const char* to_string(TruckStatus s) {
  switch (s) {
    case TruckStatus::Idle: return "idle";
    case TruckStatus::TravelingEmpty: return "traveling_empty";
    case TruckStatus::QueuedAtYard: return "queued_at_yard";
    case TruckStatus::ServicedAtYard: return "serviced_at_yard";
    case TruckStatus::TravelingLoaded: return "traveling_loaded";
    case TruckStatus::QueuedAtQc: return "queued_at_qc";
    case TruckStatus::ServicedAtQc: return "serviced_at_qc";
    case TruckStatus::TravelingToYardLoaded: return "traveling_to_yard_loaded";
  }
  return "?";
}

struct TaskRef {
  int qc = -1;
  int order = -1;
  bool valid() const { return qc >= 0; }
  bool operator==(const TaskRef&) const = default;
};

struct TruckState {
  int id = 0;
  NodeId node = 0;          // current node, or the node last departed while traveling
  NodeId destination = -1;  // set while traveling
  double depart_time = 0.0;
  double arrive_time = 0.0;
  TruckStatus status = TruckStatus::Idle;
  std::optional<TaskRef> current_task;
  bool parked = false;  // idle with no work left anywhere

  bool traveling() const {
    return status == TruckStatus::TravelingEmpty || status == TruckStatus::TravelingLoaded ||
           status == TruckStatus::TravelingToYardLoaded;
  }
};

/// Timeline of one task. Every field is a raw timestamp or a sampled
/// duration; derived quantities (T, L, lambda, idle) are recomputed from these.
struct TaskRecord {
  int truck = -1;
  double dispatch_time = kUnset;  // D
  NodeId origin = -1;             // beta(D, v)
  double empty_distance = 0.0;    // delta(beta(D, v), f)
  double empty_travel = 0.0;      // tau(beta, f)
  double yard_arrival = kUnset;
  double yard_start = kUnset;
  double yard_end = kUnset;
  std::uint64_t yard_arrival_seq = 0;
  double loaded_travel = 0.0;  // tau(f, s)
  double qc_arrival = kUnset;  // D + T
  double qc_start = kUnset;    // D + T + L
  double qc_end = kUnset;      // D + T + L + O
  double completed = kUnset;   // truck released

  bool dispatched() const { return dispatch_time != kUnset; }
  bool done() const { return completed != kUnset; }
  /// T: empty leg, plus yard leg and lambda for loading tasks.
  double arrival_duration() const { return qc_arrival - dispatch_time; }
  double queue_wait() const { return qc_start - qc_arrival; }       // L
  double qc_service() const { return qc_end - qc_start; }          // O
  double yard_lambda() const { return yard_end - yard_arrival; }   // wait + service
};

struct DispatchRecord {
  TaskRef task;
  int truck = 0;
  double time = 0.0;
  NodeId origin = 0;
  double empty_distance = 0.0;
};

enum class LogEventKind { Request, Dispatch, Arrive, YardStart, YardDone, QcStart, QcDone, Park, End };

inline const char* to_string(LogEventKind k) {
  switch (k) {
    case LogEventKind::Request: return "request";
    case LogEventKind::Dispatch: return "dispatch";
    case LogEventKind::Arrive: return "arrive";
    case LogEventKind::YardStart: return "yard_start";
    case LogEventKind::YardDone: return "yard_done";
    case LogEventKind::QcStart: return "qc_start";
    case LogEventKind::QcDone: return "qc_done";
    case LogEventKind::Park: return "park";
    case LogEventKind::End: return "end";
  }
  return "?";
}

struct LogEvent {
  double time = 0.0;
  LogEventKind kind = LogEventKind::Request;
  int truck = -1;
  NodeId node = -1;
  TaskRef task;
  bool operator==(const LogEvent&) const = default;
};

/// Audit trail of one episode; both objectives are recomputed from it.
struct EpisodeLog {
  std::vector<DispatchRecord> dispatches;
  std::vector<std::vector<TaskRecord>> tasks;  // [qc][order]
  std::vector<LogEvent> events;
  double t_end = kUnset;
  bool finished = false;

  const TaskRecord& task(TaskRef r) const {
    return tasks[static_cast<std::size_t>(r.qc)][static_cast<std::size_t>(r.order)];
  }
};

/// The bi-objective cost vector: total QC idle seconds and total empty meters.
struct ObjectiveVector {
  double idle_s = 0.0;
  double empty_m = 0.0;
  bool operator==(const ObjectiveVector&) const = default;
};

/// Idle time the QC accrues waiting for task `order`: the gap between the
/// previous completion and this arrival, or the wait since T_init for the
/// first task. Requires the task's QC arrival (and its predecessor's
/// completion) to be logged.
inline double idle_contribution(const EpisodeLog& log, int qc, int order) {
  const auto& list = log.tasks[static_cast<std::size_t>(qc)];
  const TaskRecord& rec = list[static_cast<std::size_t>(order)];
  if (order == 0) return rec.qc_arrival - kTimeInit;
  const TaskRecord& prev = list[static_cast<std::size_t>(order - 1)];
  return std::max(rec.qc_arrival - prev.qc_end, 0.0);
}

/// Objective vector of a finished episode.
inline ObjectiveVector episode_objectives(const EpisodeLog& log) {
  if (!log.finished) throw ValidationError("episode log is incomplete");
  ObjectiveVector obj;
  for (std::size_t q = 0; q < log.tasks.size(); ++q) {
    for (std::size_t i = 0; i < log.tasks[q].size(); ++i) {
      const auto& rec = log.tasks[q][i];
      if (!rec.done() || rec.qc_end == kUnset) throw ValidationError("episode log is incomplete");
      obj.idle_s += idle_contribution(log, static_cast<int>(q), static_cast<int>(i));
    }
  }
  for (const auto& d : log.dispatches) obj.empty_m += d.empty_distance;
  return obj;
}

inline constexpr const char* kLogSchema = "quaydeck-log/1";

/// Line-delimited audit export: a header record, one record per event, one
/// per task timeline, and a closing summary.
inline std::string export_log_jsonl(const EpisodeLog& log) {
  std::string out;
  out += OrderedJson{{"schema", kLogSchema}, {"record", "header"}, {"t_end", log.t_end}}.dump() + "\n";
  for (const auto& e : log.events) {
    OrderedJson r{{"record", "event"}, {"t", e.time}, {"kind", to_string(e.kind)}};
    if (e.truck >= 0) r["truck"] = e.truck;
    if (e.node >= 0) r["node"] = e.node;
    if (e.task.valid()) r["task"] = {e.task.qc, e.task.order};
    out += r.dump() + "\n";
  }
  for (std::size_t q = 0; q < log.tasks.size(); ++q) {
    for (std::size_t i = 0; i < log.tasks[q].size(); ++i) {
      const auto& t = log.tasks[q][i];
      out += OrderedJson{{"record", "task"},     {"task", {q, i}},
                         {"truck", t.truck},     {"D", t.dispatch_time},
                         {"origin", t.origin},   {"empty_m", t.empty_distance},
                         {"empty_travel", t.empty_travel},
                         {"yard_arrival", t.yard_arrival}, {"yard_start", t.yard_start},
                         {"yard_end", t.yard_end},         {"loaded_travel", t.loaded_travel},
                         {"qc_arrival", t.qc_arrival},     {"qc_start", t.qc_start},
                         {"qc_end", t.qc_end},             {"completed", t.completed}}
                 .dump() +
             "\n";
    }
  }
  if (log.finished) {
    const auto obj = episode_objectives(log);
    out += OrderedJson{{"record", "summary"}, {"idle_s", obj.idle_s}, {"empty_m", obj.empty_m}}.dump() + "\n";
  }
  return out;
}

/// A truck asking for work at `clock`; `active_qcs` (ascending) are the QCs
/// whose lists still hold unassigned tasks.
struct DecisionPoint {
  int truck = 0;
  double clock = 0.0;
  std::vector<int> active_qcs;
};

/// Event-driven terminal simulator. Trucks move between nodes; each QC and
/// yard crane serves one truck at a time. Yards serve FCFS; a QC serves its
/// list strictly in order. Single-threaded; the instance is shared read-only.
class Simulator {
 public:
  Simulator(const TerminalInstance& inst, std::uint64_t seed)
      : inst_(&inst),
        seed_(seed),
        travel_rng_(make_rng(seed, "travel")),
        qc_rng_(make_rng(seed, "qc_service")),
        yard_rng_(make_rng(seed, "yard_service")) {
    inst.validate();
    trucks_.resize(static_cast<std::size_t>(inst.truck_count));
    for (int v = 0; v < inst.truck_count; ++v) {
      auto& t = trucks_[static_cast<std::size_t>(v)];
      t.id = v;
      t.node = inst.depot_node();
      t.status = TruckStatus::Idle;
    }
    qcs_.resize(static_cast<std::size_t>(inst.qc_count));
    yards_.resize(static_cast<std::size_t>(inst.yard_count));
    log_.tasks.resize(static_cast<std::size_t>(inst.qc_count));
    for (int q = 0; q < inst.qc_count; ++q) {
      log_.tasks[static_cast<std::size_t>(q)].resize(inst.task_lists[static_cast<std::size_t>(q)].size());
      unassigned_ += static_cast<int>(inst.task_lists[static_cast<std::size_t>(q)].size());
    }
    total_tasks_ = unassigned_;
    for (int v = 0; v < inst.truck_count; ++v) push_event(kTimeInit, EventKind::Request, v);
  }

  const TerminalInstance& instance() const { return *inst_; }
  std::uint64_t seed() const { return seed_; }
  double clock() const { return clock_; }
  bool done() const { return done_; }
  const EpisodeLog& log() const { return log_; }
  const std::vector<TruckState>& trucks() const { return trucks_; }
  const std::optional<DecisionPoint>& pending() const { return pending_; }

  int remaining_unassigned() const { return unassigned_; }
  int remaining_unassigned(int qc) const {
    const auto& list = inst_->task_lists[static_cast<std::size_t>(qc)];
    return static_cast<int>(list.size()) - qcs_[static_cast<std::size_t>(qc)].next_unassigned;
  }
  /// Next dispatchable task of a QC, if any.
  std::optional<TaskSpec> next_task(int qc) const {
    const auto& list = inst_->task_lists[static_cast<std::size_t>(qc)];
    const int i = qcs_[static_cast<std::size_t>(qc)].next_unassigned;
    if (i >= static_cast<int>(list.size())) return std::nullopt;
    return list[static_cast<std::size_t>(i)];
  }
  std::vector<int> active_qcs() const {
    std::vector<int> out;
    for (int q = 0; q < inst_->qc_count; ++q)
      if (remaining_unassigned(q) > 0) out.push_back(q);
    return out;
  }

  /// Advances until an idle truck needs work (returns the decision point) or
  /// every task is complete (returns nullopt; the log is then finished).
  std::optional<DecisionPoint> next_decision() {
    if (done_) throw InvalidAction("episode already finished");
    if (pending_) return pending_;
    while (!events_.empty()) {
      const Event ev = events_.top();
      events_.pop();
      clock_ = ev.time;
      switch (ev.kind) {
        case EventKind::QcDone: on_qc_done(ev.truck); break;
        case EventKind::YardDone: on_yard_done(ev.truck); break;
        case EventKind::Arrive: on_arrive(ev.truck); break;
        case EventKind::Request:
          if (on_request(ev.truck)) return pending_;
          break;
      }
    }
    if (completed_ != total_tasks_)
      throw InternalError("event queue drained with " + std::to_string(total_tasks_ - completed_) +
                          " tasks incomplete");
    done_ = true;
    log_.t_end = clock_;
    log_.finished = true;
    log_.events.push_back({clock_, LogEventKind::End, -1, -1, {}});
    return std::nullopt;
  }

  /// Assigns the first unassigned task of `qc` to the decision's truck and
  /// schedules its movement chain.
  void apply_dispatch(const DecisionPoint& dp, int qc) {
    if (!pending_ || pending_->truck != dp.truck || pending_->clock != dp.clock)
      throw InvalidAction("decision point is not current");
    if (qc < 0 || qc >= inst_->qc_count || remaining_unassigned(qc) <= 0)
      throw InvalidAction("QC " + std::to_string(qc) + " has no unassigned task");
    pending_.reset();

    auto& qs = qcs_[static_cast<std::size_t>(qc)];
    const TaskRef ref{qc, qs.next_unassigned++};
    --unassigned_;
    const TaskSpec& spec = inst_->task_lists[static_cast<std::size_t>(qc)][static_cast<std::size_t>(ref.order)];
    TaskRecord& rec = record(ref);
    if (rec.dispatched()) throw InternalError("task dispatched twice");

    TruckState& truck = trucks_[static_cast<std::size_t>(dp.truck)];
    const NodeId target = inst_->first_node(spec);
    rec.truck = dp.truck;
    rec.dispatch_time = clock_;
    rec.origin = truck.node;
    rec.empty_distance = distance(*inst_, truck.node, target);
    rec.empty_travel = travel_time(truck.node, target, inst_->dist.speed_empty);
    log_.dispatches.push_back({ref, dp.truck, clock_, truck.node, rec.empty_distance});
    log_.events.push_back({clock_, LogEventKind::Dispatch, dp.truck, truck.node, ref});

    truck.current_task = ref;
    start_leg(truck, target, TruckStatus::TravelingEmpty, rec.dispatch_time + rec.empty_travel);
  }

  /// Idle time accrued so far, per QC (tasks whose QC service has started).
  std::vector<double> idle_so_far() const {
    std::vector<double> out(static_cast<std::size_t>(inst_->qc_count), 0.0);
    for (int q = 0; q < inst_->qc_count; ++q) {
      const auto& list = log_.tasks[static_cast<std::size_t>(q)];
      for (std::size_t i = 0; i < list.size(); ++i) {
        if (list[i].qc_start == kUnset) break;
        out[static_cast<std::size_t>(q)] += idle_contribution(log_, q, static_cast<int>(i));
      }
    }
    return out;
  }

  double empty_distance_so_far() const {
    double s = 0.0;
    for (const auto& d : log_.dispatches) s += d.empty_distance;
    return s;
  }

  /// Trucks present at a QC (waiting or in service).
  int qc_queue_length(int qc) const {
    int n = 0;
    for (const auto& t : trucks_)
      if ((t.status == TruckStatus::QueuedAtQc || t.status == TruckStatus::ServicedAtQc) &&
          t.node == inst_->qc_node(qc))
        ++n;
    return n;
  }

  /// Trucks present at a yard (waiting or in service).
  int yard_queue_length(int yard) const {
    const auto& ys = yards_[static_cast<std::size_t>(yard)];
    return static_cast<int>(ys.waiting.size()) + (ys.busy ? 1 : 0);
  }

  /// Trucks whose current task belongs to `qc`.
  int working_trucks(int qc) const {
    int n = 0;
    for (const auto& t : trucks_)
      if (t.current_task && t.current_task->qc == qc) ++n;
    return n;
  }

  /// Trucks carrying a task of `qc` that have not yet reached its queue.
  int heading_trucks(int qc) const {
    int n = 0;
    for (const auto& t : trucks_) {
      if (!t.current_task || t.current_task->qc != qc) continue;
      if (record(*t.current_task).qc_arrival == kUnset) ++n;
    }
    return n;
  }

 private:
  enum class EventKind { QcDone = 0, YardDone = 1, Arrive = 2, Request = 3 };

  struct Event {
    double time;
    EventKind kind;
    int truck;
    std::uint64_t seq;
    // Min-heap on (time, kind, truck, seq).
    bool operator>(const Event& o) const {
      if (time != o.time) return time > o.time;
      if (kind != o.kind) return kind > o.kind;
      if (truck != o.truck) return truck > o.truck;
      return seq > o.seq;
    }
  };

  struct QcState {
    int next_unassigned = 0;
    int next_to_serve = 0;
    bool busy = false;
    std::map<int, int> waiting;  // order -> truck
  };

  struct YardState {
    bool busy = false;
    std::deque<int> waiting;
  };

  void push_event(double t, EventKind kind, int truck) {
    events_.push({t, kind, truck, next_seq_++});
  }

  TaskRecord& record(TaskRef r) {
    return log_.tasks[static_cast<std::size_t>(r.qc)][static_cast<std::size_t>(r.order)];
  }
  const TaskRecord& record(TaskRef r) const { return log_.task(r); }

  const TaskSpec& spec(TaskRef r) const {
    return inst_->task_lists[static_cast<std::size_t>(r.qc)][static_cast<std::size_t>(r.order)];
  }

  double travel_time(NodeId from, NodeId to, const TruncatedNormal& speed) {
    const double d = distance(*inst_, from, to);
    if (d == 0.0) return 0.0;
    double factor = 1.0;
    const auto& dest = inst_->nodes[static_cast<std::size_t>(to)];
    if (inst_->dist.congestion.enabled && dest.kind == NodeKind::Yard) {
      int inbound = 0;
      for (const auto& t : trucks_)
        if (t.traveling() && t.destination >= 0 &&
            inst_->nodes[static_cast<std::size_t>(t.destination)].kind == NodeKind::Yard &&
            inst_->nodes[static_cast<std::size_t>(t.destination)].x == dest.x)
          ++inbound;
      factor += inst_->dist.congestion.factor * inbound;
    }
    const double s = speed.sample(travel_rng_);
    return std::max(quantize_time(d / s * factor), kTimeQuantum);
  }

  double service_time(const TruncatedNormal& d, Rng& rng) {
    return std::max(quantize_time(d.sample(rng)), kTimeQuantum);
  }

  void start_leg(TruckState& truck, NodeId target, TruckStatus status, double arrive_at) {
    truck.status = status;
    truck.destination = target;
    truck.depart_time = clock_;
    truck.arrive_time = arrive_at;
    push_event(arrive_at, EventKind::Arrive, truck.id);
  }

  bool on_request(int v) {
    TruckState& truck = trucks_[static_cast<std::size_t>(v)];
    log_.events.push_back({clock_, LogEventKind::Request, v, truck.node, {}});
    if (unassigned_ == 0) {
      truck.parked = true;
      log_.events.push_back({clock_, LogEventKind::Park, v, truck.node, {}});
      return false;
    }
    pending_ = DecisionPoint{v, clock_, active_qcs()};
    return true;
  }

  void on_arrive(int v) {
    TruckState& truck = trucks_[static_cast<std::size_t>(v)];
    const TaskRef ref = *truck.current_task;
    TaskRecord& rec = record(ref);
    const TaskSpec& s = spec(ref);
    truck.node = truck.destination;
    truck.destination = -1;
    log_.events.push_back({clock_, LogEventKind::Arrive, v, truck.node, ref});
    const bool at_yard = inst_->nodes[static_cast<std::size_t>(truck.node)].kind == NodeKind::Yard;
    if (at_yard) {
      rec.yard_arrival = clock_;
      rec.yard_arrival_seq = next_seq_++;
      truck.status = TruckStatus::QueuedAtYard;
      auto& ys = yards_[static_cast<std::size_t>(s.yard_index)];
      ys.waiting.push_back(v);
      try_start_yard(s.yard_index);
    } else {
      rec.qc_arrival = clock_;
      truck.status = TruckStatus::QueuedAtQc;
      qcs_[static_cast<std::size_t>(ref.qc)].waiting.emplace(ref.order, v);
      try_start_qc(ref.qc);
    }
  }

  void try_start_yard(int yard) {
    auto& ys = yards_[static_cast<std::size_t>(yard)];
    if (ys.busy || ys.waiting.empty()) return;
    const int v = ys.waiting.front();
    ys.waiting.pop_front();
    ys.busy = true;
    TruckState& truck = trucks_[static_cast<std::size_t>(v)];
    TaskRecord& rec = record(*truck.current_task);
    truck.status = TruckStatus::ServicedAtYard;
    rec.yard_start = clock_;
    rec.yard_end = rec.yard_start + service_time(inst_->dist.yard_service, yard_rng_);
    log_.events.push_back({clock_, LogEventKind::YardStart, v, truck.node, *truck.current_task});
    push_event(rec.yard_end, EventKind::YardDone, v);
  }

  void try_start_qc(int qc) {
    auto& qs = qcs_[static_cast<std::size_t>(qc)];
    if (qs.busy) return;
    auto it = qs.waiting.find(qs.next_to_serve);
    if (it == qs.waiting.end()) return;
    const int v = it->second;
    qs.waiting.erase(it);
    qs.busy = true;
    TruckState& truck = trucks_[static_cast<std::size_t>(v)];
    TaskRecord& rec = record(*truck.current_task);
    truck.status = TruckStatus::ServicedAtQc;
    rec.qc_start = clock_;
    rec.qc_end = rec.qc_start + service_time(inst_->dist.qc_service, qc_rng_);
    log_.events.push_back({clock_, LogEventKind::QcStart, v, truck.node, *truck.current_task});
    push_event(rec.qc_end, EventKind::QcDone, v);
  }

  void on_yard_done(int v) {
    TruckState& truck = trucks_[static_cast<std::size_t>(v)];
    const TaskRef ref = *truck.current_task;
    TaskRecord& rec = record(ref);
    const TaskSpec& s = spec(ref);
    yards_[static_cast<std::size_t>(s.yard_index)].busy = false;
    log_.events.push_back({clock_, LogEventKind::YardDone, v, truck.node, ref});
    if (s.type == TaskType::Loading) {
      const NodeId qc_node = inst_->qc_node(ref.qc);
      rec.loaded_travel = travel_time(truck.node, qc_node, inst_->dist.speed_loaded);
      start_leg(truck, qc_node, TruckStatus::TravelingLoaded, rec.yard_end + rec.loaded_travel);
    } else {
      finish_task(truck, rec);
    }
    try_start_yard(s.yard_index);
  }

  void on_qc_done(int v) {
    TruckState& truck = trucks_[static_cast<std::size_t>(v)];
    const TaskRef ref = *truck.current_task;
    TaskRecord& rec = record(ref);
    const TaskSpec& s = spec(ref);
    auto& qs = qcs_[static_cast<std::size_t>(ref.qc)];
    qs.busy = false;
    ++qs.next_to_serve;
    log_.events.push_back({clock_, LogEventKind::QcDone, v, truck.node, ref});
    if (s.type == TaskType::Unloading) {
      const NodeId yard_node = inst_->yard_node(s.yard_index);
      rec.loaded_travel = travel_time(truck.node, yard_node, inst_->dist.speed_loaded);
      start_leg(truck, yard_node, TruckStatus::TravelingToYardLoaded, rec.qc_end + rec.loaded_travel);
    } else {
      finish_task(truck, rec);
    }
    try_start_qc(ref.qc);
  }

  void finish_task(TruckState& truck, TaskRecord& rec) {
    rec.completed = clock_;
    ++completed_;
    truck.status = TruckStatus::Idle;
    truck.current_task.reset();
    push_event(clock_, EventKind::Request, truck.id);
  }

  const TerminalInstance* inst_;
  std::uint64_t seed_;
  Rng travel_rng_;
  Rng qc_rng_;
  Rng yard_rng_;
  double clock_ = kTimeInit;
  std::priority_queue<Event, std::vector<Event>, std::greater<Event>> events_;
  std::uint64_t next_seq_ = 0;
  std::vector<TruckState> trucks_;
  std::vector<QcState> qcs_;
  std::vector<YardState> yards_;
  EpisodeLog log_;
  std::optional<DecisionPoint> pending_;
  int unassigned_ = 0;
  int total_tasks_ = 0;
  int completed_ = 0;
  bool done_ = false;
};

}  // namespace quaydeck

#endif  // QUAYDECK_SIM_HPP_
