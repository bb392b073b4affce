#ifndef QUAYDECK_SERVICE_SESSION_HPP_
#define QUAYDECK_SERVICE_SESSION_HPP_

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "quaydeck/calib.hpp"
#include "quaydeck/moo.hpp"
#include "quaydeck/nn/checkpoint.hpp"

namespace quaydeck::service {

inline constexpr const char* kApiSchema = "quaydeck-api/1";

// ---- artifacts

struct CheckpointArtifact {
  nn::Checkpoint checkpoint;
  std::optional<AnchorSet> anchors;
};

/// Named instances and checkpoints a session can be created from. Read-only
/// once the server starts.
class ArtifactStore {
 public:
  void add_instance(const std::string& id, TerminalInstance inst) {
    inst.validate();
    instances_[id] = std::make_shared<const TerminalInstance>(std::move(inst));
  }
  void add_checkpoint(const std::string& id, nn::Checkpoint ck, std::optional<AnchorSet> anchors = std::nullopt) {
    checkpoints_[id] = std::make_shared<const CheckpointArtifact>(CheckpointArtifact{std::move(ck), std::move(anchors)});
  }

  /// Loads `*.instance.json`, `*.ckpt` and `*.anchors.tsv` from `dir`; the id
  /// is the file name before the first dot. Anchors attach to the checkpoint
  /// with the same id.
  void load_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw NotFound("artifact directory '" + dir + "' not found");
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::map<std::string, AnchorSet> anchors;
    for (const auto& p : files) {
      const std::string name = p.filename().string();
      const std::string id = name.substr(0, name.find('.'));
      if (name.ends_with(".instance.json")) add_instance(id, load_instance(p.string()));
      else if (name.ends_with(".anchors.tsv")) anchors[id] = parse_anchors_tsv(quaydeck::detail::read_file(p.string()));
    }
    for (const auto& p : files) {
      const std::string name = p.filename().string();
      const std::string id = name.substr(0, name.find('.'));
      if (name.ends_with(".ckpt")) {
        auto it = anchors.find(id);
        add_checkpoint(id, nn::load_checkpoint(p.string()),
                       it == anchors.end() ? std::nullopt : std::optional<AnchorSet>(it->second));
      }
    }
  }

  std::shared_ptr<const TerminalInstance> instance(const std::string& id) const {
    auto it = instances_.find(id);
    if (it == instances_.end()) throw NotFound("unknown instance '" + id + "'");
    return it->second;
  }
  std::shared_ptr<const CheckpointArtifact> checkpoint(const std::string& id) const {
    auto it = checkpoints_.find(id);
    if (it == checkpoints_.end()) throw NotFound("unknown checkpoint '" + id + "'");
    return it->second;
  }
  std::vector<std::string> instance_ids() const { return keys(instances_); }
  std::vector<std::string> checkpoint_ids() const { return keys(checkpoints_); }

 private:
  template <typename M>
  static std::vector<std::string> keys(const M& m) {
    std::vector<std::string> out;
    for (const auto& [k, v] : m) out.push_back(k);
    return out;
  }
  std::map<std::string, std::shared_ptr<const TerminalInstance>> instances_;
  std::map<std::string, std::shared_ptr<const CheckpointArtifact>> checkpoints_;
};

// ---- frames

/// Append-only frame log with blocking readers. One producer (the session
/// worker), any number of subscribers.
class FrameHub {
 public:
  void publish(std::string frame, bool terminal) {
    {
      std::lock_guard lk(mu_);
      frames_.push_back(std::move(frame));
      closed_ = closed_ || terminal;
    }
    cv_.notify_all();
  }
  void close() {
    {
      std::lock_guard lk(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  /// Cursor positioned on the latest frame, so a new subscriber receives the
  /// current snapshot first.
  std::size_t subscribe() const {
    std::lock_guard lk(mu_);
    return frames_.empty() ? 0 : frames_.size() - 1;
  }

  /// Frame at `cursor`, waiting up to `timeout`. Empty when the hub is closed
  /// and drained or the wait timed out (check `closed()`).
  std::optional<std::string> next(std::size_t& cursor, std::chrono::milliseconds timeout) const {
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, timeout, [&] { return cursor < frames_.size() || closed_; });
    if (cursor < frames_.size()) return frames_[cursor++];
    return std::nullopt;
  }

  bool drained(std::size_t cursor) const {
    std::lock_guard lk(mu_);
    return closed_ && cursor >= frames_.size();
  }
  std::optional<std::string> latest() const {
    std::lock_guard lk(mu_);
    if (frames_.empty()) return std::nullopt;
    return frames_.back();
  }
  std::size_t size() const {
    std::lock_guard lk(mu_);
    return frames_.size();
  }

 private:
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
  std::vector<std::string> frames_;
  bool closed_ = false;
};

// ---- session

enum class Mode { Paused, Running, Step };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::Paused: return "paused";
    case Mode::Running: return "running";
    case Mode::Step: return "step";
  }
  return "?";
}

struct SessionSpec {
  std::string instance_id;
  std::string checkpoint_id;
  Preference preference{0.5, 0.5};
  std::uint64_t seed = 1;
  bool calibrate = false;
  RolloutMode action_mode = RolloutMode::Greedy;
};

struct DecisionInfo {
  std::size_t index = 0;  // 0-based decision count
  int truck = 0;
  int qc = 0;
  std::vector<int> candidates;
  std::vector<double> probabilities;
  Preference preference{};        // raw preference in force
  Preference preference_used{};   // fed to the network (calibrated when on)
  bool operator==(const DecisionInfo&) const = default;
};

struct PreferenceAck {
  std::size_t effective_from_decision = 0;
  std::uint64_t ack_seq = 0;  // frames after this seq see the new preference
  Preference preference{};
};

struct ControlCommand {
  enum Kind { Run, Pause, Step, Speed } kind = Pause;
  int n = 1;
  double speed = 0.0;
};

inline ControlCommand parse_control(const Json& j) {
  ControlCommand c;
  const std::string cmd = quaydeck::detail::member(j, "cmd", "control").get<std::string>();
  if (cmd == "run") c.kind = ControlCommand::Run;
  else if (cmd == "pause") c.kind = ControlCommand::Pause;
  else if (cmd == "step") {
    c.kind = ControlCommand::Step;
    c.n = j.value("n", 1);
    if (c.n < 1) throw ValidationError("step count must be >= 1");
  } else if (cmd == "speed") {
    c.kind = ControlCommand::Speed;
    c.speed = quaydeck::detail::member(j, "speed", "control").get<double>();
    if (!(c.speed >= 0.0) || !std::isfinite(c.speed)) throw ValidationError("speed must be finite and >= 0");
  } else {
    throw ValidationError("unknown control command '" + cmd + "'");
  }
  return c;
}

inline Json pref_json(const Preference& p) { return Json::array({p[0], p[1]}); }

/// One live episode. A worker thread owns the env and drains a command
/// queue, so every decision is computed under exactly one preference.
class Session {
 public:
  Session(std::string id, const ArtifactStore& store, const SessionSpec& spec)
      : id_(std::move(id)),
        spec_(spec),
        inst_(store.instance(spec.instance_id)),
        art_(store.checkpoint(spec.checkpoint_id)),
        policy_(art_->checkpoint),
        env_(*inst_, spec.seed, policy_.scales_for(*inst_)),
        action_rng_(make_rng(spec.seed, "action")),
        preference_(check_simplex(spec.preference)) {
    if (spec.calibrate && !art_->anchors) throw ValidationError("calibration requested but checkpoint has no anchor set");
    publish("snapshot", nullptr);
    worker_ = std::thread([this] { loop(); });
  }

  ~Session() {
    {
      std::lock_guard lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
    hub_.close();
  }

  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }
  const SessionSpec& spec() const { return spec_; }
  const FrameHub& hub() const { return hub_; }

  PreferenceAck set_preference(const Preference& p) {
    const Preference q = check_simplex(p);
    return submit<PreferenceAck>([this, q] {
      preference_ = q;
      return PreferenceAck{decisions_.size(), seq_, q};
    });
  }

  /// Returns the state frame after the mode transition.
  Json control(const ControlCommand& c) {
    return submit<Json>([this, c] {
      switch (c.kind) {
        case ControlCommand::Run:
          if (env_.done()) throw InvalidAction("episode is finished");
          mode_ = Mode::Running;
          steps_left_ = 0;
          break;
        case ControlCommand::Pause:
          mode_ = Mode::Paused;
          steps_left_ = 0;
          break;
        case ControlCommand::Step:
          if (env_.done()) throw InvalidAction("episode is finished");
          mode_ = Mode::Step;
          steps_left_ = c.n;
          break;
        case ControlCommand::Speed:
          speed_ = c.speed;
          break;
      }
      return state_json();
    });
  }

  Json state() {
    return submit<Json>([this] { return state_json(); });
  }

  /// Blocks until the session is paused or finished.
  void wait_idle() {
    submit<int>([] { return 0; });
    std::unique_lock lk(mu_);
    idle_cv_.wait(lk, [&] { return idle_; });
  }

  std::vector<DecisionInfo> decisions() {
    return submit<std::vector<DecisionInfo>>([this] { return decisions_; });
  }

 private:
  using Task = std::function<void()>;

  template <typename R, typename F>
  R submit(F&& f) {
    auto prom = std::make_shared<std::promise<R>>();
    auto fut = prom->get_future();
    {
      std::lock_guard lk(mu_);
      if (stop_) throw InvalidAction("session closed");
      queue_.push_back([prom, fn = std::forward<F>(f)]() mutable {
        try {
          prom->set_value(fn());
        } catch (...) {
          prom->set_exception(std::current_exception());
        }
      });
      idle_ = false;
    }
    cv_.notify_all();
    return fut.get();
  }

  bool active() const { return !env_.done() && (mode_ == Mode::Running || (mode_ == Mode::Step && steps_left_ > 0)); }

  void loop() {
    auto last_frame = std::chrono::steady_clock::now();
    for (;;) {
      std::deque<Task> batch;
      {
        std::unique_lock lk(mu_);
        if (queue_.empty() && !active()) {
          idle_ = true;
          idle_cv_.notify_all();
          cv_.wait(lk, [&] { return stop_ || !queue_.empty(); });
        }
        if (stop_) return;
        batch.swap(queue_);
      }
      for (auto& t : batch) t();
      if (!active()) continue;
      const double before = env_.sim().clock();
      decide();
      if (env_.done()) {
        mode_ = Mode::Paused;
        publish("terminal", nullptr);
      } else if (mode_ == Mode::Step && --steps_left_ == 0) {
        mode_ = Mode::Paused;
      }
      pace(env_.sim().clock() - before, last_frame);
    }
  }

  // Wall-clock pacing is advisory: sleep dt / speed, capped, waking early on
  // new commands. speed 0 means as fast as possible.
  void pace(double sim_dt, std::chrono::steady_clock::time_point& last_frame) {
    if (!(speed_ > 0.0) || mode_ != Mode::Running) return;
    const double wall = std::min(sim_dt / speed_, 1.0);
    std::unique_lock lk(mu_);
    cv_.wait_for(lk, std::chrono::duration<double>(wall), [&] { return stop_ || !queue_.empty(); });
    lk.unlock();
    const auto now = std::chrono::steady_clock::now();
    if (now - last_frame > std::chrono::seconds(1)) {
      publish("clock", nullptr);
      last_frame = now;
    }
  }

  void decide() {
    DecisionInfo d;
    d.index = decisions_.size();
    const auto& dp = env_.decision();
    const auto& f = env_.features();
    d.truck = dp.truck;
    d.candidates = f.qcs;
    d.preference = preference_;
    d.preference_used = spec_.calibrate ? calibrate(preference_, *art_->anchors).preference : preference_;
    d.probabilities = policy_.probabilities(f, d.preference_used);
    const int a = spec_.action_mode == RolloutMode::Greedy ? argmax_lowest(d.probabilities)
                                                           : sample_index(d.probabilities, action_rng_);
    d.qc = f.qcs[static_cast<std::size_t>(a)];
    env_.step(d.qc);
    decisions_.push_back(d);
    publish("decision", &decisions_.back());
  }

  Json state_json() const {
    auto latest = hub_.latest();
    Json j = latest ? Json::parse(*latest) : Json::object();
    j["mode"] = to_string(mode_);
    j["speed"] = speed_;
    j["steps_left"] = steps_left_;
    return j;
  }

  void publish(const char* kind, const DecisionInfo* d) {
    const auto& sim = env_.sim();
    const auto& inst = *inst_;
    Json f;
    f["schema"] = kApiSchema;
    f["session_id"] = id_;
    f["seq"] = ++seq_;
    f["kind"] = kind;
    f["clock"] = sim.clock();
    f["done"] = env_.done();
    f["mode"] = to_string(mode_);
    f["preference"] = pref_json(preference_);
    const auto idle = sim.idle_so_far();
    Json qcs = Json::array();
    for (int q = 0; q < inst.qc_count; ++q)
      qcs.push_back({{"qc", q},
                     {"queue", sim.qc_queue_length(q)},
                     {"remaining", sim.remaining_unassigned(q)},
                     {"idle_s", idle[static_cast<std::size_t>(q)]}});
    f["qcs"] = std::move(qcs);
    Json trucks = Json::array();
    for (const auto& t : sim.trucks()) {
      Json tj{{"truck", t.id}, {"node", t.node}, {"status", to_string(t.status)}};
      if (t.traveling()) {
        tj["destination"] = t.destination;
        tj["depart"] = t.depart_time;
        tj["arrive"] = t.arrive_time;
      }
      trucks.push_back(std::move(tj));
    }
    f["trucks"] = std::move(trucks);
    double idle_total = 0.0;
    for (double x : idle) idle_total += x;
    f["objectives"] = {{"idle_s", idle_total}, {"empty_m", sim.empty_distance_so_far()}};
    f["decisions"] = decisions_.size();
    if (d) {
      f["decision"] = {{"index", d->index},
                       {"truck", d->truck},
                       {"qc", d->qc},
                       {"candidates", d->candidates},
                       {"probabilities", d->probabilities},
                       {"preference", pref_json(d->preference)},
                       {"preference_used", pref_json(d->preference_used)}};
    }
    if (env_.done()) {
      const auto o = episode_objectives(sim.log());
      f["objectives"] = {{"idle_s", o.idle_s}, {"empty_m", o.empty_m}};
    }
    hub_.publish(f.dump(), env_.done() && std::string(kind) == "terminal");
  }

  std::string id_;
  SessionSpec spec_;
  std::shared_ptr<const TerminalInstance> inst_;
  std::shared_ptr<const CheckpointArtifact> art_;
  nn::NetPolicy policy_;
  Env env_;
  Rng action_rng_;

  // owned by the worker thread
  Preference preference_;
  Mode mode_ = Mode::Paused;
  int steps_left_ = 0;
  double speed_ = 0.0;
  std::uint64_t seq_ = 0;
  std::vector<DecisionInfo> decisions_;

  FrameHub hub_;
  std::mutex mu_;
  std::condition_variable cv_, idle_cv_;
  std::deque<Task> queue_;
  bool stop_ = false;
  bool idle_ = false;
  std::thread worker_;
};

/// Owns sessions and the cached Pareto sweeps.
class SessionManager {
 public:
  explicit SessionManager(std::shared_ptr<const ArtifactStore> store, int jobs = 1)
      : store_(std::move(store)), jobs_(jobs) {}

  std::shared_ptr<Session> create(const SessionSpec& spec) {
    std::string id;
    {
      std::lock_guard lk(mu_);
      id = "s" + std::to_string(++next_id_);
    }
    auto s = std::make_shared<Session>(id, *store_, spec);
    std::lock_guard lk(mu_);
    sessions_[id] = s;
    return s;
  }

  std::shared_ptr<Session> get(const std::string& id) const {
    std::lock_guard lk(mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
    return it->second;
  }

  void erase(const std::string& id) {
    std::shared_ptr<Session> s;
    {
      std::lock_guard lk(mu_);
      auto it = sessions_.find(id);
      if (it == sessions_.end()) throw NotFound("unknown session '" + id + "'");
      s = it->second;
      sessions_.erase(it);
    }
  }

  /// Front table of a checkpoint over an evenly spaced preference grid,
  /// greedy rollouts on seeds base..base+C-1. Cached per argument tuple.
  std::string pareto(const std::string& checkpoint_id, const std::string& instance_id, int grid, int C,
                     std::uint64_t base_seed) {
    const auto key = checkpoint_id + "|" + instance_id + "|" + std::to_string(grid) + "|" + std::to_string(C) + "|" +
                     std::to_string(base_seed);
    const auto art = store_->checkpoint(checkpoint_id);
    const auto inst = store_->instance(instance_id);
    if (C < 1 || C > 1024) throw ValidationError("C must be in [1, 1024]");
    if (grid < 2 || grid > 1001) throw ValidationError("grid must be in [2, 1001]");
    {
      std::lock_guard lk(mu_);
      if (auto it = pareto_cache_.find(key); it != pareto_cache_.end()) return it->second;
    }
    const nn::NetPolicy pol(art->checkpoint);
    std::vector<PolicyPoint> pts;
    for (const auto& p : preference_grid(grid))
      pts.push_back(evaluate_policy(pol, p, *inst, C, base_seed, jobs_, RolloutMode::Greedy, checkpoint_id));
    const std::string table = export_front_tsv(pts, inst.get(), nullptr);
    std::lock_guard lk(mu_);
    return pareto_cache_.emplace(key, table).first->second;
  }

  const ArtifactStore& store() const { return *store_; }

 private:
  std::shared_ptr<const ArtifactStore> store_;
  int jobs_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, std::string> pareto_cache_;
  std::uint64_t next_id_ = 0;
};

}  // namespace quaydeck::service

#endif  // QUAYDECK_SERVICE_SESSION_HPP_
