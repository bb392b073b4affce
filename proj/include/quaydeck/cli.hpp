#ifndef QUAYDECK_CLI_HPP_
#define QUAYDECK_CLI_HPP_

#include <chrono>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "quaydeck/baselines/evolve.hpp"
#include "quaydeck/calib.hpp"
#include "quaydeck/plot.hpp"
#include "quaydeck/run.hpp"
#include "quaydeck/train.hpp"

namespace quaydeck::cli {

// ---- command configurations. Every field is a flag.

struct GenArgs {
  int qc_count = 4;
  int yard_count = 12;
  int task_count = 80;
  int truck_count = 10;
  std::uint64_t seed = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GenArgs, qc_count, yard_count, task_count, truck_count, seed)

struct TrainArgs {
  std::string instance;  // empty: desk instance generated from instance_seed
  std::uint64_t instance_seed = 1;
  int iterations = 5000;
  int episodes = 10;
  int epochs = 10;
  int batch = 32;
  double clip = 0.2;
  double gamma = 1.0;
  int prefs = 11;
  std::string preference;  // "p1,p2": train on this single preference only
  double lr = 3e-4;
  double grad_clip = 5.0;
  int warmup = 32;
  std::uint64_t seed = 1;
  std::string fusion = "hadamard";
  int model = 128;
  int heads = 8;
  int checkpoint_every = 0;
  int jobs = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainArgs, instance, instance_seed, iterations, episodes, epochs, batch,
                                                clip, gamma, prefs, preference, lr, grad_clip, warmup, seed, fusion,
                                                model, heads, checkpoint_every, jobs)

struct EvalArgs {
  std::string checkpoint;
  std::string instance;
  std::uint64_t instance_seed = 1;
  int prefs = 11;
  int C = 16;
  std::uint64_t seed_base = 1;
  std::string mode = "greedy";
  std::string anchors;  // calibrate each grid preference through this anchor set
  std::string label = "pamoo";
  int jobs = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(EvalArgs, checkpoint, instance, instance_seed, prefs, C, seed_base,
                                                mode, anchors, label, jobs)

struct CalibrateArgs {
  std::string checkpoint;
  std::string instance;
  std::uint64_t instance_seed = 1;
  int prefs = 11;
  int C = 16;
  std::uint64_t seed_base = 1;
  int iterations = 1;
  std::string direction = "literal";
  double tol = 1e-3;
  int jobs = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CalibrateArgs, checkpoint, instance, instance_seed, prefs, C,
                                                seed_base, iterations, direction, tol, jobs)

struct BaselineArgs {
  std::string algo = "nsga2";
  std::string instance;
  std::uint64_t instance_seed = 1;
  int pop = 100;
  int generations = 50;
  double p_cross = 0.5;
  double p_mut = 0.5;
  int neighborhood = 20;
  int max_depth = 6;
  int C = 4;
  std::uint64_t seed_base = 1000;
  int final_C = 16;
  std::uint64_t final_seed_base = 1;
  std::uint64_t seed = 1;
  int jobs = 1;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(BaselineArgs, algo, instance, instance_seed, pop, generations, p_cross,
                                                p_mut, neighborhood, max_depth, C, seed_base, final_C,
                                                final_seed_base, seed, jobs)

struct MetricsArgs {
  std::vector<std::string> fronts;
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(MetricsArgs, fronts)

struct PlotArgs {
  std::vector<std::string> fronts;
  bool filtered = false;  // plot only each file's non-dominated points
};
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PlotArgs, fronts, filtered)

// ---- helpers

inline TerminalInstance resolve_instance(const std::string& path, std::uint64_t seed, RunDir& run) {
  if (path.empty()) return generate_instance(desk_config(), seed);
  run.input("instance", path);
  return load_instance(path);
}

inline nn::Checkpoint resolve_checkpoint(const std::string& path, RunDir& run) {
  if (path.empty()) throw ConfigError("--checkpoint is required");
  run.input("checkpoint", path);
  return nn::load_checkpoint(path);
}

inline RolloutMode parse_mode(const std::string& m) {
  if (m == "greedy") return RolloutMode::Greedy;
  if (m == "sample") return RolloutMode::Sample;
  throw ConfigError("mode must be greedy or sample");
}

inline Preference parse_preference(const std::string& s) {
  const auto comma = s.find(',');
  if (comma == std::string::npos) throw ConfigError("preference must be 'p1,p2'");
  try {
    return check_simplex({std::stod(s.substr(0, comma)), std::stod(s.substr(comma + 1))});
  } catch (const std::invalid_argument&) {
    throw ConfigError("preference must be 'p1,p2'");
  }
}

inline PpoConfig ppo_config(const TrainArgs& a) {
  PpoConfig c;
  c.iterations = a.iterations;
  c.episodes_per_iter = a.episodes;
  c.epochs = a.epochs;
  c.batch_size = a.batch;
  c.clip = a.clip;
  c.gamma = a.gamma;
  c.preferences = a.preference.empty() ? preference_grid(a.prefs) : std::vector<Preference>{parse_preference(a.preference)};
  c.learning_rate = a.lr;
  c.grad_clip = a.grad_clip;
  c.warmup_rollouts = a.warmup;
  c.seed = a.seed;
  c.fusion = nn::parse_fusion(a.fusion);
  c.dims.model = a.model;
  c.dims.heads = a.heads;
  c.dims.pref_hidden = a.model;
  c.checkpoint_every = a.checkpoint_every;
  c.jobs = a.jobs;
  c.validate();
  return c;
}

// ---- commands

inline void run_gen(const GenArgs& a, RunDir& run, std::ostream& log) {
  GeneratorConfig g = desk_config();
  g.qc_count = a.qc_count;
  g.yard_count = a.yard_count;
  g.task_count = a.task_count;
  g.truck_count = a.truck_count;
  g.validate();
  const auto inst = generate_instance(g, a.seed);
  run.write("instance.json", serialize_instance(inst));
  log << "instance: " << inst.qc_count << " QCs, " << inst.total_tasks() << " tasks, " << inst.truck_count
      << " trucks\n";
}

inline void run_train(const TrainArgs& a, RunDir& run, std::ostream& log) {
  const auto cfg = ppo_config(a);
  const auto inst = resolve_instance(a.instance, a.instance_seed, run);
  run.write("instance.json", serialize_instance(inst));
  TrainHooks hooks;
  hooks.on_iteration = [&](const IterationRecord& r, double) {
    if (r.iteration % 10 == 0 || r.iteration + 1 == cfg.iterations)
      log << "iter " << r.iteration << " p=[" << r.preference[0] << "," << r.preference[1] << "] idle=" << r.mean_idle_s
          << " empty=" << r.mean_empty_m << " entropy=" << r.update.entropy << "\n";
  };
  hooks.on_checkpoint = [&](int it, const nn::Checkpoint& ck) {
    run.write("checkpoint-" + std::to_string(it) + ".ckpt", nn::serialize_checkpoint(ck));
  };
  const auto res = train(cfg, inst, hooks);
  run.write("checkpoint.ckpt", nn::serialize_checkpoint(res.checkpoint));
  run.write("train_log.jsonl", training_log_jsonl(res.log));
  double wall = 0.0;
  for (double w : res.wall_seconds) wall += w;
  run.timing("train_s", wall);
}

inline void run_eval(const EvalArgs& a, RunDir& run, std::ostream& log) {
  const auto ck = resolve_checkpoint(a.checkpoint, run);
  const auto inst = resolve_instance(a.instance, a.instance_seed, run);
  std::optional<AnchorSet> anchors;
  if (!a.anchors.empty()) {
    run.input("anchors", a.anchors);
    anchors = parse_anchors_tsv(quaydeck::detail::read_file(a.anchors));
  }
  const nn::NetPolicy pol(ck);
  const auto mode = parse_mode(a.mode);
  std::vector<PolicyPoint> pts;
  for (const auto& p : preference_grid(a.prefs)) {
    const Preference used = anchors ? calibrate(p, *anchors).preference : p;
    auto pt = evaluate_policy(pol, used, inst, a.C, a.seed_base, a.jobs, mode, a.label);
    pt.preference = p;
    pts.push_back(pt);
  }
  const auto front = pareto_filter(pts).points;
  run.write("points.tsv", export_front_tsv(pts, &inst, nullptr));
  run.write("front.tsv", export_front_tsv(front, &inst, nullptr));
  log << pts.size() << " points, " << front.size() << " non-dominated\n";
}

inline void run_calibrate(const CalibrateArgs& a, RunDir& run, std::ostream& log) {
  const auto ck = resolve_checkpoint(a.checkpoint, run);
  const auto inst = resolve_instance(a.instance, a.instance_seed, run);
  const nn::NetPolicy pol(ck);
  const auto build = build_anchor_set(
      [&](const Preference& p) { return evaluate_policy(pol, p, inst, a.C, a.seed_base, a.jobs).objectives; },
      preference_grid(a.prefs), a.iterations, parse_direction(a.direction), a.tol);
  run.write("anchors.tsv", export_anchors_tsv(build.set));
  std::string rounds;
  for (const auto& r : build.rounds) {
    OrderedJson cal = OrderedJson::array();
    for (const auto& p : r.calibrated) cal.push_back({p[0], p[1]});
    rounds += OrderedJson{{"round", r.round},
                          {"mean_misalignment", r.mean_misalignment},
                          {"max_misalignment", r.max_misalignment},
                          {"calibrated", cal}}
                  .dump() +
              "\n";
    log << "round " << r.round << " mean misalignment " << r.mean_misalignment << " rad\n";
  }
  run.write("calibration.jsonl", rounds);
}

inline void run_baseline(const BaselineArgs& a, RunDir& run, std::ostream& log) {
  const auto inst = resolve_instance(a.instance, a.instance_seed, run);
  baselines::EvalConfig ev{a.C, a.seed_base, a.final_C, a.final_seed_base, a.jobs};
  baselines::TreeLimits lim;
  lim.max_depth = a.max_depth;
  baselines::EvolutionResult res;
  if (a.algo == "nsga2") {
    baselines::Nsga2Config c;
    c.pop = a.pop;
    c.generations = a.generations;
    c.p_cross = a.p_cross;
    c.p_mut = a.p_mut;
    c.limits = lim;
    c.eval = ev;
    c.seed = a.seed;
    res = baselines::nsga2_run(c, inst);
  } else if (a.algo == "moead") {
    baselines::MoeadConfig c;
    c.pop = a.pop;
    c.generations = a.generations;
    c.neighborhood = a.neighborhood;
    c.p_cross = a.p_cross;
    c.p_mut = a.p_mut;
    c.limits = lim;
    c.eval = ev;
    c.seed = a.seed;
    res = baselines::moead_run(c, inst);
  } else {
    throw ConfigError("algo must be nsga2 or moead");
  }
  run.write("front.tsv", export_front_tsv(res.set.points, &inst, nullptr));
  std::ostringstream trees;
  trees << "idle_s\tempty_m\ttree\n";
  for (const auto& ind : res.front)
    trees << format_double(ind.fitness[0]) << '\t' << format_double(ind.fitness[1]) << '\t'
          << baselines::to_prefix(ind.tree) << '\n';
  run.write("trees.tsv", trees.str());
  std::string hist;
  for (const auto& g : res.history)
    hist += OrderedJson{{"generation", g.generation}, {"first_front", g.first_front}, {"best", {g.best[0], g.best[1]}}}
                .dump() +
            "\n";
  run.write("history.jsonl", hist);
  log << a.algo << ": " << res.front.size() << " rules on the final front\n";
}

inline std::vector<PolicyPoint> load_front(const std::string& path, RunDir& run) {
  run.input("front", path);
  auto pts = parse_front_tsv(quaydeck::detail::read_file(path));
  if (pts.empty()) throw ValidationError("front '" + path + "' has no points");
  return pts;
}

inline void run_metrics(const MetricsArgs& a, RunDir& run, std::ostream& log) {
  if (a.fronts.empty()) throw ConfigError("metrics needs at least one --front");
  std::vector<std::vector<PolicyPoint>> fronts;
  for (const auto& f : a.fronts) fronts.push_back(load_front(f, run));
  Bounds b;
  const auto m = compare_fronts(fronts, &b);
  std::ostringstream out;
  out << "# bounds\t" << format_double(b.min[0]) << '\t' << format_double(b.max[0]) << '\t' << format_double(b.min[1])
      << '\t' << format_double(b.max[1]) << '\n';
  out << "file\tlabel\tpoints\tfront_points\thypervolume\tsparsity\n";
  for (std::size_t i = 0; i < fronts.size(); ++i) {
    out << std::filesystem::path(a.fronts[i]).filename().string() << '\t' << fronts[i][0].label << '\t'
        << fronts[i].size() << '\t' << m[i].size << '\t' << format_double(m[i].hypervolume) << '\t'
        << format_double(m[i].sparsity) << '\n';
    log << a.fronts[i] << ": HV " << m[i].hypervolume << ", sparsity " << m[i].sparsity << "\n";
  }
  run.write("metrics.tsv", out.str());
}

inline void run_plot(const PlotArgs& a, RunDir& run, std::ostream&) {
  if (a.fronts.empty()) throw ConfigError("plot needs at least one --front");
  std::vector<PolicyPoint> all;
  for (const auto& f : a.fronts) {
    auto pts = load_front(f, run);
    if (a.filtered) pts = pareto_filter(pts).points;
    all.insert(all.end(), pts.begin(), pts.end());
  }
  const auto series = normalized_series(all);
  run.write("scatter.tsv", scatter_tsv(series));
  run.write("scatter.svg", scatter_svg(series));
}

inline const std::vector<std::string>& run_commands() {
  static const std::vector<std::string> c{"gen", "train", "eval", "calibrate", "baseline", "metrics", "plot"};
  return c;
}

/// Runs `command` with a JSON configuration in a fresh run directory and
/// returns the directory.
inline std::string execute(const std::string& command, const Json& config, const std::string& runs_root,
                           const std::string& name, std::ostream& log) {
  auto go = [&](auto args, auto fn) {
    RunDir run(runs_root, name, command, OrderedJson::parse(Json(args).dump()));
    try {
      fn(args, run, log);
    } catch (...) {
      std::error_code ec;
      std::filesystem::remove_all(run.dir(), ec);  // no half-written runs
      throw;
    }
    run.finish();
    return run.dir();
  };
  if (command == "gen") return go(config.get<GenArgs>(), run_gen);
  if (command == "train") return go(config.get<TrainArgs>(), run_train);
  if (command == "eval") return go(config.get<EvalArgs>(), run_eval);
  if (command == "calibrate") return go(config.get<CalibrateArgs>(), run_calibrate);
  if (command == "baseline") return go(config.get<BaselineArgs>(), run_baseline);
  if (command == "metrics") return go(config.get<MetricsArgs>(), run_metrics);
  if (command == "plot") return go(config.get<PlotArgs>(), run_plot);
  throw ConfigError("unknown command '" + command + "'");
}

struct RerunReport {
  std::string dir;
  std::vector<OutputMismatch> mismatches;
  std::vector<std::string> changed_inputs;
};

/// Re-executes a run from its manifest alone. `jobs` > 0 overrides the
/// worker count, which must not change any output.
inline RerunReport rerun(const std::string& manifest_path, const std::string& runs_root, int jobs, std::ostream& log) {
  const Json m = quaydeck::detail::parse_document(quaydeck::detail::read_file(manifest_path), "manifest");
  if (m.value("format", "") != kManifestFormat) throw ParseError("format", "not a " + std::string(kManifestFormat));
  RerunReport rep;
  for (const auto& in : m.at("inputs")) {
    const std::string p = in.at("path");
    if (!std::filesystem::exists(p) || file_sha1(p) != in.at("sha1").get<std::string>()) rep.changed_inputs.push_back(p);
  }
  Json cfg = m.at("config");
  if (jobs > 0 && cfg.contains("jobs")) cfg["jobs"] = jobs;
  const std::string orig = std::filesystem::path(manifest_path).parent_path().filename().string();
  const std::string name = orig.size() > 16 ? orig.substr(16) : orig;  // strip the timestamp
  rep.dir = execute(m.at("command"), cfg, runs_root, name + "-rerun", log);
  const Json again = quaydeck::detail::parse_document(quaydeck::detail::read_file(rep.dir + "/manifest.json"), "manifest");
  rep.mismatches = compare_outputs(m, again);
  return rep;
}

}  // namespace quaydeck::cli

#endif  // QUAYDECK_CLI_HPP_
