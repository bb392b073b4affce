// quaydeck command-line entry point.

#include <csignal>
#include <iostream>

#include "CLI11.hpp"
#include "quaydeck/cli.hpp"
#include "quaydeck/service/server.hpp"

using namespace quaydeck;

namespace {

struct Common {
  std::string runs = "runs";
  std::string name;
};

void add_common(CLI::App* sub, Common& c, const std::string& default_name) {
  c.name = default_name;
  sub->add_option("--runs", c.runs, "Root directory for run directories");
  sub->add_option("--name", c.name, "Run name (directory suffix)");
}

service::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quaydeck: preference-conditioned truck dispatching workbench"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "TOML/INI config file ([command] sections); flags override it");
  app.require_subcommand(1);

  Common common;

  cli::GenArgs gen;
  auto* g = app.add_subcommand("gen", "Generate a terminal instance");
  add_common(g, common, "gen");
  g->add_option("--qcs", gen.qc_count, "Quay cranes");
  g->add_option("--yards", gen.yard_count, "Yard blocks");
  g->add_option("--tasks", gen.task_count, "Container tasks");
  g->add_option("--trucks", gen.truck_count, "Trucks");
  g->add_option("--seed", gen.seed, "Instance seed");

  cli::TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a preference-conditioned policy with PPO");
  add_common(t, common, "train");
  t->add_option("--instance", tr.instance, "Instance file (empty: desk instance from --instance-seed)");
  t->add_option("--instance-seed", tr.instance_seed, "Seed of the generated desk instance");
  t->add_option("--iterations,-K", tr.iterations, "Training iterations K");
  t->add_option("--episodes,-N", tr.episodes, "Episodes per iteration N");
  t->add_option("--epochs,-M", tr.epochs, "PPO epochs per iteration M");
  t->add_option("--batch,-B", tr.batch, "Minibatch size B");
  t->add_option("--clip", tr.clip, "PPO clip epsilon");
  t->add_option("--gamma", tr.gamma, "Discount factor");
  t->add_option("--prefs", tr.prefs, "Size of the evenly spaced training preference grid");
  t->add_option("--preference", tr.preference, "Train on one fixed preference 'p1,p2' instead of the grid");
  t->add_option("--lr", tr.lr, "Adam learning rate");
  t->add_option("--grad-clip", tr.grad_clip, "Global gradient-norm clip");
  t->add_option("--warmup", tr.warmup, "Random rollouts used to estimate objective scales");
  t->add_option("--seed", tr.seed, "Root training seed");
  t->add_option("--fusion", tr.fusion, "Preference fusion: hadamard or concat");
  t->add_option("--model", tr.model, "Model width");
  t->add_option("--heads", tr.heads, "Attention heads");
  t->add_option("--checkpoint-every", tr.checkpoint_every, "Write an intermediate checkpoint every n iterations (0: off)");
  t->add_option("--jobs", tr.jobs, "Worker threads (results do not depend on it)");

  cli::EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Evaluate a checkpoint over a preference grid");
  add_common(e, common, "eval");
  e->add_option("--checkpoint", ev.checkpoint, "Checkpoint file")->required();
  e->add_option("--instance", ev.instance, "Instance file (empty: desk instance from --instance-seed)");
  e->add_option("--instance-seed", ev.instance_seed, "Seed of the generated desk instance");
  e->add_option("--prefs", ev.prefs, "Number of evenly spaced preferences");
  e->add_option("--C", ev.C, "Rollouts per preference");
  e->add_option("--seed-base", ev.seed_base, "First rollout seed");
  e->add_option("--mode", ev.mode, "Action selection: greedy or sample");
  e->add_option("--anchors", ev.anchors, "Anchor table; calibrates each grid preference before evaluation");
  e->add_option("--label", ev.label, "Label written to the front table");
  e->add_option("--jobs", ev.jobs, "Worker threads (results do not depend on it)");

  cli::CalibrateArgs ca;
  auto* c = app.add_subcommand("calibrate", "Build a calibration anchor set for a checkpoint");
  add_common(c, common, "calibrate");
  c->add_option("--checkpoint", ca.checkpoint, "Checkpoint file")->required();
  c->add_option("--instance", ca.instance, "Instance file (empty: desk instance from --instance-seed)");
  c->add_option("--instance-seed", ca.instance_seed, "Seed of the generated desk instance");
  c->add_option("--prefs", ca.prefs, "Anchor grid size");
  c->add_option("--C", ca.C, "Rollouts per evaluation");
  c->add_option("--seed-base", ca.seed_base, "First rollout seed");
  c->add_option("--iterations", ca.iterations, "Calibration rounds");
  c->add_option("--direction", ca.direction, "Target direction: literal or reciprocal");
  c->add_option("--tol", ca.tol, "Stop once the worst misalignment (rad) is below this");
  c->add_option("--jobs", ca.jobs, "Worker threads (results do not depend on it)");

  cli::BaselineArgs ba;
  auto* b = app.add_subcommand("baseline", "Evolve GP dispatching rules with NSGA-II or MOEA/D");
  add_common(b, common, "baseline");
  b->add_option("algo", ba.algo, "nsga2 or moead")->check(CLI::IsMember({"nsga2", "moead"}));
  b->add_option("--instance", ba.instance, "Instance file (empty: desk instance from --instance-seed)");
  b->add_option("--instance-seed", ba.instance_seed, "Seed of the generated desk instance");
  b->add_option("--pop", ba.pop, "Population size");
  b->add_option("--generations", ba.generations, "Generations");
  b->add_option("--p-cross", ba.p_cross, "Crossover probability");
  b->add_option("--p-mut", ba.p_mut, "Mutation probability");
  b->add_option("--neighborhood", ba.neighborhood, "MOEA/D neighborhood size T");
  b->add_option("--max-depth", ba.max_depth, "Maximum tree depth");
  b->add_option("--C", ba.C, "Rollouts per fitness evaluation during evolution");
  b->add_option("--seed-base", ba.seed_base, "First rollout seed of the evolution seed pool");
  b->add_option("--final-C", ba.final_C, "Rollouts per rule for the returned front");
  b->add_option("--final-seed-base", ba.final_seed_base, "First rollout seed for the returned front");
  b->add_option("--seed", ba.seed, "Evolution seed");
  b->add_option("--jobs", ba.jobs, "Worker threads (results do not depend on it)");

  cli::MetricsArgs me;
  auto* m = app.add_subcommand("metrics", "Hypervolume and sparsity of fronts under a shared normalization");
  add_common(m, common, "metrics");
  m->add_option("--front", me.fronts, "Front table (repeatable)")->required();

  cli::PlotArgs pl;
  auto* p = app.add_subcommand("plot", "Scatter data (TSV + SVG) of fronts under a shared normalization");
  add_common(p, common, "plot");
  p->add_option("--front", pl.fronts, "Front table (repeatable)")->required();
  p->add_flag("--filtered", pl.filtered, "Plot only non-dominated points");

  std::string artifacts = "artifacts", host = "127.0.0.1";
  int port = 8080, serve_jobs = 1;
  auto* s = app.add_subcommand("serve", "Serve live steering sessions over HTTP");
  s->add_option("--artifacts", artifacts, "Directory of *.instance.json, *.ckpt and *.anchors.tsv files");
  s->add_option("--host", host, "Bind address");
  s->add_option("--port", port, "Port (0: any free port)");
  s->add_option("--jobs", serve_jobs, "Worker threads for Pareto sweeps");

  std::string manifest;
  int rerun_jobs = 0;
  auto* r = app.add_subcommand("rerun", "Re-execute a run from its manifest and compare outputs byte for byte");
  add_common(r, common, "rerun");
  r->add_option("manifest", manifest, "manifest.json of the original run")->required();
  r->add_option("--jobs", rerun_jobs, "Override the worker count (0: as recorded)");

  CLI11_PARSE(app, argc, argv);

  try {
    auto* sub = app.get_subcommands().front();
    const std::string cmd = sub->get_name();
    if (cmd == "serve") {
      auto store = std::make_shared<service::ArtifactStore>();
      store->load_directory(artifacts);
      service::Server server(std::make_shared<service::SessionManager>(store, serve_jobs));
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "serving " << store->checkpoint_ids().size() << " checkpoints on http://" << host << ":" << bound
                << "\n";
      server.listen_after_bind();
      return 0;
    }
    if (cmd == "rerun") {
      const auto rep = cli::rerun(manifest, common.runs, rerun_jobs, std::cerr);
      for (const auto& in : rep.changed_inputs) std::cerr << "input changed or missing: " << in << "\n";
      for (const auto& mm : rep.mismatches)
        std::cerr << "MISMATCH " << mm.file << ": " << mm.expected << " vs " << mm.actual << "\n";
      std::cout << rep.dir << "\n";
      if (!rep.mismatches.empty()) return 3;
      std::cerr << "all outputs byte-identical\n";
      return 0;
    }
    Json cfg;
    if (cmd == "gen") cfg = gen;
    else if (cmd == "train") cfg = tr;
    else if (cmd == "eval") cfg = ev;
    else if (cmd == "calibrate") cfg = ca;
    else if (cmd == "baseline") cfg = ba;
    else if (cmd == "metrics") cfg = me;
    else if (cmd == "plot") cfg = pl;
    std::cout << cli::execute(cmd, cfg, common.runs, common.name, std::cerr) << "\n";
    return 0;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  }
}
