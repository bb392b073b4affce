#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>
#include <unistd.h>

#include "quaydeck/cli.hpp"

using namespace quaydeck;
namespace fs = std::filesystem;

namespace {

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::temp_directory_path() /
            ("quaydeck_cli_" + std::to_string(::getpid()) + "_" +
             ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(root_);
    fs::create_directories(root_);
  }
  void TearDown() override { fs::remove_all(root_); }

  std::string runs() const { return (root_ / "runs").string(); }
  std::string read(const std::string& dir, const std::string& f) const {
    return quaydeck::detail::read_file((fs::path(dir) / f).string());
  }

  std::string tiny_train(int jobs) {
    cli::TrainArgs a;
    a.iterations = 2;
    a.episodes = 2;
    a.epochs = 1;
    a.batch = 16;
    a.warmup = 2;
    a.model = 16;
    a.heads = 2;
    a.seed = 3;
    a.instance_seed = 5;
    a.checkpoint_every = 1;
    a.jobs = jobs;
    return cli::execute("train", Json(a), runs(), "tiny", log_);
  }

  fs::path root_;
  std::ostringstream log_;
};

int sh(const std::string& cmd) {
  const int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST(RunHashes, GitBlobSha1MatchesGit) {
  EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
}

TEST(CliArgs, JsonRoundTripKeepsDefaults) {
  cli::TrainArgs a;
  a.fusion = "concat";
  const auto b = Json(a).get<cli::TrainArgs>();
  EXPECT_EQ(b.fusion, "concat");
  EXPECT_EQ(b.iterations, 5000);
  const auto c = Json::parse(R"({"iterations": 7})").get<cli::TrainArgs>();
  EXPECT_EQ(c.iterations, 7);
  EXPECT_EQ(c.episodes, 10);
  EXPECT_THROW(cli::parse_preference("0.3"), ConfigError);
  EXPECT_THROW(cli::parse_preference("0.3,0.3"), ValidationError);
  EXPECT_EQ(cli::parse_preference("0.25,0.75"), (Preference{0.25, 0.75}));
}

TEST_F(CliTest, GenIsDeterministicAndManifested) {
  cli::GenArgs g;
  g.seed = 7;
  const auto d1 = cli::execute("gen", Json(g), runs(), "gen", log_);
  const auto d2 = cli::execute("gen", Json(g), runs(), "gen", log_);
  EXPECT_NE(d1, d2);
  EXPECT_EQ(read(d1, "instance.json"), read(d2, "instance.json"));
  EXPECT_EQ(serialize_instance(generate_instance(desk_config(), 7)), read(d1, "instance.json"));
  const Json m = Json::parse(read(d1, "manifest.json"));
  EXPECT_EQ(m["command"], "gen");
  EXPECT_EQ(m["config"]["seed"], 7);
  EXPECT_EQ(m["config_sha1"], git_blob_sha1(OrderedJson::parse(Json(g).dump()).dump()));
  ASSERT_EQ(m["outputs"].size(), 1u);
  EXPECT_EQ(m["outputs"][0]["sha1"], git_blob_sha1(read(d1, "instance.json")));
  EXPECT_TRUE(fs::exists(fs::path(d1) / "timing.json"));
  EXPECT_EQ(m.dump().find("total_s"), std::string::npos);
}

TEST_F(CliTest, UnknownCommandAndBadConfig) {
  EXPECT_THROW(cli::execute("nope", Json::object(), runs(), "x", log_), ConfigError);
  cli::EvalArgs e;
  EXPECT_THROW(cli::execute("eval", Json(e), runs(), "x", log_), ConfigError);
  e.checkpoint = (root_ / "missing.ckpt").string();
  EXPECT_ANY_THROW(cli::execute("eval", Json(e), runs(), "x", log_));
  EXPECT_TRUE(!fs::exists(runs()) || fs::is_empty(runs()));
}

TEST_F(CliTest, TrainEvalRerunByteIdentical) {
  const auto t1 = tiny_train(1);
  for (const char* f : {"checkpoint.ckpt", "checkpoint-1.ckpt", "train_log.jsonl", "instance.json"})
    EXPECT_TRUE(fs::exists(fs::path(t1) / f)) << f;

  auto rep = cli::rerun(t1 + "/manifest.json", runs(), 2, log_);
  EXPECT_TRUE(rep.mismatches.empty());
  EXPECT_TRUE(rep.changed_inputs.empty());
  EXPECT_EQ(read(t1, "checkpoint.ckpt"), read(rep.dir, "checkpoint.ckpt"));
  EXPECT_NE(rep.dir.find("tiny-rerun"), std::string::npos);

  cli::EvalArgs e;
  e.checkpoint = t1 + "/checkpoint.ckpt";
  e.instance = t1 + "/instance.json";
  e.C = 2;
  const auto ev = cli::execute("eval", Json(e), runs(), "ev", log_);
  const auto pts = parse_front_tsv(read(ev, "points.tsv"));
  ASSERT_EQ(pts.size(), 11u);
  EXPECT_EQ(pts[0].preference, (Preference{1.0, 0.0}));
  EXPECT_EQ(pts[0].label, "pamoo");

  // Oracle: the same sweep through the library.
  const auto ck = nn::load_checkpoint(e.checkpoint);
  const auto inst = load_instance(e.instance);
  const nn::NetPolicy pol(ck);
  const auto direct = evaluate_policy(pol, {0.5, 0.5}, inst, 2, 1, 1, RolloutMode::Greedy, "pamoo");
  EXPECT_EQ(pts[5].objectives, direct.objectives);
  std::vector<PolicyPoint> expect_front = pareto_filter(pts).points;
  EXPECT_EQ(parse_front_tsv(read(ev, "front.tsv")).size(), expect_front.size());

  const Json m = Json::parse(read(ev, "manifest.json"));
  ASSERT_EQ(m["inputs"].size(), 2u);
  EXPECT_EQ(m["inputs"][0]["sha1"], git_blob_sha1(read(t1, "checkpoint.ckpt")));

  rep = cli::rerun(ev + "/manifest.json", runs(), 3, log_);
  EXPECT_TRUE(rep.mismatches.empty());

  // A modified input is reported, and the rerun then differs.
  quaydeck::detail::write_file(t1 + "/instance.json", serialize_instance(generate_instance(desk_config(), 99)));
  rep = cli::rerun(ev + "/manifest.json", runs(), 0, log_);
  EXPECT_EQ(rep.changed_inputs.size(), 1u);
  EXPECT_FALSE(rep.mismatches.empty());
}

TEST_F(CliTest, MetricsUseUnionNormalization) {
  const std::vector<PolicyPoint> a{{{1, 0}, {100, 500}, "a"}, {{0, 1}, {300, 200}, "a"}};
  const std::vector<PolicyPoint> b{{{1, 0}, {50, 900}, "b"}, {{0, 1}, {400, 100}, "b"}};
  const auto fa = (root_ / "a.tsv").string(), fb = (root_ / "b.tsv").string();
  quaydeck::detail::write_file(fa, export_front_tsv(a));
  quaydeck::detail::write_file(fb, export_front_tsv(b));
  cli::MetricsArgs m;
  m.fronts = {fa, fb};
  const auto d = cli::execute("metrics", Json(m), runs(), "m", log_);
  const auto text = read(d, "metrics.tsv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "# bounds\t50\t400\t100\t900");

  // Oracle: hypervolume of a's normalized points against reference (1, 1).
  const double ax0 = (100 - 50) / 350.0, ay0 = (500 - 100) / 800.0;
  const double ax1 = (300 - 50) / 350.0, ay1 = (200 - 100) / 800.0;
  const double hv_a = (1 - ax0) * (1 - ay0) + (1 - ax1) * (ay0 - ay1);
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  std::getline(in, line);
  std::getline(in, line);
  std::istringstream row(line);
  std::string file, label, n, nf, hv;
  row >> file >> label >> n >> nf >> hv;
  EXPECT_EQ(file, "a.tsv");
  EXPECT_NEAR(std::stod(hv), hv_a, 1e-12);

  cli::PlotArgs p;
  p.fronts = {fa, fb};
  const auto pd = cli::execute("plot", Json(p), runs(), "p", log_);
  EXPECT_NE(read(pd, "scatter.svg").find("<svg"), std::string::npos);
  EXPECT_NE(read(pd, "scatter.tsv").find("b\t0\t1\n"), std::string::npos);
}

TEST_F(CliTest, BinaryEndToEnd) {
  const std::string bin = QUAYDECK_BIN;
  EXPECT_EQ(sh(bin + " --help"), 0);
  EXPECT_NE(sh(bin), 0);
  EXPECT_NE(sh(bin + " train --iterations abc"), 0);
  EXPECT_NE(sh(bin + " eval --runs " + runs() + " --checkpoint /nonexistent.ckpt"), 0);
  ASSERT_EQ(sh(bin + " gen --seed 7 --runs " + runs() + " --name g1"), 0);
  ASSERT_EQ(sh(bin + " gen --seed 7 --runs " + runs() + " --name g2"), 0);
  std::vector<std::string> dirs;
  for (const auto& e : fs::directory_iterator(runs())) dirs.push_back(e.path().string());
  ASSERT_EQ(dirs.size(), 2u);
  EXPECT_EQ(read(dirs[0], "instance.json"), read(dirs[1], "instance.json"));
  EXPECT_EQ(sh(bin + " rerun " + dirs[0] + "/manifest.json --runs " + runs()), 0);

  const auto cfg = (root_ / "gen.toml").string();
  quaydeck::detail::write_file(cfg, "[gen]\nseed = 11\nname = \"fromcfg\"\nruns = \"" + runs() + "\"\n");
  ASSERT_EQ(sh(bin + " --config " + cfg + " gen"), 0);
  bool found = false;
  for (const auto& e : fs::directory_iterator(runs()))
    if (e.path().filename().string().ends_with("-fromcfg")) {
      found = true;
      EXPECT_EQ(read(e.path().string(), "instance.json"), serialize_instance(generate_instance(desk_config(), 11)));
    }
  EXPECT_TRUE(found);
}
