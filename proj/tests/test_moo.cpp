#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "moo_fixtures.hpp"
#include "quaydeck/moo.hpp"

using namespace quaydeck;
using namespace quaydeck::fixtures;

TEST(Dominates, Cases) {
  EXPECT_TRUE(dominates(Objectives{1, 1}, Objectives{2, 2}));
  EXPECT_FALSE(dominates(Objectives{1, 2}, Objectives{2, 1}));
  EXPECT_FALSE(dominates(Objectives{2, 1}, Objectives{1, 2}));
  EXPECT_FALSE(dominates(Objectives{3, 3}, Objectives{3, 3}));
  EXPECT_TRUE(dominates(Objectives{3, 2}, Objectives{3, 3}));
  EXPECT_TRUE(dominates(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 4}));
  EXPECT_THROW(dominates(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), ShapeError);
}

TEST(ParetoFilter, DecreasingCurveAllKept) {
  std::vector<PolicyPoint> pts;
  for (int i = 0; i < 10; ++i) pts.push_back({{0.5, 0.5}, {static_cast<double>(i), 10.0 - i}, ""});
  EXPECT_EQ(pareto_filter(pts).points.size(), 10u);
}

TEST(ParetoFilter, SinglePointAndEmpty) {
  const std::vector<PolicyPoint> one{{{1, 0}, {3, 4}, "a"}};
  EXPECT_EQ(pareto_filter(one).points, one);
  EXPECT_THROW(pareto_filter({}), ValidationError);
}

TEST(ParetoFilter, DuplicatesKeepFirst) {
  const std::vector<PolicyPoint> pts{{{1, 0}, {1, 1}, "a"}, {{0, 1}, {1, 1}, "b"}, {{0, 1}, {2, 2}, "c"}};
  const auto f = pareto_filter(pts).points;
  ASSERT_EQ(f.size(), 1u);
  EXPECT_EQ(f[0].label, "a");
}

TEST(ParetoFilter, MatchesBruteForce) {
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    const auto pts = random_points(1 + uniform_index(rng, 500), rng, k % 2 == 0);
    EXPECT_EQ(pareto_indices(pts), brute_force_front(pts)) << "set " << k;
  }
}

TEST(Normalize, EndpointsAndMidpoint) {
  Bounds b;
  const auto z = normalize({{0, 10}, {5, 20}, {10, 30}}, &b);
  EXPECT_EQ(z[0], (Objectives{0.0, 0.0}));
  EXPECT_EQ(z[1], (Objectives{0.5, 0.5}));
  EXPECT_EQ(z[2], (Objectives{1.0, 1.0}));
  EXPECT_EQ(b.min, (Objectives{0, 10}));
  EXPECT_THROW(normalize({{1, 2}, {1, 3}}), ValidationError);
}

TEST(Normalize, MonotonePerObjective) {
  Rng rng(3);
  const auto pts = random_points(50, rng, false);
  const auto z = normalize(pts);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = 0; j < pts.size(); ++j)
      for (std::size_t o = 0; o < 2; ++o)
        if (pts[i][o] < pts[j][o]) EXPECT_LE(z[i][o], z[j][o]);
}

TEST(Hypervolume, HandValues) {
  EXPECT_EQ(hypervolume_2d({{0, 0}}), 1.0);
  EXPECT_EQ(hypervolume_2d({{1, 1}}), 0.0);
  // 0.8*0.2 + 0.5*0.3 + 0.2*0.3
  EXPECT_NEAR(hypervolume_2d({{0.2, 0.8}, {0.5, 0.5}, {0.8, 0.2}}), 0.37, 1e-15);
  EXPECT_THROW(hypervolume_2d({{1.1, 0.0}}), ValidationError);
}

TEST(Hypervolume, MatchesMonteCarlo) {
  const std::vector<Objectives> f{{0.2, 0.8}, {0.5, 0.5}, {0.8, 0.2}};
  EXPECT_NEAR(hypervolume_2d(f), monte_carlo_hv(f, 1000000, 1), 1e-3);
  Rng rng(4);
  for (int k = 0; k < 3; ++k) {
    const auto front = random_front(1 + uniform_index(rng, 15), rng);
    EXPECT_NEAR(hypervolume_2d(front), monte_carlo_hv(front, 1000000, 100 + k), 1e-3);
  }
}

TEST(Hypervolume, DominatedPointChangesNothingAndGrowthIsMonotone) {
  Rng rng(5);
  for (int k = 0; k < 50; ++k) {
    auto front = random_front(5, rng);
    const double hv = hypervolume_2d(front);
    auto with_dom = front;
    with_dom.push_back({std::min(1.0, front[2][0] + 0.01), std::min(1.0, front[2][1] + 0.01)});
    EXPECT_EQ(hypervolume_2d(with_dom), hv);
    front.push_back({uniform01(rng), uniform01(rng)});
    EXPECT_GE(hypervolume_2d(front), hv);
  }
}

TEST(Sparsity, HandValueAndProperties) {
  EXPECT_DOUBLE_EQ(sparsity({{0, 1}, {0.5, 0.5}, {1, 0}}), 0.5);
  EXPECT_EQ(sparsity({{0.3, 0.3}, {0.3, 0.3}}), 0.0);
  EXPECT_THROW(sparsity({{0, 0}}), ValidationError);
  Rng rng(6);
  const auto pts = random_points(7, rng, false);
  std::vector<Objectives> scaled, swapped;
  for (const auto& p : pts) {
    scaled.push_back({3 * p[0], 3 * p[1]});
    swapped.push_back({p[1], p[0]});
  }
  EXPECT_NEAR(sparsity(scaled), 9 * sparsity(pts), 1e-12);
  EXPECT_EQ(sparsity(swapped), sparsity(pts));
}

TEST(EvaluatePolicy, MeanOfRollouts) {
  const auto inst = generate_instance(desk_config(), 3);
  UniformRandomPolicy pol;
  const auto one = evaluate_policy(pol, {0.5, 0.5}, inst, 1, 10, 1, RolloutMode::Sample);
  const auto t = rollout(pol, inst, {0.5, 0.5}, 10, RolloutMode::Sample);
  EXPECT_EQ(one.objectives, (Objectives{t.objectives.idle_s, t.objectives.empty_m}));
  const auto four = evaluate_policy(pol, {0.5, 0.5}, inst, 4, 10, 1, RolloutMode::Sample);
  double a = 0, b = 0;
  for (std::uint64_t s = 10; s < 14; ++s) {
    const auto r = rollout(pol, inst, {0.5, 0.5}, s, RolloutMode::Sample).objectives;
    a += r.idle_s;
    b += r.empty_m;
  }
  EXPECT_DOUBLE_EQ(four.objectives[0], a / 4);
  EXPECT_DOUBLE_EQ(four.objectives[1], b / 4);
  EXPECT_EQ(evaluate_policy(pol, {0.5, 0.5}, inst, 4, 10, 3, RolloutMode::Sample), four);
}

TEST(FrontTable, RoundTrip) {
  const auto inst = generate_instance(desk_config(), 3);
  const std::vector<PolicyPoint> pts{{{1, 0}, {1234.5, 9876.25}, "pamoo"}, {{0.1, 0.9}, {1500.125, 9000}, "pamoo"}};
  Bounds b = compute_bounds(objectives_of(pts));
  const auto text = export_front_tsv(pts, &inst, &b);
  EXPECT_EQ(parse_front_tsv(text), pts);
  EXPECT_THROW(parse_front_tsv("garbage\n"), ParseError);
}

TEST(CompareFronts, SharedNormalization) {
  const std::vector<PolicyPoint> a{{{1, 0}, {0, 10}, "a"}, {{0, 1}, {10, 0}, "a"}};
  const std::vector<PolicyPoint> b{{{1, 0}, {5, 5}, "b"}};
  const auto m = compare_fronts({a, b});
  // a: (0,1),(1,0) -> 0 area; b: (0.5,0.5) -> 0.25
  EXPECT_EQ(m[0].hypervolume, 0.0);
  EXPECT_EQ(m[1].hypervolume, 0.25);
  EXPECT_TRUE(std::isnan(m[1].sparsity));
}
