#include <gtest/gtest.h>

#include <numbers>

#include "calib_fixtures.hpp"
#include "quaydeck/calib.hpp"

using namespace quaydeck;
using namespace quaydeck::fixtures;

namespace {

const Bounds kUnitBounds{{0, 0}, {1, 1}};

AnchorSet three_anchors() {
  return make_anchor_set({{0.9, 0.1}, {0.6, 0.4}, {0.2, 0.8}}, {{0.375, 0.125}, {0.25, 0.25}, {0.125, 0.375}},
                         kUnitBounds, TargetDirection::Literal);
}

AnchorSet polar_anchors(double a, double b, Preference pa, Preference pb) {
  return make_anchor_set({pa, pb}, {{0.5 * std::cos(a), 0.5 * std::sin(a)}, {0.5 * std::cos(b), 0.5 * std::sin(b)}},
                         kUnitBounds, TargetDirection::Literal);
}

}  // namespace

TEST(Calibrate, ZeroAngleReturnsLowerAnchor) {
  const auto s = three_anchors();
  const auto r = calibrate({0.75, 0.25}, s);
  EXPECT_EQ(r.alpha_t, 0.0);
  EXPECT_EQ(r.preference, (Preference{0.9, 0.1}));
  EXPECT_FALSE(r.clamped);
}

TEST(Calibrate, FullBracketReturnsUpperAnchor) {
  const auto s = three_anchors();
  const auto r = calibrate({0.5, 0.5}, s);
  EXPECT_EQ(r.preference, (Preference{0.6, 0.4}));
  const auto last = calibrate({0.25, 0.75}, s);
  EXPECT_EQ(last.preference, (Preference{0.2, 0.8}));
}

TEST(Calibrate, HalfwayInterpolates) {
  const auto s = polar_anchors(0.3, 0.7, {0.6, 0.4}, {0.4, 0.6});
  const double t = 0.5;
  const Preference target{std::cos(t) / (std::cos(t) + std::sin(t)), std::sin(t) / (std::cos(t) + std::sin(t))};
  const auto r = calibrate(target, s);
  EXPECT_NEAR(r.alpha_t / r.alpha_c, 0.5, 1e-12);
  EXPECT_NEAR(r.preference[0], 0.5, 1e-12);
  EXPECT_NEAR(r.preference[1], 0.5, 1e-12);
}

TEST(Calibrate, OutsideFanClampsAndFlags) {
  const auto s = three_anchors();
  const auto lo = calibrate({1.0, 0.0}, s);
  EXPECT_TRUE(lo.clamped);
  EXPECT_EQ(lo.preference, (Preference{0.9, 0.1}));
  const auto hi = calibrate({0.0, 1.0}, s);
  EXPECT_TRUE(hi.clamped);
  EXPECT_EQ(hi.preference, (Preference{0.2, 0.8}));
}

TEST(Calibrate, OutputOnSimplexAndMonotone) {
  const auto s = three_anchors();
  Rng rng(1);
  for (int k = 0; k < 500; ++k) {
    const double w = uniform01(rng);
    const auto r = calibrate({w, 1.0 - w}, s);
    EXPECT_GE(r.preference[0], 0.0);
    EXPECT_GE(r.preference[1], 0.0);
    EXPECT_NEAR(r.preference[0] + r.preference[1], 1.0, 1e-12);
  }
  // Sweeping the target across one bracket moves p2 monotonically p1 -> p3.
  const auto b = polar_anchors(0.2, 1.2, {0.8, 0.2}, {0.3, 0.7});
  double prev = -1.0;
  for (int k = 0; k <= 100; ++k) {
    const double t = 0.2 + k * 0.01;
    const auto r = calibrate({std::cos(t) / (std::cos(t) + std::sin(t)), std::sin(t) / (std::cos(t) + std::sin(t))}, b);
    EXPECT_GE(r.preference[1], prev - 1e-15);
    prev = r.preference[1];
  }
}

TEST(Calibrate, TwoExtremeAnchorsInterpolateLinearly) {
  const auto s = make_anchor_set({{1, 0}, {0, 1}}, {{1, 0}, {0, 1}}, kUnitBounds, TargetDirection::Literal);
  for (double w : {0.1, 0.3, 0.5, 0.8}) {
    const Preference p{1 - w, w};
    const double f = std::atan2(p[1], p[0]) / (std::numbers::pi / 2);
    const auto r = calibrate(p, s);
    EXPECT_NEAR(r.preference[0], 1 - f, 1e-12);
    EXPECT_NEAR(r.preference[1], f, 1e-12);
  }
}

TEST(Calibrate, ReciprocalDirectionSwapsTarget) {
  auto s = three_anchors();
  s.direction = TargetDirection::Reciprocal;
  EXPECT_EQ(calibrate({0.25, 0.75}, s).preference, (Preference{0.9, 0.1}));
}

TEST(AnchorSet, RequiresTwoDistinctAnchors) {
  EXPECT_THROW(make_anchor_set({{1, 0}, {0, 1}}, {{0.5, 0.5}, {0.5, 0.5}}, kUnitBounds, TargetDirection::Literal),
               ValidationError);
  // Dominated anchors are dropped before sorting.
  const auto s = make_anchor_set({{1, 0}, {0.5, 0.5}, {0, 1}}, {{1, 0}, {1, 1}, {0, 1}}, kUnitBounds,
                                 TargetDirection::Literal);
  EXPECT_EQ(s.anchors.size(), 2u);
  EXPECT_LT(s.anchors[0].angle, s.anchors[1].angle);
}

TEST(BuildAnchorSet, ZeroIterationsIsFilteredGrid) {
  const auto grid = preference_grid(11);
  const auto b = build_anchor_set(quadratic_front_point, grid, 0);
  EXPECT_EQ(b.rounds.size(), 1u);
  EXPECT_EQ(b.set.anchors.size(), 11u);
}

TEST(BuildAnchorSet, OneRoundReducesMisalignmentOnSyntheticFront) {
  const auto grid = preference_grid(11);
  const auto b = build_anchor_set(quadratic_front_point, grid, 1);
  ASSERT_EQ(b.rounds.size(), 2u);
  EXPECT_LT(b.rounds[1].mean_misalignment, b.rounds[0].mean_misalignment);
  // Calibrated preferences approach the analytic inverse.
  for (std::size_t g = 1; g + 1 < grid.size(); ++g) {
    const auto exact = quadratic_front_inverse(std::atan2(grid[g][1], grid[g][0]));
    EXPECT_LT(std::abs(b.rounds[1].calibrated[g][0] - exact[0]), std::abs(grid[g][0] - exact[0]));
  }
}

TEST(BuildAnchorSet, DegenerateFrontRejected) {
  EXPECT_THROW(build_anchor_set([](const Preference&) { return Objectives{3, 4}; }, preference_grid(5), 1),
               ValidationError);
}

TEST(AnchorTable, RoundTrip) {
  const auto b = build_anchor_set(quadratic_front_point, preference_grid(6), 1);
  const auto back = parse_anchors_tsv(export_anchors_tsv(b.set));
  EXPECT_EQ(back.anchors, b.set.anchors);
  EXPECT_EQ(back.bounds, b.set.bounds);
  EXPECT_THROW(parse_anchors_tsv("nope"), ParseError);
}
