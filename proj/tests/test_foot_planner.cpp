#include "cml/foot_planner.hpp"

#include <gtest/gtest.h>

#include "cml/rng.hpp"

namespace cml {
namespace {

TEST(Raibert, ZeroVelocityKeepsReference) {
  FootPlannerConfig cfg;
  const Vec2 r_ref(0.18, 0.13);
  EXPECT_EQ(raibert_offset(r_ref, Vec2::Zero(), cfg), r_ref);
}

TEST(Raibert, VelocityShiftsTargetComponentwise) {
  FootPlannerConfig cfg;
  cfg.k_foot = Vec2(0.05, 0.05);
  const Vec2 out = raibert_offset(Vec2(0.18, 0.13), Vec2(0.5, 0.0), cfg);
  EXPECT_NEAR(out.x(), 0.18 + 0.025, 1e-15);
  EXPECT_NEAR(out.y(), 0.13, 1e-15);
}

TEST(Raibert, FastTrotReferenceOffsets) {
  FootPlannerConfig cfg;
  const Vec2 fl = raibert_offset(Vec2(0.1, 0.05), Vec2::Zero(), cfg);
  const Vec2 rr = raibert_offset(Vec2(-0.1, -0.05), Vec2::Zero(), cfg);
  EXPECT_EQ(fl, Vec2(0.1, 0.05));
  EXPECT_EQ(rr, Vec2(-0.1, -0.05));
}

TEST(ClampLegLength, InRangeUnchanged) {
  const Vec3 com(0, 0, 0.3), foot(0.1, 0.1, 0.0);
  EXPECT_EQ(clamp_leg_length(foot, com, 0.35), foot);
}

TEST(ClampLegLength, TwiceMaxLengthLandsAtMidpoint) {
  const Vec3 com(0, 0, 0);
  const Vec3 foot(0.8, 0, 0);  // length 0.8, l_max 0.4
  const Vec3 clamped = clamp_leg_length(foot, com, 0.4);
  EXPECT_LT((clamped - Vec3(0.4, 0, 0)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ClampLegLength, ResultNeverExceedsMax) {
  Rng rng(23);
  const Vec3 com(0.2, -0.1, 0.5);
  for (int i = 0; i < 200; ++i) {
    Vec3 foot;
    for (int k = 0; k < 3; ++k) foot(k) = rng.uniform(-2.0, 2.0);
    EXPECT_LE((clamp_leg_length(foot, com, 0.35) - com).norm(), 0.35 + 1e-12);
  }
}

TEST(ClampLegLength, DegenerateDirectionPointsDown) {
  const Vec3 com(0.1, 0.2, 0.3);
  EXPECT_EQ(clamp_leg_length(com, com, 0.4), com + Vec3(0, 0, -0.4));
}

TEST(PlanTouchdown, FlatLevelBodyReturnsReferencePose) {
  const RobotParams params = a1_params();
  const Terrain terrain = Terrain::flat();
  FootPlannerConfig cfg;
  CentroidalState state;
  state.p = Vec3(0.5, -0.25, params.p_z_nominal);
  for (int leg = 0; leg < kNumLegs; ++leg) {
    const auto plan = plan_touchdown(state, leg, terrain, cfg, params);
    ASSERT_TRUE(plan.has_value());
    const Vec3 expected(state.p.x() + params.r_ref[leg].x(),
                        state.p.y() + params.r_ref[leg].y(), 0.0);
    EXPECT_LT((plan->position - expected).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_FALSE(plan->length_clamped);
  }
}

TEST(PlanTouchdown, BeamPullsLateralTargetToCenterline) {
  const RobotParams params = a1_params();
  const Terrain terrain = Terrain::balance_beam(0.05);
  FootPlannerConfig cfg;
  CentroidalState state;
  state.p = Vec3(1.0, 0.0, params.p_z_nominal);
  // FL reference y = +0.13, outside the beam half-width
  const auto plan = plan_touchdown(state, 0, terrain, cfg, params);
  ASSERT_TRUE(plan.has_value());
  EXPECT_LE(std::abs(plan->position.y()), 0.05 + 1e-12);
  EXPECT_TRUE(terrain.feasible(plan->position.x(), plan->position.y()));
  // grid-scan oracle: expected snapped point
  const auto grid = local_grid(terrain, state.p.head<2>(), cfg.grid_resolution);
  const Vec2 target(state.p.x() + params.r_ref[0].x(),
                    state.p.y() + params.r_ref[0].y());
  const auto oracle = snap_to_feasible(grid, target);
  ASSERT_TRUE(oracle.has_value());
  EXPECT_LT((plan->position.head<2>() - *oracle).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(PlanTouchdown, GapTargetSnapsToNearSide) {
  const RobotParams params = a1_params();
  const Terrain terrain = Terrain::gap(0.12, 1.0);
  FootPlannerConfig cfg;
  CentroidalState state;
  // FL reference lands inside the gap interval [1.0, 1.12]
  state.p = Vec3(0.88, 0.0, params.p_z_nominal);
  const auto plan = plan_touchdown(state, 0, terrain, cfg, params);
  ASSERT_TRUE(plan.has_value());
  EXPECT_TRUE(terrain.feasible(plan->position.x(), plan->position.y()));
  EXPECT_LE(plan->position.x(), 1.0 + 1e-12);  // near side of the gap
}

TEST(PlanTouchdown, YawRotatesReferenceOffsets) {
  const RobotParams params = a1_params();
  FootPlannerConfig cfg;
  CentroidalState state;
  state.p = Vec3(0, 0, params.p_z_nominal);
  state.R = rot_z(M_PI / 2.0);
  const auto plan = plan_touchdown(state, 0, Terrain::flat(), cfg, params);
  ASSERT_TRUE(plan.has_value());
  // FL offset (0.18, 0.13) rotated 90 deg -> (-0.13, 0.18), snapped to grid
  EXPECT_NEAR(plan->position.x(), -0.13, cfg.grid_resolution);
  EXPECT_NEAR(plan->position.y(), 0.18, cfg.grid_resolution);
}

TEST(PlanTouchdown, NoFootholdPropagates) {
  const RobotParams params = a1_params();
  CentroidalState state;
  state.p = Vec3(0.0, 10.0, params.p_z_nominal);  // far off the beam
  const auto plan =
      plan_touchdown(state, 0, Terrain::balance_beam(0.05), FootPlannerConfig{},
                     params);
  EXPECT_FALSE(plan.has_value());
}

TEST(PlanTouchdown, FuzzRolloutKeepsInvariants) {
  const RobotParams params = a1_params();
  FootPlannerConfig cfg;
  Rng rng(29);

  // flat ground: both invariants hold for every single call
  const Terrain flat = Terrain::flat();
  for (int i = 0; i < 5000; ++i) {
    CentroidalState state;
    state.p = Vec3(rng.uniform(0.5, 8.0), rng.uniform(-0.4, 0.4),
                   params.p_z_nominal + rng.uniform(-0.05, 0.05));
    state.pdot = Vec3(rng.uniform(-0.8, 0.8), rng.uniform(-0.4, 0.4), 0.0);
    state.R = rot_z(rng.uniform(-0.3, 0.3));
    const int leg = static_cast<int>(rng.below(4));
    const auto plan = plan_touchdown(state, leg, flat, cfg, params);
    ASSERT_TRUE(plan.has_value());
    EXPECT_LE((plan->position - state.p).norm(), params.l_max + 1e-9);
    EXPECT_TRUE(flat.feasible(plan->position.x(), plan->position.y()));
  }

  // stepping stones: length always wins; feasibility may only be given
  // up when both constraints collide, which must stay rare
  const Terrain stones = stepping_stones_a1(3);
  int overrides = 0;
  const int calls = 5000;
  for (int i = 0; i < calls; ++i) {
    CentroidalState state;
    state.p = Vec3(rng.uniform(0.5, 8.0), rng.uniform(-0.3, 0.3),
                   params.p_z_nominal + rng.uniform(-0.03, 0.03));
    state.pdot = Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.2, 0.2), 0.0);
    state.R = rot_z(rng.uniform(-0.2, 0.2));
    const int leg = static_cast<int>(rng.below(4));
    const auto plan = plan_touchdown(state, leg, stones, cfg, params);
    ASSERT_TRUE(plan.has_value());
    EXPECT_LE((plan->position - state.p).norm(), params.l_max + 1e-9);
    if (plan->feasibility_kept) {
      EXPECT_TRUE(stones.feasible(plan->position.x(), plan->position.y()));
    } else {
      ++overrides;
    }
  }
  EXPECT_LT(overrides, calls / 20);
}

}  // namespace
}  // namespace cml
