#include <gtest/gtest.h>

#include <cmath>

#include "cppr/pathlab.hpp"

using namespace cppr;

namespace {

const Robot kRobot = default_robot();
const ActuationLimits kLimits;

void expect_within_limits(const ActuationInput& q) {
  EXPECT_NO_THROW(validate_actuation(q, kRobot, kLimits)) << q.q_p << " " << q.D_p << " " << q.phi_p << " " << q.q_d
                                                          << " " << q.D_d << " " << q.phi_d;
}

ReachabilityCheck no_check() {
  ReachabilityCheck c;
  c.enabled = false;
  return c;
}

}  // namespace

TEST(GenerateSpiral, DefaultIsReachableAndDeterministic) {
  const PathSpec a = generate_spiral(SpiralParams{});
  const PathSpec b = generate_spiral(SpiralParams{});
  ASSERT_EQ(a.waypoints.size(), 12u);
  EXPECT_FALSE(a.closed);
  for (std::size_t i = 0; i < a.waypoints.size(); ++i) {
    EXPECT_EQ(a.waypoints[i].position, b.waypoints[i].position);
    ASSERT_TRUE(a.waypoints[i].direction.has_value());
    EXPECT_EQ(*a.waypoints[i].direction, *b.waypoints[i].direction);
    EXPECT_NEAR(a.waypoints[i].direction->norm(), 1.0, 1e-12);
  }
}

TEST(GenerateSpiral, WaypointsLieInSampledWorkspace) {
  const PathSpec path = generate_spiral(SpiralParams{});
  const auto occupied = workspace_occupancy(kRobot, kLimits, 1000000, 1, 1.0);
  for (const auto& w : path.waypoints) {
    // Allow the neighbouring voxels: occupancy is a finite sample.
    bool hit = false;
    for (int dx = -1; dx <= 1 && !hit; ++dx)
      for (int dy = -1; dy <= 1 && !hit; ++dy)
        for (int dz = -1; dz <= 1 && !hit; ++dz)
          hit = occupied.count(detail::voxel_key(w.position + Vec3(dx, dy, dz), 1.0)) > 0;
    EXPECT_TRUE(hit) << w.position.transpose();
  }
}

TEST(GenerateSpiral, SeedChangesDirectionsOnly) {
  SpiralParams p;
  p.seed = 99;
  const PathSpec a = generate_spiral(SpiralParams{}, no_check());
  const PathSpec b = generate_spiral(p, no_check());
  EXPECT_EQ(a.waypoints[3].position, b.waypoints[3].position);
  EXPECT_NE(*a.waypoints[3].direction, *b.waypoints[3].direction);
}

TEST(GenerateSpiral, ZeroRadiusIsVerticalLine) {
  SpiralParams p;
  p.radius = 0.0;
  const PathSpec path = generate_spiral(p, no_check());
  for (const auto& w : path.waypoints) {
    EXPECT_NEAR(w.position.x(), p.center.x(), 1e-12);
    EXPECT_NEAR(w.position.y(), p.center.y(), 1e-12);
  }
  EXPECT_LT(path.waypoints.front().position.z(), path.waypoints.back().position.z());
}

TEST(GenerateSpiral, ShrinksThenGivesUp) {
  SpiralParams p;
  p.radius = 40.0;  // too wide at this height
  p.random_directions = false;
  const PathSpec path = generate_spiral(p);
  const double r = std::hypot(path.waypoints[0].position.x(), path.waypoints[0].position.y());
  EXPECT_LT(r, 40.0);

  SpiralParams far;
  far.center = Vec3(0, 0, 200);
  ReachabilityCheck quick;
  quick.max_shrinks = 2;
  quick.solver.restarts = 0;
  EXPECT_THROW(generate_spiral(far, quick), PathGenerationError);
  EXPECT_THROW(generate_spiral({.n_points = 1}), InvalidArgument);
}

TEST(GenerateCircle, CardinalPoints) {
  CircleParams p;
  p.n_points = 4;
  p.radius = 5.0;
  const PathSpec path = generate_circle(p, no_check());
  EXPECT_TRUE(path.closed);
  ASSERT_EQ(path.waypoints.size(), 4u);
  const Vec3 c = p.center;
  const Vec3 expected[] = {c + Vec3(5, 0, 0), c + Vec3(0, 5, 0), c + Vec3(-5, 0, 0), c + Vec3(0, -5, 0)};
  for (int i = 0; i < 4; ++i) EXPECT_LT((path.waypoints[i].position - expected[i]).norm(), 1e-12);
}

TEST(GenerateCircle, RegularSpacingAndTiltedPlane) {
  CircleParams p;
  p.normal = Vec3(1, 1, 3);
  p.n_points = 17;
  const PathSpec path = generate_circle(p, no_check());
  const double chord = 2 * p.radius * std::sin(kPi / p.n_points);
  for (int i = 0; i < p.n_points; ++i) {
    const Vec3& a = path.waypoints[i].position;
    const Vec3& b = path.waypoints[(i + 1) % p.n_points].position;
    EXPECT_NEAR((b - a).norm(), chord, 1e-12);
    EXPECT_NEAR((a - p.center).norm(), p.radius, 1e-12);
    EXPECT_NEAR((a - p.center).dot(p.normal.normalized()), 0.0, 1e-12);
  }
}

TEST(GenerateCircle, DefaultPassesReachability) {
  EXPECT_EQ(generate_circle(CircleParams{}).waypoints.size(), 200u);
}

TEST(FollowPath, SpiralIkMode) {
  const PathSpec path = generate_spiral(SpiralParams{});
  const FollowTrace t = follow_path(path, kRobot, kLimits, FollowOptions{});
  ASSERT_EQ(t.records.size(), 12u);
  EXPECT_EQ(t.failures, 0);
  EXPECT_LE(t.rmse, 0.1);
  EXPECT_LE(t.max_error, 0.25);
  EXPECT_GE(t.max_error, t.rmse);
  for (const auto& r : t.records) expect_within_limits(r.q);
}

TEST(FollowPath, TraceIsSelfConsistent) {
  for (auto mode : {FollowMode::Ik, FollowMode::ResolvedRate}) {
    CircleParams cp;
    cp.n_points = 40;
    const PathSpec path = mode == FollowMode::Ik ? generate_spiral(SpiralParams{}) : generate_circle(cp);
    FollowOptions o;
    o.mode = mode;
    const FollowTrace t = follow_path(path, kRobot, kLimits, o);
    double sse = 0.0;
    for (const auto& r : t.records) {
      const TipConfiguration tip = tip_configuration(r.q, kRobot);
      EXPECT_EQ(tip.position, r.achieved.position);
      EXPECT_EQ(tip.direction, r.achieved.direction);
      EXPECT_EQ((tip.position - r.target.position).norm(), r.residual);
      sse += r.residual * r.residual;
    }
    EXPECT_DOUBLE_EQ(t.rmse, std::sqrt(sse / t.records.size()));
  }
}

TEST(FollowPath, CircleResolvedRate) {
  const PathSpec path = generate_circle(CircleParams{});
  FollowOptions o;
  o.mode = FollowMode::ResolvedRate;
  const FollowTrace t = follow_path(path, kRobot, kLimits, o);
  ASSERT_EQ(t.records.size(), 200u);
  EXPECT_LE(t.rmse, 0.1);
  for (const auto& r : t.records) {
    expect_within_limits(r.q);
    EXPECT_FALSE(r.singular);
  }
  ASSERT_TRUE(t.closing.has_value());
  EXPECT_LE(t.closing->residual, o.rr_tolerance);
}

TEST(FollowPath, SingleWaypointAtCurrentTip) {
  const PathSpec path{"here", false, {{tip_configuration({}, kRobot).position, std::nullopt}}};
  for (auto mode : {FollowMode::Ik, FollowMode::ResolvedRate}) {
    FollowOptions o;
    o.mode = mode;
    const FollowTrace t = follow_path(path, kRobot, kLimits, o);
    ASSERT_EQ(t.records.size(), 1u);
    EXPECT_EQ(t.records[0].residual, 0.0);
    EXPECT_EQ(t.records[0].iterations, 0);
  }
}

TEST(FollowPath, UnreachableWaypointIsFlaggedNotFatal) {
  const PathSpec path{"mixed", false, {{{0, 0, 50}, std::nullopt}, {{0, 0, 200}, std::nullopt}, {{5, 0, 49}, std::nullopt}}};
  FollowOptions o;
  o.solver.restarts = 1;
  const FollowTrace t = follow_path(path, kRobot, kLimits, o);
  ASSERT_EQ(t.records.size(), 3u);
  EXPECT_FALSE(t.records[1].converged);
  EXPECT_TRUE(t.records[2].converged);
  EXPECT_EQ(t.failures, 1);
}

TEST(FollowPath, WarmStartNeverCostsMoreIterations) {
  long warm_total = 0;
  long cold_total = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SpiralParams sp;
    sp.seed = seed;
    const PathSpec path = generate_spiral(sp);
    FollowOptions o;
    o.solver.seed = seed;
    const FollowTrace warm = follow_path(path, kRobot, kLimits, o);
    for (const auto& r : warm.records) warm_total += r.iterations;
    for (std::size_t i = 0; i < path.waypoints.size(); ++i) {
      SolverOptions so = o.solver;
      so.seed = o.solver.seed + i;
      const auto& w = path.waypoints[i];
      cold_total += solve_ik({w.position, w.direction}, kRobot, kLimits, so).iterations_used;
    }
  }
  EXPECT_LE(warm_total, cold_total);
}
