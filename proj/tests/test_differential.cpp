#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cppr/differential.hpp"
#include "support.hpp"

using namespace cppr;

namespace {

const Robot kRobot = default_robot();
const ActuationLimits kLimits;

Vec6 fk_task(const ActuationInput& q) { return task_vector(tip_configuration(q, kRobot)); }

}  // namespace

TEST(JacobianFd, StraightPoseColumns) {
  const JacobianMatrix j = jacobian_fd({}, kRobot);
  // q_p translates the whole chain along base z.
  EXPECT_NEAR(j(0, 0), 0.0, 1e-12);
  EXPECT_NEAR(j(1, 0), 0.0, 1e-12);
  EXPECT_NEAR(j(2, 0), 1.0, 1e-9);
  EXPECT_LT(j.col(2).norm(), 1e-12);
  EXPECT_LT(j.col(5).norm(), 1e-12);
}

TEST(JacobianFd, TranslationColumnEverywhere) {
  std::mt19937_64 rng(1);
  for (int k = 0; k < 50; ++k) {
    const ActuationInput q = sample_actuation(rng, kRobot, kLimits);
    const JacobianMatrix j = jacobian_fd(q, kRobot, FdSteps{}, kLimits);
    EXPECT_NEAR(j(0, 0), 0.0, 1e-9);
    EXPECT_NEAR(j(1, 0), 0.0, 1e-9);
    EXPECT_NEAR(j(2, 0), 1.0, 1e-9);
    EXPECT_LT((j.block<3, 1>(3, 0).norm()), 1e-9);
  }
}

TEST(JacobianFd, PredictsSmallMotion) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int k = 0; k < 50; ++k) {
    const ActuationInput q = test::interior_actuation(rng, kRobot);
    const JacobianMatrix j = jacobian_fd(q, kRobot, FdSteps{}, kLimits);
    Vec6 dq;
    for (int i = 0; i < 6; ++i) dq[i] = g(rng);
    dq *= 1e-4 / dq.norm();
    const Vec6 actual = fk_task(ActuationInput::from_vector(q.vector() + dq)) - fk_task(q);
    EXPECT_LE((j * dq - actual).norm(), 1e-6);
  }
}

TEST(JacobianFd, SecondOrderConvergence) {
  // Coarse steps so truncation error dominates rounding.
  std::mt19937_64 rng(3);
  for (int k = 0; k < 10; ++k) {
    const ActuationInput q = test::interior_actuation(rng, kRobot, kLimits, 0.2);
    const FdSteps h = FdSteps::uniform(0.2, 0.1);
    const JacobianMatrix j1 = jacobian_fd(q, kRobot, h, kLimits);
    const JacobianMatrix j2 = jacobian_fd(q, kRobot, h.scaled(0.5), kLimits);
    const JacobianMatrix j4 = jacobian_fd(q, kRobot, h.scaled(0.25), kLimits);
    const double ratio = (j1 - j2).norm() / (j2 - j4).norm();
    EXPECT_NEAR(ratio, 4.0, 0.4) << "pose " << k;
  }
}

TEST(JacobianFd, OneSidedAtBounds) {
  const ActuationInput q{0.0, pull_bound(kRobot.proximal, 5), 0.3, kLimits.q_d_max, 0.0, 0.2};
  const JacobianMatrix j = jacobian_fd(q, kRobot, FdSteps{}, kLimits);
  EXPECT_TRUE(j.allFinite());
  EXPECT_NEAR(j(2, 0), 1.0, 1e-9);
  // One-sided differences are first order: compare to a reference central
  // difference taken outside the box, which plain FK permits.
  const double h = 1e-6;
  ActuationInput up = q, down = q;
  up.D_p += h;
  down.D_p -= h;
  const Vec6 ref = (fk_task(up) - fk_task(down)) / (2 * h);
  EXPECT_LE((j.col(1) - ref).norm(), 1e-2);
}

TEST(JacobianFd, RejectsTinySteps) {
  EXPECT_THROW(jacobian_fd({}, kRobot, FdSteps::uniform(1e-10, 1e-4)), InvalidArgument);
  EXPECT_THROW(jacobian_fd({}, kRobot, FdSteps::uniform(1e-3, 0.0)), InvalidArgument);
}

TEST(DetectSingularity, StraightPose) {
  const SingularityCheck s = detect_singularity(jacobian_fd({}, kRobot));
  EXPECT_TRUE(s.is_singular);
  EXPECT_LT(s.smallest_singular_value, 1e-10);
}

TEST(DetectSingularity, StraightForAnyTranslation) {
  for (double qp : {0.0, 3.0, 10.0}) {
    for (double qd : {-5.0, -1.0, 0.0, 4.0, 10.0}) {
      EXPECT_TRUE(detect_singularity(jacobian_fd({qp, 0, 1.0, qd, 0, 0.5}, kRobot, FdSteps{}, kLimits)).is_singular)
          << qp << " " << qd;
    }
  }
}

TEST(DetectSingularity, GenericBentPose) {
  const ActuationInput q{2, pull_from_bend_angle(0.5, kRobot.proximal), 0.3, 3,
                         pull_from_bend_angle(0.5, kRobot.distal), 1.4};
  const JacobianMatrix j = jacobian_fd(q, kRobot, FdSteps{}, kLimits);
  const SingularityCheck s = detect_singularity(j);
  EXPECT_FALSE(s.is_singular);
  EXPECT_GT(s.condition(), 1e-4);
  // Relative test: scaling J never changes the verdict.
  for (double c : {1e-6, 0.3, 1e5}) {
    EXPECT_EQ(detect_singularity(c * j).is_singular, s.is_singular);
    EXPECT_EQ(detect_singularity(c * jacobian_fd({}, kRobot)).is_singular, true);
  }
}

TEST(DetectSingularity, RejectsNonFinite) {
  JacobianMatrix j = JacobianMatrix::Identity();
  j(0, 0) = NAN;
  EXPECT_THROW(detect_singularity(j), InvalidArgument);
}

TEST(ResolvedRateStep, FixedPoint) {
  const ActuationInput q{2, 1.0, 0.3, 3, 0.9, 1.4};
  const TipConfiguration tip = tip_configuration(q, kRobot);
  const JacobianMatrix j = jacobian_fd(q, kRobot, FdSteps{}, kLimits);
  EXPECT_EQ(resolved_rate_step(q, {tip.position, tip.direction}, j, kRobot, kLimits), q);
  EXPECT_EQ(resolved_rate_step(q, {tip.position, std::nullopt}, j, kRobot, kLimits), q);
  // Holds even at the singular straight pose.
  EXPECT_EQ(resolved_rate_step({}, {{0, 0, 50}, Vec3::UnitZ()}, jacobian_fd({}, kRobot), kRobot, kLimits),
            ActuationInput{});
}

TEST(ResolvedRateStep, ZOffsetDecreasesError) {
  std::mt19937_64 rng(4);
  for (int k = 0; k < 20; ++k) {
    const ActuationInput q = test::interior_actuation(rng, kRobot, kLimits, 0.2);
    const TipConfiguration tip = tip_configuration(q, kRobot);
    const TaskTarget target{tip.position + Vec3(0, 0, 0.3), tip.direction};
    const JacobianMatrix j = jacobian_fd(q, kRobot, FdSteps{}, kLimits);
    const ActuationInput next = resolved_rate_step(q, target, j, kRobot, kLimits);
    const auto err = [&](const ActuationInput& x) {
      const TipConfiguration t = tip_configuration(x, kRobot);
      Vec6 e;
      e << target.position - t.position, *target.direction - t.direction;
      return e.norm();
    };
    EXPECT_LT(err(next), err(q));
  }
}

TEST(ResolvedRateStep, StaysInsideLimits) {
  const ActuationInput q{9.9, 2.8, 0.3, 9.9, 2.2, 1.4};
  const TipConfiguration tip = tip_configuration(q, kRobot);
  const ActuationInput next = resolved_rate_step(q, {tip.position + Vec3(0, 0, 5), std::nullopt},
                                                 jacobian_fd(q, kRobot, FdSteps{}, kLimits), kRobot, kLimits);
  EXPECT_NO_THROW(validate_actuation(next, kRobot, kLimits));
}

TEST(ResolvedRateStep, SingularPoseThrowsWithCondition) {
  try {
    resolved_rate_step({}, {{1, 0, 49}, std::nullopt}, jacobian_fd({}, kRobot), kRobot, kLimits);
    FAIL() << "expected SingularityError";
  } catch (const SingularityError& e) {
    EXPECT_LT(e.condition(), 1e-8);
  }
}
