#pragma once

#include <random>

#include "cppr/kinematics.hpp"

namespace cppr::test {

/// Random admissible Q with every input strictly inside its range.
template <class Rng>
ActuationInput interior_actuation(Rng& rng, const Robot& robot, const ActuationLimits& limits = {},
                                  double margin = 0.05) {
  std::uniform_real_distribution<double> u(margin, 1.0 - margin);
  ActuationInput q;
  q.q_p = limits.q_p_max * u(rng);
  q.D_p = pull_bound(robot.proximal, limits.D_max) * u(rng);
  q.phi_p = kTwoPi * u(rng);
  q.q_d = limits.q_d_max * u(rng);
  q.D_d = pull_bound(robot.distal, limits.D_max) * u(rng);
  q.phi_d = kTwoPi * u(rng);
  return q;
}

inline Vec3 rotate_z(const Vec3& p, double a) {
  return {std::cos(a) * p.x() - std::sin(a) * p.y(), std::sin(a) * p.x() + std::cos(a) * p.y(), p.z()};
}

}  // namespace cppr::test
