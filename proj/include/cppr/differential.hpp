#pragma once

// Finite-difference task Jacobian, singularity test and resolved-rate update.
//
// Rows are (P_x, P_y, P_z, R_x, R_y, R_z), columns follow ActuationInput
// order. Because the direction R is a unit vector its three rows only span
// the 2-D tangent plane of the sphere, so J has rank <= 5 at every pose and
// "full rank" means rank 5 here.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <optional>

#include "cppr/errors.hpp"
#include "cppr/kinematics.hpp"

namespace cppr {

using JacobianMatrix = Eigen::Matrix<double, 6, 6>;

/// Number of independent task coordinates of (P, unit R).
inline constexpr int kTaskRank = 5;

struct FdSteps {
  std::array<double, 6> step{1e-3, 1e-3, 1e-4, 1e-3, 1e-3, 1e-4};

  static FdSteps uniform(double length, double angle) {
    return {{length, length, angle, length, length, angle}};
  }
  FdSteps scaled(double f) const {
    FdSteps s = *this;
    for (double& h : s.step) h *= f;
    return s;
  }
};

inline Vec6 task_vector(const TipConfiguration& tip) {
  Vec6 v;
  v << tip.position, tip.direction;
  return v;
}

/// Central differences of the tip configuration. Translational and pull
/// inputs closer than one step to a limit use a one-sided difference;
/// direction angles are periodic and always use central differences.
inline JacobianMatrix jacobian_fd(const ActuationInput& q, const Robot& robot, const FdSteps& steps = {},
                                  const ActuationLimits& limits = {}) {
  for (double h : steps.step) {
    if (!(h >= 1e-9)) throw InvalidArgument("jacobian_fd: finite-difference step below 1e-9");
  }
  const std::array<double, 6> lower{0.0, 0.0, -INFINITY, limits.q_d_min, 0.0, -INFINITY};
  const std::array<double, 6> upper{limits.q_p_max, pull_bound(robot.proximal, limits.D_max), INFINITY,
                                    limits.q_d_max, pull_bound(robot.distal, limits.D_max), INFINITY};
  const Vec6 x = q.vector();
  const Vec6 f0 = task_vector(tip_configuration(q, robot));
  auto eval = [&](const Vec6& v) { return task_vector(tip_configuration(ActuationInput::from_vector(v), robot)); };

  JacobianMatrix jac;
  for (int i = 0; i < 6; ++i) {
    const double h = steps.step[i];
    Vec6 xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const bool can_up = xp[i] <= upper[i];
    const bool can_down = xm[i] >= lower[i];
    if (can_up && can_down) {
      jac.col(i) = (eval(xp) - eval(xm)) / (2.0 * h);
    } else if (can_up) {
      jac.col(i) = (eval(xp) - f0) / h;
    } else {
      jac.col(i) = (f0 - eval(xm)) / h;
    }
  }
  if (!jac.allFinite()) throw SolverFault("jacobian_fd: non-finite entry");
  return jac;
}

struct SingularityCheck {
  bool is_singular = false;
  /// Smallest singular value that is not structurally zero (the 5th).
  double smallest_singular_value = 0.0;
  double largest_singular_value = 0.0;
  double condition() const {
    return largest_singular_value > 0.0 ? smallest_singular_value / largest_singular_value : 0.0;
  }
};

/// Relative rank test on the task Jacobian: singular iff sigma_5 < tol * sigma_1.
/// The sixth singular value is zero by construction and is ignored.
inline SingularityCheck detect_singularity(const JacobianMatrix& jac, double tolerance = 1e-8) {
  detail::require(jac.allFinite(), "detect_singularity: Jacobian has non-finite entries");
  const Eigen::JacobiSVD<JacobianMatrix> svd(jac);
  const auto& s = svd.singularValues();
  SingularityCheck out;
  out.largest_singular_value = s[0];
  out.smallest_singular_value = s[kTaskRank - 1];
  out.is_singular = !(s[kTaskRank - 1] >= tolerance * s[0]) || s[0] == 0.0;
  return out;
}

/// Target of one resolved-rate step. Without a direction only the position
/// rows take part.
struct TaskTarget {
  Vec3 position = Vec3::Zero();
  std::optional<Vec3> direction;
};

/// Q(k+1) = Q(k) + J^+ (target - Theta(k)), then clipped onto the admissible
/// set. J^+ is the least-squares inverse truncated at the task rank; it is
/// (J^T J)^-1 J^T whenever J^T J is invertible. Throws SingularityError when
/// the task rows lose rank.
inline ActuationInput resolved_rate_step(const ActuationInput& q, const TaskTarget& target, const JacobianMatrix& jac,
                                         const Robot& robot, const ActuationLimits& limits,
                                         double tolerance = 1e-8) {
  const TipConfiguration tip = tip_configuration(q, robot);
  Eigen::MatrixXd rows;
  Eigen::VectorXd err;
  int rank = 0;
  if (target.direction) {
    rows = jac;
    err = Vec6::Zero();
    err.head<3>() = target.position - tip.position;
    err.tail<3>() = *target.direction - tip.direction;
    rank = kTaskRank;
  } else {
    rows = jac.topRows<3>();
    err = target.position - tip.position;
    rank = 3;
  }
  if (err.isZero(0.0)) return q;

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(rows, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (!(s[rank - 1] >= tolerance * s[0]) || s[0] == 0.0) {
    throw SingularityError(s[0] > 0.0 ? s[rank - 1] / s[0] : 0.0,
                           "resolved_rate_step: task Jacobian is rank deficient");
  }
  Eigen::VectorXd inv_s = Eigen::VectorXd::Zero(s.size());
  for (int i = 0; i < rank; ++i) inv_s[i] = 1.0 / s[i];
  const Vec6 dq = svd.matrixV() * inv_s.asDiagonal() * svd.matrixU().transpose() * err;
  return project_to_limits(ActuationInput::from_vector(q.vector() + dq), robot, limits);
}

}  // namespace cppr
