#pragma once

// Penalty-objective inverse kinematics.
//
//   H(Q) = |f(Q) - P~| + chi |g(Q) - R~| + mu * sum_i |violation_i(Q)|
//
// minimized by Newton-Raphson iterations with backtracking. A first phase
// uses the configured chi; if it does not reach the convergence threshold the
// solve is repeated position-only (chi = 0). Inputs are always reported after
// projection onto the admissible box and the nesting rule.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cppr/errors.hpp"
#include "cppr/kinematics.hpp"

namespace cppr {

struct IkTarget {
  Vec3 position = Vec3::Zero();
  std::optional<Vec3> direction;  // unit vector when present
};

enum class NewtonStep {
  /// Newton-Raphson on the stacked residual vector: Q <- Q - J_r^+ r.
  Vector,
  /// Scalar root step on H: Q <- Q - H grad(H) / |grad(H)|^2.
  Scalar,
};

struct SolverOptions {
  double chi = 0.5;
  double mu = 0.1;
  int max_iterations = 20;
  double convergence_threshold = 0.01;
  /// Backtracking factor applied to a step that fails to decrease H.
  double step_damping = 0.5;
  int max_backtracks = 12;
  int restarts = 8;
  std::uint64_t seed = 0;
  NewtonStep step = NewtonStep::Vector;
  double length_step = 1e-3;  // finite-difference steps, mm
  double angle_step = 1e-4;   // rad

  void validate() const {
    detail::require(chi >= 0.0 && chi < 1.0, "solver: chi must lie in [0, 1)");
    detail::require(mu > 0.0, "solver: mu must be > 0");
    detail::require(max_iterations >= 1, "solver: max_iterations must be >= 1");
    detail::require(convergence_threshold > 0.0, "solver: convergence_threshold must be > 0");
    detail::require(step_damping > 0.0 && step_damping < 1.0, "solver: step_damping must lie in (0, 1)");
    detail::require(restarts >= 0, "solver: restarts must be >= 0");
  }
};

struct ConstraintViolation {
  std::string bound;
  double amount = 0.0;
};

struct SolverReport {
  ActuationInput q;
  TipConfiguration tip;
  double position_residual = 0.0;
  double orientation_residual = 0.0;
  double objective = 0.0;
  int iterations_used = 0;
  double chi_used = 0.0;
  bool converged = false;
  int restarts_used = 0;
  std::vector<ConstraintViolation> constraint_violations;
  /// Best objective of the chi > 0 phase (NaN when that phase was skipped).
  double first_phase_position_residual = std::numeric_limits<double>::quiet_NaN();
};

// ---------------------------------------------------------------------------

/// Signed slacks of every box constraint; negative means violated.
inline std::vector<ConstraintViolation> constraint_slacks(const ActuationInput& q, const Robot& robot,
                                                          const ActuationLimits& limits) {
  const double dp = pull_bound(robot.proximal, limits.D_max);
  const double dd = pull_bound(robot.distal, limits.D_max);
  return {
      {"q_p_min", q.q_p},
      {"q_p_max", limits.q_p_max - q.q_p},
      {"q_d_min", q.q_d - limits.q_d_min},
      {"q_d_max", limits.q_d_max - q.q_d},
      {"D_min(proximal)", q.D_p},
      {"D_max(proximal)", dp - q.D_p},
      {"D_min(distal)", q.D_d},
      {"D_max(distal)", dd - q.D_d},
      {"phi_p_min", q.phi_p},
      {"phi_p_max", kTwoPi - q.phi_p},
      {"phi_d_min", q.phi_d},
      {"phi_d_max", (nesting_sign(q.q_d) + 1.0) * kPi - q.phi_d},
  };
}

inline std::vector<ConstraintViolation> constraint_violations(const ActuationInput& q, const Robot& robot,
                                                              const ActuationLimits& limits,
                                                              double tol = 1e-6) {
  std::vector<ConstraintViolation> out;
  for (auto& c : constraint_slacks(q, robot, limits)) {
    if (c.amount < -tol) out.push_back({c.bound, -c.amount});
  }
  return out;
}

/// H(Q) for a given chi. Angles are compared on their wrapped
/// representative, so the phi bounds only penalize the nesting bound.
inline double penalty_objective(const ActuationInput& q, const IkTarget& target, const Robot& robot,
                                const ActuationLimits& limits, double chi, double mu) {
  const TipConfiguration tip = tip_configuration(realized_input(q, robot), robot);
  double h = (tip.position - target.position).norm();
  if (chi != 0.0 && target.direction) h += chi * (tip.direction - *target.direction).norm();
  ActuationInput wrapped = q;
  wrapped.phi_p = wrap_angle(q.phi_p);
  wrapped.phi_d = wrap_angle(q.phi_d);
  double penalty = 0.0;
  for (const auto& c : constraint_slacks(wrapped, robot, limits)) penalty += std::min(0.0, c.amount);
  return h - mu * penalty;
}

inline double penalty_objective(const ActuationInput& q, const IkTarget& target, const Robot& robot,
                                const ActuationLimits& limits, const SolverOptions& opts) {
  return penalty_objective(q, target, robot, limits, opts.chi, opts.mu);
}

namespace detail {

inline double fd_step(int i, const SolverOptions& o) {
  return ActuationInput::kIsAngle[i] ? o.angle_step : o.length_step;
}

// Residual vector whose weighted norms make up H: position (3), chi-scaled
// direction (3), mu-scaled violations (12).
inline Eigen::VectorXd residual_vector(const ActuationInput& q, const IkTarget& target, const Robot& robot,
                                       const ActuationLimits& limits, double chi, double mu) {
  Eigen::VectorXd r = Eigen::VectorXd::Zero(18);
  const TipConfiguration tip = tip_configuration(realized_input(q, robot), robot);
  r.head<3>() = tip.position - target.position;
  if (chi != 0.0 && target.direction) r.segment<3>(3) = chi * (tip.direction - *target.direction);
  ActuationInput wrapped = q;
  wrapped.phi_p = wrap_angle(q.phi_p);
  wrapped.phi_d = wrap_angle(q.phi_d);
  const auto slacks = constraint_slacks(wrapped, robot, limits);
  for (std::size_t i = 0; i < slacks.size(); ++i) r[6 + static_cast<int>(i)] = mu * std::min(0.0, slacks[i].amount);
  return r;
}

struct PhaseResult {
  ActuationInput q;
  double objective = 0.0;
  int iterations = 0;
  std::vector<double> history;  // objective after each accepted step
};

inline PhaseResult newton_phase(ActuationInput q, const IkTarget& target, const Robot& robot,
                                const ActuationLimits& limits, const SolverOptions& opts, double chi) {
  auto objective = [&](const ActuationInput& x) {
    const double h = penalty_objective(x, target, robot, limits, chi, opts.mu);
    if (!std::isfinite(h)) throw SolverFault("inverse kinematics: objective is not finite");
    return h;
  };

  PhaseResult res;
  double h = objective(q);
  res.history.push_back(h);
  for (int it = 0; it < opts.max_iterations && h > opts.convergence_threshold; ++it) {
    ++res.iterations;
    const Vec6 x = q.vector();
    Vec6 step;
    if (opts.step == NewtonStep::Scalar) {
      Vec6 grad;
      for (int i = 0; i < 6; ++i) {
        const double s = fd_step(i, opts);
        Vec6 xp = x, xm = x;
        xp[i] += s;
        xm[i] -= s;
        grad[i] = (objective(ActuationInput::from_vector(xp)) - objective(ActuationInput::from_vector(xm))) / (2 * s);
      }
      const double g2 = grad.squaredNorm();
      if (!(g2 > 0.0)) break;
      step = -h * grad / g2;
    } else {
      const Eigen::VectorXd r = residual_vector(q, target, robot, limits, chi, opts.mu);
      Eigen::MatrixXd jac(r.size(), 6);
      for (int i = 0; i < 6; ++i) {
        const double s = fd_step(i, opts);
        Vec6 xp = x, xm = x;
        xp[i] += s;
        xm[i] -= s;
        jac.col(i) = (residual_vector(ActuationInput::from_vector(xp), target, robot, limits, chi, opts.mu) -
                      residual_vector(ActuationInput::from_vector(xm), target, robot, limits, chi, opts.mu)) /
                     (2 * s);
      }
      Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(jac);
      cod.setThreshold(1e-10);
      step = -cod.solve(r);
      if (!step.allFinite()) break;
    }

    double scale = 1.0;
    bool accepted = false;
    for (int b = 0; b <= opts.max_backtracks; ++b, scale *= opts.step_damping) {
      const ActuationInput trial = ActuationInput::from_vector(x + scale * step);
      const double ht = objective(trial);
      if (ht < h) {
        q = trial;
        h = ht;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    res.history.push_back(h);
  }
  res.q = q;
  res.objective = h;
  return res;
}

}  // namespace detail

inline SolverReport make_report(const ActuationInput& raw, const IkTarget& target, const Robot& robot,
                                const ActuationLimits& limits, const SolverOptions& opts, double chi) {
  SolverReport rep;
  rep.q = project_to_limits(raw, robot, limits);
  rep.tip = tip_configuration(rep.q, robot);
  rep.position_residual = (rep.tip.position - target.position).norm();
  rep.orientation_residual = target.direction ? (rep.tip.direction - *target.direction).norm() : 0.0;
  rep.chi_used = target.direction ? chi : 0.0;
  rep.objective = penalty_objective(rep.q, target, robot, limits, rep.chi_used, opts.mu);
  rep.converged = rep.objective <= opts.convergence_threshold;
  rep.constraint_violations = constraint_violations(rep.q, robot, limits);
  return rep;
}

/// Solves for an admissible Q reaching `target`. Never throws on
/// non-convergence: the report carries converged = false. Throws SolverFault
/// if the objective turns NaN.
inline SolverReport solve_ik(const IkTarget& target, const Robot& robot, const ActuationLimits& limits,
                             const SolverOptions& opts,
                             const std::optional<ActuationInput>& initial_guess = std::nullopt) {
  opts.validate();
  if (target.direction && std::abs(target.direction->norm() - 1.0) > 1e-9) {
    throw InvalidArgument("solve_ik: target direction must be a unit vector");
  }

  std::mt19937_64 rng(opts.seed);
  const ActuationInput first_start = initial_guess ? *initial_guess : ActuationInput{};
  std::vector<ActuationInput> starts{first_start};
  auto start_for = [&](int attempt) {
    while (static_cast<int>(starts.size()) <= attempt) starts.push_back(sample_actuation(rng, robot, limits));
    return starts[attempt];
  };
  int iterations = 0;

  // Orientation phase: multi-start with the configured chi.
  double first_phase_residual = std::numeric_limits<double>::quiet_NaN();
  std::optional<detail::PhaseResult> best_oriented;
  if (target.direction && opts.chi > 0.0) {
    for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
      auto phase = detail::newton_phase(start_for(attempt), target, robot, limits, opts, opts.chi);
      iterations += phase.iterations;
      SolverReport rep = make_report(phase.q, target, robot, limits, opts, opts.chi);
      if (rep.converged) {
        rep.iterations_used = iterations;
        rep.restarts_used = attempt;
        rep.first_phase_position_residual = rep.position_residual;
        return rep;
      }
      if (!best_oriented || phase.objective < best_oriented->objective) {
        best_oriented = std::move(phase);
        first_phase_residual = rep.position_residual;
      }
    }
  }

  // Position-only fallback, first from the best oriented iterate so the
  // fallback never ends worse than the failed phase.
  std::optional<SolverReport> best;
  for (int attempt = 0; attempt <= opts.restarts; ++attempt) {
    const ActuationInput start =
        (attempt == 0 && best_oriented) ? best_oriented->q : start_for(best_oriented ? attempt - 1 : attempt);
    const auto phase = detail::newton_phase(start, target, robot, limits, opts, 0.0);
    iterations += phase.iterations;
    SolverReport rep = make_report(phase.q, target, robot, limits, opts, 0.0);
    rep.first_phase_position_residual = first_phase_residual;
    rep.restarts_used = attempt;
    if (!best || rep.position_residual < best->position_residual) best = rep;
    if (rep.converged) break;
  }
  best->iterations_used = iterations;
  return *best;
}

}  // namespace cppr
