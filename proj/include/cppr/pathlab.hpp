#pragma once

// Reference paths and the path-following harness.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "cppr/differential.hpp"
#include "cppr/errors.hpp"
#include "cppr/ik.hpp"
#include "cppr/kinematics.hpp"

namespace cppr {

struct Waypoint {
  Vec3 position = Vec3::Zero();
  std::optional<Vec3> direction;
};

struct PathSpec {
  std::string name;
  bool closed = false;
  std::vector<Waypoint> waypoints;
};

class PathGenerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SpiralParams {
  double turns = 1.5;
  double radius = 12.0;  // mm
  double pitch = 6.0;    // rise per turn, mm
  int n_points = 12;
  Vec3 center{0.0, 0.0, 54.0};
  std::uint64_t seed = 7;
  bool random_directions = true;
};

struct CircleParams {
  Vec3 center{0.0, 0.0, 52.0};
  double radius = 12.0;  // mm
  int n_points = 200;
  Vec3 normal = Vec3::UnitZ();
};

/// Reachability pre-check shared by the generators.
struct ReachabilityCheck {
  Robot robot = default_robot();
  ActuationLimits limits;
  SolverOptions solver;
  int max_shrinks = 10;
  double shrink_factor = 0.8;
  bool enabled = true;
};

inline bool path_reachable(const PathSpec& path, const ReachabilityCheck& check) {
  for (const auto& w : path.waypoints) {
    if (!solve_ik({w.position, std::nullopt}, check.robot, check.limits, check.solver).converged) return false;
  }
  return true;
}

namespace detail {

inline PathSpec spiral_points(const SpiralParams& p, double radius) {
  PathSpec path;
  path.name = "spiral";
  path.closed = false;
  std::mt19937_64 rng(p.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double rise = p.pitch * p.turns;
  for (int k = 0; k < p.n_points; ++k) {
    const double f = p.n_points > 1 ? static_cast<double>(k) / (p.n_points - 1) : 0.0;
    const double a = kTwoPi * p.turns * f;
    Waypoint w;
    w.position = p.center + Vec3(radius * std::cos(a), radius * std::sin(a), rise * (f - 0.5));
    if (p.random_directions) {
      Vec3 d(gauss(rng), gauss(rng), gauss(rng));
      while (d.norm() < 1e-12) d = Vec3(gauss(rng), gauss(rng), gauss(rng));
      w.direction = d.normalized();
    }
    path.waypoints.push_back(w);
  }
  return path;
}

inline std::pair<Vec3, Vec3> plane_basis(const Vec3& normal) {
  const Vec3 n = normal.normalized();
  // x-axis projected into the plane when possible, so normal = z gives (x, y).
  Vec3 u = Vec3::UnitX() - n.x() * n;
  if (u.norm() < 1e-9) u = Vec3::UnitY() - n.y() * n;
  u.normalize();
  return {u, n.cross(u)};
}

inline PathSpec circle_points(const CircleParams& p, double radius) {
  PathSpec path;
  path.name = "circle";
  path.closed = true;
  const auto [u, v] = plane_basis(p.normal);
  for (int k = 0; k < p.n_points; ++k) {
    const double a = kTwoPi * k / p.n_points;
    path.waypoints.push_back({p.center + radius * (std::cos(a) * u + std::sin(a) * v), std::nullopt});
  }
  return path;
}

template <class Make>
PathSpec generate_reachable(Make make, double radius, const ReachabilityCheck& check, const char* what) {
  double r = radius;
  for (int attempt = 0; attempt <= check.max_shrinks; ++attempt) {
    PathSpec path = make(r);
    if (!check.enabled || path_reachable(path, check)) return path;
    r *= check.shrink_factor;
  }
  throw PathGenerationError(std::string(what) + ": no reachable path after shrinking the radius");
}

}  // namespace detail

/// Helix of n_points waypoints centred on `center`, with seeded random unit
/// directions. Deterministic in the parameters.
inline PathSpec generate_spiral(const SpiralParams& p, const ReachabilityCheck& check = {}) {
  detail::require(p.n_points >= 2, "generate_spiral: need at least 2 points");
  detail::require(p.radius >= 0.0 && p.turns >= 0.0, "generate_spiral: radius and turns must be >= 0");
  return detail::generate_reachable([&](double r) { return detail::spiral_points(p, r); }, p.radius, check,
                                    "generate_spiral");
}

/// Closed regular polygon of n_points evenly spaced on a circle.
inline PathSpec generate_circle(const CircleParams& p, const ReachabilityCheck& check = {}) {
  detail::require(p.n_points >= 2, "generate_circle: need at least 2 points");
  detail::require(p.radius >= 0.0, "generate_circle: radius must be >= 0");
  detail::require(p.normal.norm() > 0.0, "generate_circle: plane normal must be non-zero");
  return detail::generate_reachable([&](double r) { return detail::circle_points(p, r); }, p.radius, check,
                                    "generate_circle");
}

// ---------------------------------------------------------------------------

enum class FollowMode { Ik, ResolvedRate };

struct FollowOptions {
  FollowMode mode = FollowMode::Ik;
  SolverOptions solver;
  ActuationInput initial;  // starting configuration
  /// Resolved-rate mode: stop sub-stepping a waypoint below this residual.
  double rr_tolerance = 0.01;
  int rr_max_substeps = 60;
  /// Cap on commanded tip motion per sub-step, mm.
  double rr_max_tip_step = 0.5;
  FdSteps fd_steps;
  double singularity_tolerance = 1e-8;
};

struct WaypointRecord {
  Waypoint target;
  TipConfiguration achieved;
  ActuationInput q;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
  bool singular = false;
};

struct FollowTrace {
  std::vector<WaypointRecord> records;
  double rmse = 0.0;
  double max_error = 0.0;
  int failures = 0;
  /// Closed paths only: the move from the last waypoint back to the first.
  std::optional<WaypointRecord> closing;
};

inline void summarize(FollowTrace& trace) {
  double sse = 0.0;
  trace.max_error = 0.0;
  trace.failures = 0;
  for (const auto& r : trace.records) {
    sse += r.residual * r.residual;
    trace.max_error = std::max(trace.max_error, r.residual);
    if (!r.converged) ++trace.failures;
  }
  trace.rmse = trace.records.empty() ? 0.0 : std::sqrt(sse / static_cast<double>(trace.records.size()));
}

namespace detail {

inline WaypointRecord record_for(const Waypoint& w, const ActuationInput& q, const Robot& robot, int iterations,
                                 bool converged) {
  WaypointRecord rec;
  rec.target = w;
  rec.q = q;
  rec.achieved = tip_configuration(q, robot);
  rec.residual = (rec.achieved.position - w.position).norm();
  rec.iterations = iterations;
  rec.converged = converged;
  return rec;
}

// Drives q toward one waypoint with capped resolved-rate sub-steps.
inline WaypointRecord resolved_rate_to(const Waypoint& w, ActuationInput q, const Robot& robot,
                                       const ActuationLimits& limits, const FollowOptions& opts) {
  int steps = 0;
  bool singular = false;
  double residual = (tip_configuration(q, robot).position - w.position).norm();
  while (residual >= opts.rr_tolerance && steps < opts.rr_max_substeps) {
    const TipConfiguration tip = tip_configuration(q, robot);
    Vec3 delta = w.position - tip.position;
    if (delta.norm() > opts.rr_max_tip_step) delta *= opts.rr_max_tip_step / delta.norm();
    TaskTarget sub{tip.position + delta, std::nullopt};
    if (w.direction) {
      Vec3 d = *w.direction - tip.direction;
      if (d.norm() > opts.rr_max_tip_step) d *= opts.rr_max_tip_step / d.norm();
      sub.direction = tip.direction + d;
    }
    ++steps;
    try {
      q = resolved_rate_step(q, sub, jacobian_fd(q, robot, opts.fd_steps, limits), robot, limits,
                             opts.singularity_tolerance);
    } catch (const SingularityError&) {
      singular = true;
      break;
    }
    residual = (tip_configuration(q, robot).position - w.position).norm();
  }
  WaypointRecord rec = record_for(w, q, robot, steps, residual < opts.rr_tolerance);
  rec.singular = singular;
  return rec;
}

}  // namespace detail

/// Follows `path` waypoint by waypoint. Ik mode solves every waypoint warm
/// started from the previous solution; resolved-rate mode reaches the first
/// waypoint by IK (unless already there) and then sub-steps the Jacobian
/// update between waypoints. Never aborts: failures are flagged per record.
inline FollowTrace follow_path(const PathSpec& path, const Robot& robot, const ActuationLimits& limits,
                               const FollowOptions& opts) {
  FollowTrace trace;
  ActuationInput q = project_to_limits(opts.initial, robot, limits);
  for (std::size_t i = 0; i < path.waypoints.size(); ++i) {
    const Waypoint& w = path.waypoints[i];
    const bool use_ik = opts.mode == FollowMode::Ik || i == 0;
    if (use_ik) {
      const double start_residual = (tip_configuration(q, robot).position - w.position).norm();
      if (opts.mode == FollowMode::ResolvedRate && start_residual < opts.rr_tolerance) {
        trace.records.push_back(detail::record_for(w, q, robot, 0, true));
        continue;
      }
      SolverOptions so = opts.solver;
      so.seed = opts.solver.seed + i;
      const SolverReport rep = solve_ik({w.position, w.direction}, robot, limits, so, q);
      // A failed solve keeps the previous configuration.
      if (rep.converged || rep.position_residual < (tip_configuration(q, robot).position - w.position).norm()) {
        q = rep.q;
      }
      WaypointRecord rec = detail::record_for(w, q, robot, rep.iterations_used, rep.converged);
      trace.records.push_back(rec);
    } else {
      WaypointRecord rec = detail::resolved_rate_to(w, q, robot, limits, opts);
      q = rec.q;
      trace.records.push_back(rec);
    }
  }
  if (path.closed && path.waypoints.size() > 1) {
    const Waypoint& first = path.waypoints.front();
    if (opts.mode == FollowMode::ResolvedRate) {
      trace.closing = detail::resolved_rate_to(first, q, robot, limits, opts);
    } else {
      SolverOptions so = opts.solver;
      so.seed = opts.solver.seed + path.waypoints.size();
      const SolverReport rep = solve_ik({first.position, first.direction}, robot, limits, so, q);
      trace.closing = detail::record_for(first, rep.q, robot, rep.iterations_used, rep.converged);
    }
  }
  summarize(trace);
  return trace;
}

}  // namespace cppr
