#pragma once

// Constant-curvature kinematics of the two-segment push/pull arm.
//
// Frame {0} sits at the base of the proximal steerable section when q_p = 0,
// z along the straight axis. The chain is
//
//   Tz(q_p) * Arc(theta_p, phi_p, L_p) * [Tz(q_d) * Arc(theta_d, phi_p + phi_d, L_d)]
//
// where phi_d is measured from the proximal bending direction. For q_d < 0
// the distal steerable section is partly nested in the proximal lumen: only
// L_d - |q_d| of it is exposed and it starts at the proximal tip.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cppr/errors.hpp"
#include "cppr/geometry.hpp"

namespace cppr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Wraps an angle into [0, 2*pi).
inline double wrap_angle(double a) {
  double w = std::fmod(a, kTwoPi);
  if (w < 0.0) w += kTwoPi;
  if (w >= kTwoPi) w = 0.0;
  return w;
}

/// Six actuation inputs. Index order (q_p, D_p, phi_p, q_d, D_d, phi_d) is
/// also the Jacobian column order.
struct ActuationInput {
  double q_p = 0.0;    // proximal carriage translation, mm
  double D_p = 0.0;    // proximal inner-tube pull, mm
  double phi_p = 0.0;  // proximal bending direction, rad
  double q_d = 0.0;    // distal translation (< 0: nested), mm
  double D_d = 0.0;    // distal inner-tube pull, mm
  double phi_d = 0.0;  // distal direction relative to the proximal one, rad

  static constexpr std::array<std::string_view, 6> kNames = {"q_p", "D_p", "phi_p",
                                                             "q_d", "D_d", "phi_d"};
  static constexpr std::array<bool, 6> kIsAngle = {false, false, true, false, false, true};

  Vec6 vector() const {
    Vec6 v;
    v << q_p, D_p, phi_p, q_d, D_d, phi_d;
    return v;
  }
  static ActuationInput from_vector(const Vec6& v) {
    return {v[0], v[1], v[2], v[3], v[4], v[5]};
  }
  double operator[](int i) const { return vector()[i]; }

  friend bool operator==(const ActuationInput&, const ActuationInput&) = default;
};

/// Box limits on the actuation inputs. D_max is the pull travel; each
/// segment additionally caps D so its bend never exceeds max_bend_angle.
struct ActuationLimits {
  double q_p_max = 10.0;
  double q_d_min = -5.0;
  double q_d_max = 10.0;
  double D_max = 5.0;

  void validate() const {
    detail::require(q_p_max > 0.0, "limits: q_p_max must be > 0");
    detail::require(q_d_min <= 0.0 && q_d_max >= 0.0, "limits: need q_d_min <= 0 <= q_d_max");
    detail::require(D_max >= 0.0, "limits: D_max must be >= 0");
  }
};

struct Robot {
  SegmentSpec proximal;
  SegmentSpec distal;

  void validate() const {
    proximal.validate("proximal");
    distal.validate("distal");
  }
};

/// Tube dimensions of the reference dissector (mm, rad).
inline Robot default_robot() {
  const double max_bend = 50.0 * kPi / 180.0;
  Robot r;
  r.proximal.outer_tube = {3.5, 3.3, 30.0, 0.0, max_bend};
  r.proximal.inner_tube = {3.2, 3.0, 30.0, 0.0, max_bend};
  r.distal.outer_tube = {2.9, 2.7, 20.0, 40.0, max_bend};
  r.distal.inner_tube = {2.6, 2.4, 20.0, 40.0, max_bend};
  return r;
}

// ---------------------------------------------------------------------------
// Pull distance <-> bend angle

/// Effective pull bound of one segment: the travel limit or the pull that
/// reaches max_bend_angle, whichever is smaller.
inline double pull_bound(const SegmentSpec& seg, double D_max) {
  return std::min(D_max, seg.max_bend_angle() * (seg.d_o() + seg.d_i()));
}

/// theta = D / (d_o + d_i). |D| sets the magnitude; D < 0 bends toward
/// phi + pi, which shows up as a negative angle.
inline double bend_angle_from_pull(double D, const SegmentSpec& seg) {
  const double theta = D / (seg.d_o() + seg.d_i());
  const double bound = seg.max_bend_angle();
  if (std::abs(theta) > bound * (1.0 + 1e-12)) {
    throw LimitViolation("max_bend_angle", "bend_angle_from_pull: |D| = " + std::to_string(std::abs(D)) +
                                               " mm exceeds the pull reaching max_bend_angle (" +
                                               std::to_string(bound * (seg.d_o() + seg.d_i())) + " mm)");
  }
  return theta;
}

inline double pull_from_bend_angle(double theta, const SegmentSpec& seg) {
  if (std::abs(theta) > seg.max_bend_angle() * (1.0 + 1e-12)) {
    throw LimitViolation("max_bend_angle", "pull_from_bend_angle: |theta| = " + std::to_string(std::abs(theta)) +
                                               " rad exceeds max_bend_angle");
  }
  return theta * (seg.d_o() + seg.d_i());
}

// ---------------------------------------------------------------------------
// Rigid transforms and constant-curvature arcs

struct RigidTransform {
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform translation_z(double dz) {
    RigidTransform t;
    t.translation = Vec3(0.0, 0.0, dz);
    return t;
  }

  RigidTransform operator*(const RigidTransform& rhs) const {
    return {rotation * rhs.rotation, rotation * rhs.translation + translation};
  }
  Vec3 apply(const Vec3& p) const { return rotation * p + translation; }

  Eigen::Matrix4d matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
  }
};

struct SegmentArc {
  double curvature = 0.0;   // 1/mm, signed with the bend angle
  double bend_angle = 0.0;  // rad
  double direction = 0.0;   // rad
  double arc_length = 0.0;  // mm

  static SegmentArc from_angle(double theta, double phi, double length) {
    return {length > 0.0 ? theta / length : 0.0, theta, phi, length};
  }
  double bend_radius() const {
    return curvature != 0.0 ? 1.0 / std::abs(curvature) : std::numeric_limits<double>::infinity();
  }
};

namespace detail {

// R(1 - cos t) and R sin t with R = len / t; series form near t = 0.
inline void arc_offsets(double t, double len, double& radial, double& axial) {
  if (std::abs(t) < 1e-6) {
    radial = len * t / 2.0;
    axial = len;
  } else {
    const double sh = std::sin(t / 2.0);
    radial = 2.0 * len * sh * sh / t;
    axial = len * std::sin(t) / t;
  }
}

}  // namespace detail

/// Rz(phi) * [arc of angle theta in the x-z plane] * Rz(-phi).
inline RigidTransform segment_transform(const SegmentArc& arc) {
  const double t = arc.bend_angle;
  const double cp = std::cos(arc.direction);
  const double sp = std::sin(arc.direction);
  const double ct = std::cos(t);
  const double st = std::sin(t);
  double radial = 0.0;
  double axial = 0.0;
  detail::arc_offsets(t, arc.arc_length, radial, axial);

  RigidTransform out;
  out.translation = Vec3(radial * cp, radial * sp, axial);
  // Rz(phi) Ry(t) Rz(-phi), expanded.
  out.rotation << cp * cp * ct + sp * sp, cp * sp * (ct - 1.0), cp * st,  //
      cp * sp * (ct - 1.0), sp * sp * ct + cp * cp, sp * st,             //
      -cp * st, -sp * st, ct;
  return out;
}

// ---------------------------------------------------------------------------
// Forward kinematics

struct TipConfiguration {
  Vec3 position = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit tip tangent
};

enum class ShapeLabel : std::uint8_t { ProximalTranslation, ProximalArc, DistalExposed, DistalArc };

inline std::string_view to_string(ShapeLabel l) {
  switch (l) {
    case ShapeLabel::ProximalTranslation: return "proximal-translation";
    case ShapeLabel::ProximalArc: return "proximal-arc";
    case ShapeLabel::DistalExposed: return "distal-exposed";
    case ShapeLabel::DistalArc: return "distal-arc";
  }
  return "unknown";
}

struct ShapePoint {
  Vec3 position;
  ShapeLabel label;
};

using ShapePolyline = std::vector<ShapePoint>;

/// Per-part transforms of one evaluated pose.
struct ChainTransforms {
  SegmentArc proximal_arc;
  SegmentArc distal_arc;
  double exposed_straight = 0.0;  // q_d when q_d > 0
  RigidTransform base;            // after q_p
  RigidTransform proximal_tip;
  RigidTransform distal_base;
  RigidTransform tip;
};

/// Pure geometric evaluation. No limit checks: any finite Q is mapped, which
/// is what finite differencing and the optimizer need.
inline ChainTransforms evaluate_chain(const ActuationInput& q, const Robot& robot) {
  ChainTransforms c;
  const double lp = robot.proximal.steerable_length();
  const double ld = robot.distal.steerable_length();
  const double theta_p = q.D_p / (robot.proximal.d_o() + robot.proximal.d_i());
  const double theta_d_full = q.D_d / (robot.distal.d_o() + robot.distal.d_i());

  c.proximal_arc = SegmentArc::from_angle(theta_p, q.phi_p, lp);
  c.base = RigidTransform::translation_z(q.q_p);
  c.proximal_tip = c.base * segment_transform(c.proximal_arc);

  const double distal_phi = q.phi_p + q.phi_d;
  if (q.q_d >= 0.0) {
    c.exposed_straight = q.q_d;
    c.distal_arc = SegmentArc::from_angle(theta_d_full, distal_phi, ld);
  } else {
    const double exposed = std::max(0.0, ld + q.q_d);
    const double kappa_d = theta_d_full / ld;
    c.distal_arc = {kappa_d, kappa_d * exposed, distal_phi, exposed};
  }
  c.distal_base = c.proximal_tip * RigidTransform::translation_z(c.exposed_straight);
  c.tip = c.distal_base * segment_transform(c.distal_arc);
  return c;
}

inline TipConfiguration tip_configuration(const ActuationInput& q, const Robot& robot) {
  const RigidTransform t = evaluate_chain(q, robot).tip;
  return {t.translation, t.rotation.col(2)};
}

/// Samples the backbone from the origin of frame {0} to the tip with point
/// spacing no larger than `step` (mm).
inline ShapePolyline sample_shape(const ActuationInput& q, const Robot& robot, double step = 1.0) {
  detail::require(step > 0.0, "sample_shape: step must be > 0");
  const ChainTransforms c = evaluate_chain(q, robot);
  ShapePolyline out;
  out.push_back({Vec3::Zero(), ShapeLabel::ProximalTranslation});

  auto straight = [&](const RigidTransform& from, double length, ShapeLabel label) {
    if (length <= 0.0) return;
    const int n = std::max(1, static_cast<int>(std::ceil(length / step)));
    for (int k = 1; k <= n; ++k) {
      out.push_back({from.apply(Vec3(0.0, 0.0, length * k / n)), label});
    }
  };
  auto arc = [&](const RigidTransform& from, const SegmentArc& a, ShapeLabel label) {
    if (a.arc_length <= 0.0) return;
    const int n = std::max(1, static_cast<int>(std::ceil(a.arc_length / step)));
    for (int k = 1; k <= n; ++k) {
      const double f = static_cast<double>(k) / n;
      const SegmentArc part{a.curvature, a.bend_angle * f, a.direction, a.arc_length * f};
      out.push_back({(from * segment_transform(part)).translation, label});
    }
  };

  straight(RigidTransform::identity(), q.q_p, ShapeLabel::ProximalTranslation);
  arc(c.base, c.proximal_arc, ShapeLabel::ProximalArc);
  straight(c.proximal_tip, c.exposed_straight, ShapeLabel::DistalExposed);
  arc(c.distal_base, c.distal_arc, ShapeLabel::DistalArc);
  return out;
}

/// Curvature equality required when the distal section is nested.
inline double nested_distal_pull(double D_p, const Robot& robot) {
  const double kappa_p =
      D_p / ((robot.proximal.d_o() + robot.proximal.d_i()) * robot.proximal.steerable_length());
  return kappa_p * (robot.distal.d_o() + robot.distal.d_i()) * robot.distal.steerable_length();
}

inline double proximal_curvature(const ActuationInput& q, const Robot& r) {
  return q.D_p / ((r.proximal.d_o() + r.proximal.d_i()) * r.proximal.steerable_length());
}
inline double distal_curvature(const ActuationInput& q, const Robot& r) {
  return q.D_d / ((r.distal.d_o() + r.distal.d_i()) * r.distal.steerable_length());
}

/// Throws LimitViolation / NestingViolation if `q` is not admissible.
inline void validate_actuation(const ActuationInput& q, const Robot& robot,
                               const ActuationLimits& limits) {
  const auto v = q.vector();
  for (int i = 0; i < 6; ++i) {
    if (!std::isfinite(v[i])) {
      throw InvalidArgument(std::string("actuation input ") + std::string(ActuationInput::kNames[i]) +
                            " is not finite");
    }
  }
  auto check = [](bool ok, const char* bound, const std::string& msg) {
    if (!ok) throw LimitViolation(bound, msg);
  };
  const double tol = 1e-9;
  check(q.q_p >= -tol, "q_p_min", "q_p below 0");
  check(q.q_p <= limits.q_p_max + tol, "q_p_max", "q_p above q_p_max");
  check(q.q_d >= limits.q_d_min - tol, "q_d_min", "q_d below q_d_min");
  check(q.q_d <= limits.q_d_max + tol, "q_d_max", "q_d above q_d_max");
  check(q.D_p >= -tol, "D_min(proximal)", "D_p below 0");
  check(q.D_p <= pull_bound(robot.proximal, limits.D_max) + tol, "D_max(proximal)",
        "D_p above the proximal pull bound");
  check(q.D_d >= -tol, "D_min(distal)", "D_d below 0");
  check(q.D_d <= pull_bound(robot.distal, limits.D_max) + tol, "D_max(distal)",
        "D_d above the distal pull bound");
  check(q.phi_p >= 0.0 && q.phi_p <= kTwoPi, "phi_p_range", "phi_p outside [0, 2pi]");
  check(q.phi_d >= 0.0 && q.phi_d <= kTwoPi, "phi_d_range", "phi_d outside [0, 2pi]");

  if (q.q_d < 0.0) {
    if (!(q.phi_d == 0.0 || q.phi_d == kPi)) {
      throw NestingViolation("phi_d", "nested distal segment (q_d < 0) requires phi_d in {0, pi}");
    }
    if (std::abs(proximal_curvature(q, robot) - distal_curvature(q, robot)) > 1e-9) {
      throw NestingViolation("curvature",
                             "nested distal segment (q_d < 0) requires equal segment curvatures");
    }
  }
}

struct ForwardResult {
  TipConfiguration tip;
  ShapePolyline shape;
};

/// Checked forward kinematics: validates limits and the nesting rule, then
/// returns the tip configuration and the sampled backbone.
inline ForwardResult forward_kinematics(const ActuationInput& q, const Robot& robot,
                                        const ActuationLimits& limits, double sampling_step = 1.0) {
  validate_actuation(q, robot, limits);
  return {tip_configuration(q, robot), sample_shape(q, robot, sampling_step)};
}

/// Sign used by the nested phi_d bound 0 <= phi_d <= (sign(q_d) + 1) pi.
/// sign(0) = +1, so q_d = 0 keeps the full [0, 2pi] range.
inline double nesting_sign(double q_d) { return q_d < 0.0 ? -1.0 : 1.0; }

/// Geometry actually realized by Q: with q_d < 0 the distal pull follows the
/// curvature-matching substitution and phi_d = 0.
inline ActuationInput realized_input(ActuationInput q, const Robot& robot) {
  if (q.q_d < 0.0) {
    q.D_d = nested_distal_pull(q.D_p, robot);
    q.phi_d = 0.0;
  }
  return q;
}

/// Clamps Q onto the admissible set: box limits, wrapped angles, nesting.
inline ActuationInput project_to_limits(ActuationInput q, const Robot& robot, const ActuationLimits& limits) {
  q.q_p = std::clamp(q.q_p, 0.0, limits.q_p_max);
  q.q_d = std::clamp(q.q_d, limits.q_d_min, limits.q_d_max);
  q.D_p = std::clamp(q.D_p, 0.0, pull_bound(robot.proximal, limits.D_max));
  q.D_d = std::clamp(q.D_d, 0.0, pull_bound(robot.distal, limits.D_max));
  q.phi_p = wrap_angle(q.phi_p);
  q.phi_d = wrap_angle(q.phi_d);
  if (q.q_d < 0.0) {
    q.phi_d = 0.0;
    q.D_d = std::min(nested_distal_pull(q.D_p, robot), pull_bound(robot.distal, limits.D_max));
  }
  return q;
}

// ---------------------------------------------------------------------------
// Sampling of admissible inputs and workspace estimation

/// Draws a uniformly random admissible Q. Nested draws (q_d < 0) take
/// phi_d = 0 and the curvature-matched D_d.
template <class Rng>
ActuationInput sample_actuation(Rng& rng, const Robot& robot, const ActuationLimits& limits) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ActuationInput q;
  q.q_p = limits.q_p_max * u(rng);
  q.D_p = pull_bound(robot.proximal, limits.D_max) * u(rng);
  q.phi_p = kTwoPi * u(rng);
  q.q_d = limits.q_d_min + (limits.q_d_max - limits.q_d_min) * u(rng);
  q.D_d = pull_bound(robot.distal, limits.D_max) * u(rng);
  q.phi_d = kTwoPi * u(rng);
  if (q.q_d < 0.0) {
    q.phi_d = 0.0;
    q.D_d = std::min(nested_distal_pull(q.D_p, robot), pull_bound(robot.distal, limits.D_max));
  }
  return q;
}

struct WorkspaceEstimate {
  double volume_cm3 = 0.0;
  std::size_t occupied_voxels = 0;
  std::size_t samples = 0;
};

namespace detail {

inline std::uint64_t voxel_key(const Vec3& p, double pitch) {
  // 21 bits per axis, offset so the +-1 m range maps to non-negative indices.
  constexpr std::int64_t kOffset = 1 << 20;
  const auto ix = static_cast<std::int64_t>(std::floor(p.x() / pitch)) + kOffset;
  const auto iy = static_cast<std::int64_t>(std::floor(p.y() / pitch)) + kOffset;
  const auto iz = static_cast<std::int64_t>(std::floor(p.z() / pitch)) + kOffset;
  return (static_cast<std::uint64_t>(ix) << 42) | (static_cast<std::uint64_t>(iy) << 21) |
         static_cast<std::uint64_t>(iz);
}

}  // namespace detail

/// Voxel keys hit by tip positions of `sample_count` random admissible
/// inputs. Samples are drawn in fixed-size blocks, each from its own
/// seed_seq(seed, block) stream, so the set depends only on
/// (seed, sample_count, voxel).
inline std::unordered_set<std::uint64_t> workspace_occupancy(const Robot& robot, const ActuationLimits& limits,
                                                             std::size_t sample_count, std::uint64_t seed,
                                                             double voxel) {
  detail::require(voxel > 0.0, "workspace_volume: voxel pitch must be > 0");
  constexpr std::size_t kBlock = 65536;
  std::unordered_set<std::uint64_t> occupied;
  occupied.reserve(sample_count / 4 + 16);
  for (std::size_t start = 0, block = 0; start < sample_count; start += kBlock, ++block) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(block)};
    std::mt19937_64 rng(seq);
    const std::size_t n = std::min(kBlock, sample_count - start);
    for (std::size_t k = 0; k < n; ++k) {
      const ActuationInput q = sample_actuation(rng, robot, limits);
      occupied.insert(detail::voxel_key(tip_configuration(q, robot).position, voxel));
    }
  }
  return occupied;
}

/// Monte Carlo occupancy estimate of the reachable tip volume.
inline WorkspaceEstimate workspace_volume(const Robot& robot, const ActuationLimits& limits,
                                          std::size_t sample_count, std::uint64_t seed,
                                          double voxel) {
  const auto occupied = workspace_occupancy(robot, limits, sample_count, seed, voxel);
  WorkspaceEstimate est;
  est.samples = sample_count;
  est.occupied_voxels = occupied.size();
  est.volume_cm3 = static_cast<double>(occupied.size()) * voxel * voxel * voxel / 1000.0;
  return est;
}

}  // namespace cppr
