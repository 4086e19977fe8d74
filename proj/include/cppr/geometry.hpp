#pragma once

// Slit-pattern design relations and the cantilever stiffness model for
// laser-patterned tube pairs.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cppr/errors.hpp"

namespace cppr {

/// One patterned tube. Lengths in mm, angle in rad.
struct TubeSpec {
  double outer_diameter = 0.0;
  double inner_diameter = 0.0;
  double steerable_length = 0.0;
  double compliant_length = 0.0;
  double max_bend_angle = 0.0;

  /// Distance from the tube axis to the wall's mid-surface.
  double wall_offset() const { return (outer_diameter + inner_diameter) / 4.0; }

  void validate(const std::string& name = "tube") const {
    detail::require(inner_diameter > 0.0 && outer_diameter > inner_diameter,
                    name + ": need outer_diameter > inner_diameter > 0");
    detail::require(steerable_length > 0.0, name + ": steerable_length must be > 0");
    detail::require(compliant_length >= 0.0, name + ": compliant_length must be >= 0");
    detail::require(max_bend_angle > 0.0, name + ": max_bend_angle must be > 0");
  }
};

/// Outer/inner tube pair welded at the tip. Bending comes from relative
/// axial motion of the inner tube.
struct SegmentSpec {
  TubeSpec outer_tube;
  TubeSpec inner_tube;

  double d_o() const { return outer_tube.wall_offset(); }
  double d_i() const { return inner_tube.wall_offset(); }
  double steerable_length() const { return outer_tube.steerable_length; }
  double max_bend_angle() const {
    return std::min(outer_tube.max_bend_angle, inner_tube.max_bend_angle);
  }

  void validate(const std::string& name = "segment") const {
    outer_tube.validate(name + ".outer_tube");
    inner_tube.validate(name + ".inner_tube");
    detail::require(outer_tube.inner_diameter >= inner_tube.outer_diameter,
                    name + ": inner tube does not fit inside outer tube");
    detail::require(outer_tube.steerable_length == inner_tube.steerable_length,
                    name + ": tubes must share one steerable length");
    detail::require(d_o() > d_i() && d_i() > 0.0, name + ": need d_o > d_i > 0");
  }
};

/// Tenon-mortise slit parameters of one tube.
struct SlitPattern {
  double tilt_angle = 0.0;  // beta, rad
  double slit_width = 0.0;  // s, mm
  double gap_distance = 0.0;  // d_g, mm
  double slit_height = 0.0;  // d_h, mm
  int count = 0;  // N

  void validate(const std::string& name = "slit") const {
    detail::require(tilt_angle > 0.0 && tilt_angle < std::numbers::pi / 2,
                    name + ": tilt_angle must lie in (0, pi/2)");
    detail::require(slit_width > 0.0 && gap_distance > 0.0 && slit_height > 0.0,
                    name + ": slit_width, gap_distance, slit_height must be > 0");
    detail::require(count >= 1, name + ": count must be >= 1");
  }
};

/// Bend angle at which the outer tube's slits close completely:
/// theta = N*s / (2*d_o). A zero slit width is accepted (theta = 0) so the
/// s -> 0 limit can be evaluated.
inline double max_bend_from_outer_slits(const SlitPattern& pattern, const SegmentSpec& seg) {
  const double d_o = seg.d_o();
  detail::require(d_o > 0.0, "max_bend_from_outer_slits: d_o must be > 0");
  detail::require(pattern.count >= 1, "max_bend_from_outer_slits: count must be >= 1");
  detail::require(pattern.slit_width >= 0.0, "max_bend_from_outer_slits: slit_width must be >= 0");
  return pattern.count * pattern.slit_width / (2.0 * d_o);
}

/// LHS minus RHS of the outer/inner slit compatibility relation
///   L_o - L_i - N_i s_i / cos(beta_i) = (d_o - d_i) N_o s_o / (2 d_o).
/// Zero means the pair closes at the same bend angle.
inline double slit_relation_residual(const SlitPattern& outer, const SlitPattern& inner,
                                     const SegmentSpec& seg) {
  const double cos_beta = std::cos(inner.tilt_angle);
  if (!(inner.tilt_angle >= 0.0) || inner.tilt_angle >= std::numbers::pi / 2 ||
      std::abs(cos_beta) < 1e-15) {
    throw InvalidArgument("slit_relation_residual: inner tilt_angle must lie in [0, pi/2)");
  }
  detail::require(seg.d_o() > 0.0, "slit_relation_residual: d_o must be > 0");
  const double lhs = seg.outer_tube.steerable_length - seg.inner_tube.steerable_length -
                     inner.count * inner.slit_width / cos_beta;
  const double rhs = (seg.d_o() - seg.d_i()) * outer.count * outer.slit_width / (2.0 * seg.d_o());
  return lhs - rhs;
}

/// Real-valued inner slit count that zeroes slit_relation_residual with all
/// other parameters fixed.
inline double solve_inner_slit_count(const SlitPattern& outer, const SlitPattern& inner,
                                     const SegmentSpec& seg) {
  detail::require(inner.slit_width > 0.0, "solve_inner_slit_count: inner slit_width must be > 0");
  const double rhs = (seg.d_o() - seg.d_i()) * outer.count * outer.slit_width / (2.0 * seg.d_o());
  return std::cos(inner.tilt_angle) *
         (seg.outer_tube.steerable_length - seg.inner_tube.steerable_length - rhs) /
         inner.slit_width;
}

struct SlitCount {
  int count = 0;
  double quotient = 0.0;  // L / (d_h + d_g) before rounding
};

/// N (d_h + d_g) = L, rounded to the nearest integer.
inline SlitCount slit_count_from_pitch(double length, double slit_height, double gap_distance) {
  detail::require(length > 0.0, "slit_count_from_pitch: length must be > 0");
  detail::require(slit_height + gap_distance > 0.0, "slit_count_from_pitch: pitch must be > 0");
  const double q = length / (slit_height + gap_distance);
  return {static_cast<int>(std::lround(q)), q};
}

/// Second moment of area of a slit cross-section whose uncut wall subtends
/// the central angle `alpha` (rad). alpha = 2*pi recovers the full annulus.
inline double second_moment(double alpha, double r_od, double r_id) {
  if (!(alpha >= 0.0 && alpha <= 2.0 * std::numbers::pi)) {
    throw InvalidArgument("second_moment: alpha must lie in [0, 2*pi]");
  }
  detail::require(r_id >= 0.0 && r_od > r_id, "second_moment: need r_od > r_id >= 0");
  const double r_od2 = r_od * r_od;
  const double r_id2 = r_id * r_id;
  return (alpha - std::sin(alpha)) * (r_od2 * r_od2 - r_id2 * r_id2) / 8.0;
}

/// Tip deflection of an end-loaded cantilever, w = F L^3 / (3 E I).
/// Units: N, mm, MPa, mm^4 -> mm.
inline double cantilever_deflection(double force, double length, double youngs_modulus,
                                    double second_moment_of_area) {
  detail::require(force >= 0.0, "cantilever_deflection: force must be >= 0");
  detail::require(length > 0.0 && youngs_modulus > 0.0,
                  "cantilever_deflection: length and modulus must be > 0");
  if (!(second_moment_of_area > 0.0)) {
    throw InvalidArgument("cantilever_deflection: degenerate section (I = 0)");
  }
  return force * length * length * length / (3.0 * youngs_modulus * second_moment_of_area);
}

/// 316L stainless steel, MPa.
inline constexpr double kSteel316LModulus = 193000.0;

}  // namespace cppr
