#pragma once

// JSON and CSV encodings of the public types. Parsing is strict: unknown
// keys, missing required keys and non-finite numbers are rejected with
// InvalidArgument.

#include <json.hpp>

#include <cmath>
#include <initializer_list>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cppr/errors.hpp"
#include "cppr/geometry.hpp"
#include "cppr/ik.hpp"
#include "cppr/kinematics.hpp"
#include "cppr/pathlab.hpp"

namespace cppr {

using Json = nlohmann::json;
// Insertion-ordered objects keep emitted documents in declaration order.
using OrderedJson = nlohmann::ordered_json;

namespace json_detail {

inline void expect_object(const Json& j, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected a JSON object");
}

inline void only_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw InvalidArgument(where + ": unknown field \"" + key + "\"");
  }
}

inline double number(const Json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw InvalidArgument(where + ": missing field \"" + std::string(key) + "\"");
  const Json& v = j.at(key);
  if (!v.is_number()) throw InvalidArgument(where + "." + key + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw InvalidArgument(where + "." + key + ": not finite");
  return d;
}

inline double number_or(const Json& j, const char* key, double fallback, const std::string& where) {
  return j.contains(key) ? number(j, key, where) : fallback;
}

inline Vec3 vec3(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw InvalidArgument(where + ": expected an array of 3 numbers");
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw InvalidArgument(where + ": expected numbers");
    v[i] = j[i].get<double>();
    if (!std::isfinite(v[i])) throw InvalidArgument(where + ": not finite");
  }
  return v;
}

}  // namespace json_detail

inline OrderedJson to_json(const Vec3& v) { return OrderedJson::array({v.x(), v.y(), v.z()}); }

// --- geometry -------------------------------------------------------------

inline OrderedJson to_json(const TubeSpec& t) {
  return {{"outer_diameter", t.outer_diameter},
          {"inner_diameter", t.inner_diameter},
          {"steerable_length", t.steerable_length},
          {"compliant_length", t.compliant_length},
          {"max_bend_angle", t.max_bend_angle}};
}

inline TubeSpec tube_from_json(const Json& j, const std::string& where = "tube") {
  using namespace json_detail;
  expect_object(j, where);
  only_keys(j, {"outer_diameter", "inner_diameter", "steerable_length", "compliant_length", "max_bend_angle"}, where);
  TubeSpec t{number(j, "outer_diameter", where), number(j, "inner_diameter", where),
             number(j, "steerable_length", where), number(j, "compliant_length", where),
             number(j, "max_bend_angle", where)};
  t.validate(where);
  return t;
}

inline OrderedJson to_json(const SegmentSpec& s) {
  return {{"outer_tube", to_json(s.outer_tube)}, {"inner_tube", to_json(s.inner_tube)},
          {"d_o", s.d_o()}, {"d_i", s.d_i()}};
}

/// d_o and d_i are derived from the tube diameters; when present in the
/// input they must agree with the derived values.
inline SegmentSpec segment_from_json(const Json& j, const std::string& where = "segment") {
  using namespace json_detail;
  expect_object(j, where);
  only_keys(j, {"outer_tube", "inner_tube", "d_o", "d_i"}, where);
  if (!j.contains("outer_tube") || !j.contains("inner_tube")) {
    throw InvalidArgument(where + ": outer_tube and inner_tube are required");
  }
  SegmentSpec s{tube_from_json(j.at("outer_tube"), where + ".outer_tube"),
                tube_from_json(j.at("inner_tube"), where + ".inner_tube")};
  if (j.contains("d_o") && std::abs(number(j, "d_o", where) - s.d_o()) > 1e-9) {
    throw InvalidArgument(where + ".d_o: inconsistent with (OD + ID) / 4 of the outer tube");
  }
  if (j.contains("d_i") && std::abs(number(j, "d_i", where) - s.d_i()) > 1e-9) {
    throw InvalidArgument(where + ".d_i: inconsistent with (OD + ID) / 4 of the inner tube");
  }
  s.validate(where);
  return s;
}

inline OrderedJson to_json(const SlitPattern& p) {
  return {{"tilt_angle", p.tilt_angle},
          {"slit_width", p.slit_width},
          {"gap_distance", p.gap_distance},
          {"slit_height", p.slit_height},
          {"count", p.count}};
}

inline SlitPattern slit_from_json(const Json& j, const std::string& where = "slit") {
  using namespace json_detail;
  expect_object(j, where);
  only_keys(j, {"tilt_angle", "slit_width", "gap_distance", "slit_height", "count"}, where);
  if (!j.contains("count") || !j.at("count").is_number_integer()) {
    throw InvalidArgument(where + ".count: expected an integer");
  }
  SlitPattern p{number(j, "tilt_angle", where), number(j, "slit_width", where), number(j, "gap_distance", where),
                number(j, "slit_height", where), j.at("count").get<int>()};
  p.validate(where);
  return p;
}

// --- kinematics -----------------------------------------------------------

inline OrderedJson to_json(const ActuationInput& q) {
  return {{"q_p", q.q_p}, {"D_p", q.D_p}, {"phi_p", q.phi_p}, {"q_d", q.q_d}, {"D_d", q.D_d}, {"phi_d", q.phi_d}};
}

inline ActuationInput actuation_from_json(const Json& j, const std::string& where = "Q") {
  using namespace json_detail;
  expect_object(j, where);
  only_keys(j, {"q_p", "D_p", "phi_p", "q_d", "D_d", "phi_d"}, where);
  return {number(j, "q_p", where), number(j, "D_p", where), number(j, "phi_p", where),
          number(j, "q_d", where), number(j, "D_d", where), number(j, "phi_d", where)};
}

inline OrderedJson to_json(const ActuationLimits& l) {
  return {{"q_p_max", l.q_p_max}, {"q_d_min", l.q_d_min}, {"q_d_max", l.q_d_max}, {"D_max", l.D_max}};
}

inline ActuationLimits limits_from_json(const Json& j, const std::string& where = "limits") {
  using namespace json_detail;
  expect_object(j, where);
  only_keys(j, {"q_p_max", "q_d_min", "q_d_max", "D_max"}, where);
  ActuationLimits l{number(j, "q_p_max", where), number(j, "q_d_min", where), number(j, "q_d_max", where),
                    number(j, "D_max", where)};
  l.validate();
  return l;
}

inline OrderedJson to_json(const TipConfiguration& t) {
  return {{"P", to_json(t.position)}, {"R", to_json(t.direction)}};
}

inline OrderedJson to_json(const SegmentArc& a) {
  return {{"curvature", a.curvature}, {"bend_angle", a.bend_angle}, {"direction", a.direction},
          {"arc_length", a.arc_length}};
}

inline void write_shape_csv(std::ostream& os, const ShapePolyline& shape) {
  os << "x_mm,y_mm,z_mm,segment_label\n";
  for (const auto& p : shape) {
    // json number formatting gives shortest round-trip output
    os << Json(p.position.x()).dump() << ',' << Json(p.position.y()).dump() << ',' << Json(p.position.z()).dump()
       << ',' << to_string(p.label) << '\n';
  }
}

inline OrderedJson shape_to_json(const ShapePolyline& shape) {
  OrderedJson pts = OrderedJson::array();
  for (const auto& p : shape) {
    pts.push_back({{"p", to_json(p.position)}, {"label", std::string(to_string(p.label))}});
  }
  return pts;
}

// --- ik -------------------------------------------------------------------

inline OrderedJson to_json(const IkTarget& t) {
  OrderedJson j{{"P", to_json(t.position)}};
  if (t.direction) j["R"] = to_json(*t.direction);
  return j;
}

/// Accepts {"P": [x,y,z], "R": [rx,ry,rz]?}, which is also the fk output.
inline IkTarget target_from_json(const Json& j, const std::string& where = "target") {
  using namespace json_detail;
  expect_object(j, where);
  only_keys(j, {"P", "R"}, where);
  if (!j.contains("P")) throw InvalidArgument(where + ": missing field \"P\"");
  IkTarget t{vec3(j.at("P"), where + ".P"), std::nullopt};
  if (j.contains("R") && !j.at("R").is_null()) {
    const Vec3 r = vec3(j.at("R"), where + ".R");
    if (!(r.norm() > 0.0)) throw InvalidArgument(where + ".R: zero vector");
    t.direction = r.normalized();
  }
  return t;
}

inline OrderedJson to_json(const SolverOptions& o) {
  return {{"chi", o.chi},
          {"mu", o.mu},
          {"max_iterations", o.max_iterations},
          {"convergence_threshold", o.convergence_threshold},
          {"step_damping", o.step_damping},
          {"restarts", o.restarts},
          {"seed", o.seed}};
}

inline SolverOptions solver_from_json(const Json& j, SolverOptions base = {}, const std::string& where = "solver") {
  using namespace json_detail;
  expect_object(j, where);
  only_keys(j, {"chi", "mu", "max_iterations", "convergence_threshold", "step_damping", "restarts", "seed"}, where);
  base.chi = number_or(j, "chi", base.chi, where);
  base.mu = number_or(j, "mu", base.mu, where);
  base.max_iterations = static_cast<int>(number_or(j, "max_iterations", base.max_iterations, where));
  base.convergence_threshold = number_or(j, "convergence_threshold", base.convergence_threshold, where);
  base.step_damping = number_or(j, "step_damping", base.step_damping, where);
  base.restarts = static_cast<int>(number_or(j, "restarts", base.restarts, where));
  base.seed = static_cast<std::uint64_t>(number_or(j, "seed", static_cast<double>(base.seed), where));
  base.validate();
  return base;
}

inline OrderedJson to_json(const SolverReport& r) {
  OrderedJson violations = OrderedJson::array();
  for (const auto& v : r.constraint_violations) violations.push_back({{"bound", v.bound}, {"amount", v.amount}});
  return {{"Q", to_json(r.q)},
          {"P", to_json(r.tip.position)},
          {"R", to_json(r.tip.direction)},
          {"position_residual", r.position_residual},
          {"orientation_residual", r.orientation_residual},
          {"objective", r.objective},
          {"iterations_used", r.iterations_used},
          {"chi_used", r.chi_used},
          {"converged", r.converged},
          {"restarts_used", r.restarts_used},
          {"constraint_violations", violations}};
}

// --- pathlab --------------------------------------------------------------

/// CSV rows x_mm,y_mm,z_mm[,rx,ry,rz]; an optional non-numeric header line
/// and blank lines are skipped.
inline PathSpec read_path_csv(std::istream& in, const std::string& name = "path", std::size_t min_rows = 2) {
  PathSpec path;
  path.name = name;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> vals;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        vals.push_back(std::stod(cell, &used));
        if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
      }
    }
    if (!numeric) {
      if (lineno == 1) continue;
      throw InvalidArgument("path csv line " + std::to_string(lineno) + ": not numeric");
    }
    if (vals.size() != 3 && vals.size() != 6) {
      throw InvalidArgument("path csv line " + std::to_string(lineno) + ": expected 3 or 6 columns");
    }
    Waypoint w{Vec3(vals[0], vals[1], vals[2]), std::nullopt};
    if (vals.size() == 6) {
      const Vec3 d(vals[3], vals[4], vals[5]);
      if (!(d.norm() > 0.0)) throw InvalidArgument("path csv line " + std::to_string(lineno) + ": zero direction");
      w.direction = d.normalized();
    }
    path.waypoints.push_back(w);
  }
  if (path.waypoints.size() < min_rows) {
    throw InvalidArgument("path csv: need at least " + std::to_string(min_rows) + " rows");
  }
  return path;
}

inline void write_path_csv(std::ostream& os, const PathSpec& path) {
  bool with_dir = false;
  for (const auto& w : path.waypoints) with_dir = with_dir || w.direction.has_value();
  os << (with_dir ? "x_mm,y_mm,z_mm,rx,ry,rz\n" : "x_mm,y_mm,z_mm\n");
  for (const auto& w : path.waypoints) {
    os << Json(w.position.x()).dump() << ',' << Json(w.position.y()).dump() << ',' << Json(w.position.z()).dump();
    if (with_dir) {
      const Vec3 d = w.direction.value_or(Vec3::UnitZ());
      os << ',' << Json(d.x()).dump() << ',' << Json(d.y()).dump() << ',' << Json(d.z()).dump();
    }
    os << '\n';
  }
}

inline OrderedJson to_json(const WaypointRecord& r, std::size_t index) {
  OrderedJson j{{"index", index}, {"target", to_json(r.target.position)}};
  if (r.target.direction) j["target_R"] = to_json(*r.target.direction);
  j["achieved"] = to_json(r.achieved.position);
  j["achieved_R"] = to_json(r.achieved.direction);
  j["Q"] = to_json(r.q);
  j["residual"] = r.residual;
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["singular"] = r.singular;
  return j;
}

inline OrderedJson summary_json(const FollowTrace& t, FollowMode mode) {
  OrderedJson s{{"mode", mode == FollowMode::Ik ? "ik" : "rr"},
                {"count", t.records.size()},
                {"rmse", t.rmse},
                {"max_error", t.max_error},
                {"failures", t.failures}};
  if (t.closing) s["closing_residual"] = t.closing->residual;
  return s;
}

}  // namespace cppr
