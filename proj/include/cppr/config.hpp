#pragma once

#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include "cppr/geometry.hpp"
#include "cppr/ik.hpp"
#include "cppr/json_io.hpp"
#include "cppr/kinematics.hpp"

namespace cppr {

/// Everything the tools need to know about one arm.
struct RobotConfig {
  Robot robot = default_robot();
  ActuationLimits limits;
  SolverOptions solver;

  void validate() const {
    robot.validate();
    limits.validate();
    solver.validate();
  }
};

/// Environment variable naming a config file used when --config is absent.
inline constexpr const char* kConfigEnv = "CPPR_CONFIG";

inline OrderedJson to_json(const RobotConfig& c) {
  return {{"proximal", to_json(c.robot.proximal)},
          {"distal", to_json(c.robot.distal)},
          {"limits", to_json(c.limits)},
          {"solver", to_json(c.solver)}};
}

/// Strict parse: proximal and distal are required, limits and solver fall
/// back to the defaults, anything else is rejected.
inline RobotConfig config_from_json(const Json& j) {
  using namespace json_detail;
  expect_object(j, "config");
  only_keys(j, {"proximal", "distal", "limits", "solver"}, "config");
  if (!j.contains("proximal") || !j.contains("distal")) {
    throw InvalidArgument("config: proximal and distal segments are required");
  }
  RobotConfig c;
  c.robot.proximal = segment_from_json(j.at("proximal"), "config.proximal");
  c.robot.distal = segment_from_json(j.at("distal"), "config.distal");
  if (j.contains("limits")) c.limits = limits_from_json(j.at("limits"), "config.limits");
  if (j.contains("solver")) c.solver = solver_from_json(j.at("solver"), SolverOptions{}, "config.solver");
  c.validate();
  return c;
}

inline RobotConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("config: cannot open " + path);
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw InvalidArgument("config: " + path + ": " + e.what());
  }
  return config_from_json(j);
}

/// --config wins, then $CPPR_CONFIG, then the built-in reference arm.
inline RobotConfig resolve_config(const std::optional<std::string>& path) {
  if (path && !path->empty()) return load_config_file(*path);
  if (const char* env = std::getenv(kConfigEnv); env && *env) return load_config_file(env);
  return {};
}

struct SlitPair {
  SlitPattern outer;
  SlitPattern inner;
};

/// Slit parameters of the reference arm's tubes.
inline SlitPair reference_slits(bool proximal) {
  const double deg = kPi / 180.0;
  if (proximal) return {{63.0 * deg, 0.03, 0.56, 0.25, 50}, {69.0 * deg, 0.05, 0.39, 0.25, 68}};
  return {{63.6 * deg, 0.03, 0.31, 0.25, 57}, {70.0 * deg, 0.049, 0.32, 0.25, 83}};
}

}  // namespace cppr
