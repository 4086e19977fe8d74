#pragma once

// Simulated-robot teleoperation service: the single owner of the commanded
// actuation state. Commands are applied one at a time in arrival order;
// every applied command produces one telemetry snapshot.

#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "cppr/config.hpp"
#include "cppr/differential.hpp"
#include "cppr/errors.hpp"
#include "cppr/ik.hpp"
#include "cppr/json_io.hpp"
#include "cppr/kinematics.hpp"

namespace cppr {

enum class SegmentSelect { Proximal, Distal };
enum class ControlMode { Shape, Tip };

struct JoystickCommand {
  SegmentSelect segment_select = SegmentSelect::Proximal;
  double joystick_angle = 0.0;       // rad
  double deflection_fraction = 0.0;  // l_j / l_j,max in [0, 1]
  ControlMode mode = ControlMode::Shape;
};

/// Axial jog of one segment's carriage, mm.
struct TranslationCommand {
  SegmentSelect segment_select = SegmentSelect::Proximal;
  double delta = 0.0;
};

struct TipTargetCommand {
  IkTarget target;
};

using TeleopCommand = std::variant<JoystickCommand, TranslationCommand, TipTargetCommand>;

struct BendCommand {
  double phi = 0.0;
  double theta = 0.0;
  double pull = 0.0;
};

/// Stick angle is the bending direction; stick deflection is proportional to
/// the bend angle with full deflection at the segment's max_bend_angle.
inline BendCommand map_joystick(const JoystickCommand& cmd, const SegmentSpec& seg) {
  if (!(cmd.deflection_fraction >= 0.0 && cmd.deflection_fraction <= 1.0)) {
    throw InvalidArgument("joystick: deflection_fraction must lie in [0, 1]");
  }
  if (!std::isfinite(cmd.joystick_angle)) throw InvalidArgument("joystick: joystick_angle is not finite");
  BendCommand out;
  out.phi = wrap_angle(cmd.joystick_angle);
  out.theta = cmd.deflection_fraction * seg.max_bend_angle();
  out.pull = pull_from_bend_angle(out.theta, seg);
  return out;
}

struct TeleopState {
  ActuationInput q;
  TipConfiguration tip;
  ShapePolyline shape;
  bool singular = true;
  std::uint64_t sequence = 0;
};

struct TeleopEvent {
  enum class Kind { Info, Warning, Error };
  Kind kind = Kind::Info;
  std::string message;
};

inline std::string_view to_string(TeleopEvent::Kind k) {
  switch (k) {
    case TeleopEvent::Kind::Info: return "info";
    case TeleopEvent::Kind::Warning: return "warning";
    case TeleopEvent::Kind::Error: return "error";
  }
  return "info";
}

struct ApplyResult {
  TeleopState state;
  std::vector<TeleopEvent> events;
  bool applied = false;
  std::optional<SolverReport> ik_report;
};

struct TeleopSettings {
  double sampling_step = 1.0;      // shape polyline spacing, mm
  double tip_jog = 1.0;            // tip-mode joystick travel at full deflection, mm
  double singularity_tolerance = 1e-8;
  std::size_t max_snapshot_points = 200;
};

/// Recomputes the derived fields (tip, shape, singularity) of `q`.
inline TeleopState make_state(const ActuationInput& q, const Robot& robot, const ActuationLimits& limits,
                              const TeleopSettings& settings, std::uint64_t sequence) {
  TeleopState s;
  s.q = q;
  const ForwardResult fk = forward_kinematics(q, robot, limits, settings.sampling_step);
  s.tip = fk.tip;
  s.shape = fk.shape;
  s.singular = detect_singularity(jacobian_fd(q, robot, FdSteps{}, limits), settings.singularity_tolerance).is_singular;
  s.sequence = sequence;
  return s;
}

namespace detail {

inline void note_clipping(const ActuationInput& wanted, const ActuationInput& got, std::vector<TeleopEvent>& events) {
  const Vec6 a = wanted.vector();
  const Vec6 b = got.vector();
  for (int i = 0; i < 6; ++i) {
    if (std::abs(a[i] - b[i]) > 1e-12 && !(ActuationInput::kIsAngle[i] && std::abs(wrap_angle(a[i]) - b[i]) < 1e-12)) {
      events.push_back({TeleopEvent::Kind::Warning,
                        "limit clipping on " + std::string(ActuationInput::kNames[i])});
    }
  }
}

}  // namespace detail

/// Pure state transition. On rejection the returned state equals `state`.
inline ApplyResult apply_command(const TeleopState& state, const TeleopCommand& command, const RobotConfig& config,
                                 const TeleopSettings& settings = {}) {
  const Robot& robot = config.robot;
  const ActuationLimits& limits = config.limits;
  ApplyResult res;
  res.state = state;

  auto commit = [&](const ActuationInput& wanted) {
    const ActuationInput q = project_to_limits(wanted, robot, limits);
    detail::note_clipping(wanted, q, res.events);
    res.state = make_state(q, robot, limits, settings, state.sequence + 1);
    res.applied = true;
  };
  auto solve_tip = [&](const IkTarget& target) {
    SolverOptions opts = config.solver;
    const SolverReport rep = solve_ik(target, robot, limits, opts, state.q);
    res.ik_report = rep;
    if (!rep.converged) {
      res.events.push_back({TeleopEvent::Kind::Error,
                            "tip target not reached (residual " + std::to_string(rep.position_residual) + " mm)"});
      return;
    }
    commit(rep.q);
    res.events.push_back({TeleopEvent::Kind::Info, "tip target converged"});
  };

  if (const auto* joy = std::get_if<JoystickCommand>(&command)) {
    if (joy->mode == ControlMode::Tip) {
      if (!(joy->deflection_fraction >= 0.0 && joy->deflection_fraction <= 1.0)) {
        throw InvalidArgument("joystick: deflection_fraction must lie in [0, 1]");
      }
      const double step = joy->deflection_fraction * settings.tip_jog;
      const Vec3 goal = state.tip.position +
                        step * Vec3(std::cos(joy->joystick_angle), std::sin(joy->joystick_angle), 0.0);
      solve_tip({goal, std::nullopt});
      return res;
    }
    const bool proximal = joy->segment_select == SegmentSelect::Proximal;
    const BendCommand bend = map_joystick(*joy, proximal ? robot.proximal : robot.distal);
    ActuationInput q = state.q;
    if (proximal) {
      q.phi_p = bend.phi;
      q.D_p = bend.pull;
    } else {
      q.phi_d = bend.phi;
      q.D_d = bend.pull;
    }
    commit(q);
  } else if (const auto* tr = std::get_if<TranslationCommand>(&command)) {
    if (!std::isfinite(tr->delta)) throw InvalidArgument("translate: delta is not finite");
    ActuationInput q = state.q;
    (tr->segment_select == SegmentSelect::Proximal ? q.q_p : q.q_d) += tr->delta;
    commit(q);
  } else {
    solve_tip(std::get<TipTargetCommand>(command).target);
  }
  return res;
}

/// Wire form of a state; the polyline is decimated to at most
/// settings.max_snapshot_points points (first and last always kept).
inline OrderedJson telemetry_snapshot(const TeleopState& s, const TeleopSettings& settings = {}) {
  ShapePolyline pts = s.shape;
  const std::size_t cap = std::max<std::size_t>(2, settings.max_snapshot_points);
  if (pts.size() > cap) {
    ShapePolyline dec;
    for (std::size_t k = 0; k < cap; ++k) dec.push_back(pts[k * (pts.size() - 1) / (cap - 1)]);
    pts = std::move(dec);
  }
  return {{"type", "snapshot"},
          {"sequence", s.sequence},
          {"Q", to_json(s.q)},
          {"tip", to_json(s.tip)},
          {"shape", shape_to_json(pts)},
          {"singular", s.singular}};
}

inline OrderedJson event_json(const TeleopEvent& e, std::uint64_t sequence) {
  return {{"type", "event"}, {"kind", std::string(to_string(e.kind))}, {"message", e.message}, {"sequence", sequence}};
}

// --- wire parsing ----------------------------------------------------------

inline SegmentSelect segment_from_string(const std::string& s) {
  if (s == "proximal") return SegmentSelect::Proximal;
  if (s == "distal") return SegmentSelect::Distal;
  throw InvalidArgument("segment_select must be \"proximal\" or \"distal\"");
}

/// POST /command body. Three shapes, told apart by "type":
///   {"type":"joystick","segment_select":..,"joystick_angle":..,"deflection_fraction":..,"mode":"shape"|"tip"}
///   {"type":"translate","segment_select":..,"delta":..}
///   {"type":"tip","P":[..],"R":[..]?}
/// Without "type" the shape is inferred: "P" means tip, "delta" means
/// translate, anything else is a joystick command.
inline TeleopCommand command_from_json(const Json& j) {
  using namespace json_detail;
  expect_object(j, "command");
  std::string type = "joystick";
  if (j.contains("type")) {
    if (!j.at("type").is_string()) throw InvalidArgument("command.type must be a string");
    type = j.at("type").get<std::string>();
  } else if (j.contains("P")) {
    type = "tip";
  } else if (j.contains("delta")) {
    type = "translate";
  }
  if (type == "joystick") {
    only_keys(j, {"type", "segment_select", "joystick_angle", "deflection_fraction", "mode"}, "command");
    JoystickCommand c;
    c.segment_select = segment_from_string(j.value("segment_select", std::string("proximal")));
    c.joystick_angle = number(j, "joystick_angle", "command");
    c.deflection_fraction = number(j, "deflection_fraction", "command");
    const std::string mode = j.value("mode", std::string("shape"));
    if (mode != "shape" && mode != "tip") throw InvalidArgument("command.mode must be \"shape\" or \"tip\"");
    c.mode = mode == "tip" ? ControlMode::Tip : ControlMode::Shape;
    if (!(c.deflection_fraction >= 0.0 && c.deflection_fraction <= 1.0)) {
      throw InvalidArgument("command.deflection_fraction must lie in [0, 1]");
    }
    return c;
  }
  if (type == "translate") {
    only_keys(j, {"type", "segment_select", "delta"}, "command");
    return TranslationCommand{segment_from_string(j.value("segment_select", std::string("proximal"))),
                              number(j, "delta", "command")};
  }
  if (type == "tip") {
    Json t = j;
    if (t.contains("type")) t.erase("type");
    return TipTargetCommand{target_from_json(t, "command")};
  }
  throw InvalidArgument("command.type must be joystick, translate or tip");
}

// --- service ---------------------------------------------------------------

/// Thread-safe owner of the authoritative state. submit() serializes all
/// commands and paces them to at most one state update per min_interval.
class TeleopService {
 public:
  using Listener = std::function<void(const OrderedJson&)>;

  explicit TeleopService(RobotConfig config, TeleopSettings settings = {},
                         std::chrono::microseconds min_interval = std::chrono::milliseconds(10))
      : config_(std::move(config)), settings_(settings), min_interval_(min_interval) {
    config_.validate();
    state_ = make_state(ActuationInput{}, config_.robot, config_.limits, settings_, 0);
  }

  struct Outcome {
    bool applied = false;
    std::uint64_t sequence = 0;
    OrderedJson response;  // snapshot or error event, plus any warnings
  };

  Outcome submit(const TeleopCommand& cmd) {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    if (last_update_ && now - *last_update_ < min_interval_) std::this_thread::sleep_until(*last_update_ + min_interval_);

    ApplyResult r = apply_command(state_, cmd, config_, settings_);
    Outcome out;
    out.applied = r.applied;
    OrderedJson events = OrderedJson::array();
    for (const auto& e : r.events) events.push_back(event_json(e, r.state.sequence));
    if (r.applied) {
      last_update_ = std::chrono::steady_clock::now();
      state_ = std::move(r.state);
      out.response = telemetry_snapshot(state_, settings_);
      out.response["events"] = events;
      if (r.ik_report) out.response["ik"] = to_json(*r.ik_report);
    } else {
      out.response = events.empty() ? event_json({TeleopEvent::Kind::Error, "command rejected"}, state_.sequence)
                                    : events.front();
      out.response["events"] = events;
      if (r.ik_report) out.response["ik"] = to_json(*r.ik_report);
    }
    out.sequence = state_.sequence;
    for (auto& [id, l] : listeners_) l(out.response);
    return out;
  }

  TeleopState state() const {
    std::lock_guard lock(mutex_);
    return state_;
  }

  OrderedJson snapshot() const {
    std::lock_guard lock(mutex_);
    return telemetry_snapshot(state_, settings_);
  }

  const RobotConfig& config() const { return config_; }
  const TeleopSettings& settings() const { return settings_; }

  /// Listeners run under the service lock, in command order.
  int subscribe(Listener l) {
    std::lock_guard lock(mutex_);
    listeners_.emplace_back(next_id_, std::move(l));
    return next_id_++;
  }
  void unsubscribe(int id) {
    std::lock_guard lock(mutex_);
    std::erase_if(listeners_, [id](const auto& p) { return p.first == id; });
  }

 private:
  RobotConfig config_;
  TeleopSettings settings_;
  std::chrono::microseconds min_interval_;
  mutable std::mutex mutex_;
  TeleopState state_;
  std::optional<std::chrono::steady_clock::time_point> last_update_;
  std::vector<std::pair<int, Listener>> listeners_;
  int next_id_ = 1;
};

}  // namespace cppr
