#pragma once

// Command-line front end. run() never calls exit(); it returns the process
// status so tests can drive it in-process.
//
// Status codes: 0 ok, 2 invalid input, 3 non-convergence, 4 internal fault,
// 64 usage error.

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cppr/config.hpp"
#include "cppr/differential.hpp"
#include "cppr/errors.hpp"
#include "cppr/geometry.hpp"
#include "cppr/ik.hpp"
#include "cppr/json_io.hpp"
#include "cppr/kinematics.hpp"
#include "cppr/pathlab.hpp"
#include "cppr/teleop.hpp"
#include "cppr/teleop_server.hpp"

namespace cppr::cli {

enum Status : int { kOk = 0, kInvalid = 2, kNotConverged = 3, kFault = 4, kUsage = 64 };

namespace detail {

inline std::vector<double> parse_list(const std::string& text, std::size_t expected, const std::string& what) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(cell, &used);
    } catch (const std::exception&) {
      throw InvalidArgument(what + ": \"" + cell + "\" is not a number");
    }
    if (cell.find_first_not_of(" \t", used) != std::string::npos || !std::isfinite(v)) {
      throw InvalidArgument(what + ": \"" + cell + "\" is not a finite number");
    }
    vals.push_back(v);
  }
  if (vals.size() != expected) {
    throw InvalidArgument(what + ": expected " + std::to_string(expected) + " comma-separated values");
  }
  return vals;
}

inline Vec3 parse_vec3(const std::string& text, const std::string& what) {
  const auto v = parse_list(text, 3, what);
  return {v[0], v[1], v[2]};
}

inline Json read_json(const std::string& path, std::istream& in) {
  try {
    if (path == "-") return Json::parse(in);
    std::ifstream f(path);
    if (!f) throw InvalidArgument("cannot open " + path);
    return Json::parse(f);
  } catch (const Json::parse_error& e) {
    throw InvalidArgument(path + ": " + e.what());
  }
}

inline std::string csv_number(double v) { return Json(v).dump(); }

/// Actuation from --q (six values) or an ActuationInput JSON file.
inline ActuationInput read_q(const std::string& q_text, const std::string& input, bool degrees, std::istream& in) {
  if (!q_text.empty() && !input.empty()) throw InvalidArgument("give either --q or --input, not both");
  if (q_text.empty() && input.empty()) throw InvalidArgument("missing --q or --input");
  if (!input.empty()) return actuation_from_json(read_json(input, in));
  const auto v = parse_list(q_text, 6, "--q");
  ActuationInput q{v[0], v[1], v[2], v[3], v[4], v[5]};
  if (degrees) {
    q.phi_p *= kPi / 180.0;
    q.phi_d *= kPi / 180.0;
  }
  return q;
}

inline OrderedJson report_line(const SolverReport& r) { return to_json(r); }

inline void write_report_csv_header(std::ostream& out) {
  out << "q_p,D_p,phi_p,q_d,D_d,phi_d,px,py,pz,rx,ry,rz,position_residual,orientation_residual,converged\n";
}

inline void write_report_csv_row(std::ostream& out, const SolverReport& r) {
  const Vec6 q = r.q.vector();
  for (int i = 0; i < 6; ++i) out << csv_number(q[i]) << ',';
  for (int i = 0; i < 3; ++i) out << csv_number(r.tip.position[i]) << ',';
  for (int i = 0; i < 3; ++i) out << csv_number(r.tip.direction[i]) << ',';
  out << csv_number(r.position_residual) << ',' << csv_number(r.orientation_residual) << ','
      << (r.converged ? "true" : "false") << '\n';
}

}  // namespace detail

/// Runs one command line. `args` excludes the program name.
inline int run(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  using namespace detail;
  CLI::App app{"Kinematics and control workbench for a dual-segment concentric push/pull continuum robot", "cppr"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  bool csv = false;
  bool degrees = false;
  app.add_option("--config", config_path, "Robot config JSON (default: $" + std::string(kConfigEnv) + ", then built-in)");
  app.add_flag("--csv", csv, "Emit CSV instead of JSON");
  app.add_flag("--degrees", degrees, "Read angle inputs in degrees (outputs stay in radians)");

  // design
  auto* design = app.add_subcommand("design", "Slit and stiffness design relations for one segment");
  std::string design_segment = "proximal";
  std::string design_input;
  double alpha = kPi;
  double force = 0.49;
  double youngs = kSteel316LModulus;
  int curve_points = 64;
  design->add_option("--segment", design_segment, "Reference segment")->check(CLI::IsMember({"proximal", "distal"}));
  design->add_option("--input", design_input, "Design JSON {segment, outer_slit, inner_slit} ('-' = stdin)");
  design->add_option("--alpha", alpha, "Central angle of the uncut wall (rad)");
  design->add_option("--force", force, "Tip load (N)");
  design->add_option("--youngs-modulus", youngs, "Young's modulus (MPa)");
  design->add_option("--points", curve_points, "Samples of the CSV deflection curve")->check(CLI::Range(2, 100000));

  // fk
  auto* fk = app.add_subcommand("fk", "Forward kinematics");
  std::string q_text;
  std::string q_input;
  bool with_shape = false;
  double sampling_step = 1.0;
  fk->add_option("--q", q_text, "q_p,D_p,phi_p,q_d,D_d,phi_d");
  fk->add_option("--input", q_input, "ActuationInput JSON ('-' = stdin)");
  fk->add_flag("--shape", with_shape, "Include the sampled backbone");
  fk->add_option("--step", sampling_step, "Backbone sampling step (mm)");

  // ik
  auto* ik = app.add_subcommand("ik", "Constrained inverse kinematics");
  std::string target_text;
  std::string dir_text;
  std::string target_input;
  std::string batch;
  std::string warm_text;
  std::uint64_t seed = 0;
  ik->add_option("--target", target_text, "x,y,z (mm)");
  ik->add_option("--dir", dir_text, "rx,ry,rz tip direction");
  ik->add_option("--input", target_input, "IkTarget JSON {P, R?} ('-' = stdin)");
  ik->add_option("--batch", batch, "CSV of targets x_mm,y_mm,z_mm[,rx,ry,rz]; one report per line");
  ik->add_option("--warm", warm_text, "Initial guess q_p,D_p,phi_p,q_d,D_d,phi_d");
  ik->add_option("--seed", seed, "Restart seed");

  // jacobian
  auto* jac = app.add_subcommand("jacobian", "Finite-difference task Jacobian and rank test");
  double tolerance = 1e-8;
  jac->add_option("--q", q_text, "q_p,D_p,phi_p,q_d,D_d,phi_d");
  jac->add_option("--input", q_input, "ActuationInput JSON ('-' = stdin)");
  jac->add_option("--tolerance", tolerance, "Relative singular-value threshold");

  // singularity-scan
  auto* scan = app.add_subcommand("singularity-scan", "Rank test over a grid of actuation inputs");
  int grid_steps = 3;
  scan->add_option("--steps", grid_steps, "Grid points per actuation input")->check(CLI::Range(1, 50));
  scan->add_option("--tolerance", tolerance, "Relative singular-value threshold");

  // workspace
  auto* ws = app.add_subcommand("workspace", "Monte Carlo workspace volume");
  std::size_t samples = 1000000;
  double voxel = 1.0;
  ws->add_option("--samples", samples, "Number of random inputs")->check(CLI::PositiveNumber);
  ws->add_option("--voxel", voxel, "Voxel pitch (mm)");
  ws->add_option("--seed", seed, "Sampling seed");

  // follow
  auto* follow = app.add_subcommand("follow", "Path following");
  std::string path_file;
  std::string generate;
  std::string mode = "ik";
  std::string save_path;
  follow->add_option("--path", path_file, "Path CSV x_mm,y_mm,z_mm[,rx,ry,rz]");
  follow->add_option("--generate", generate, "Generate a reference path")->check(CLI::IsMember({"spiral", "circle"}));
  follow->add_option("--mode", mode, "ik or rr (resolved rate)")->check(CLI::IsMember({"ik", "rr"}));
  follow->add_option("--seed", seed, "Solver and path seed");
  follow->add_option("--save-path", save_path, "Also write the followed path as CSV");

  // serve
  auto* serve = app.add_subcommand("serve", "Teleoperation service (HTTP + WebSocket)");
  unsigned short port = 8080;
  std::string address = "127.0.0.1";
  int heartbeat_ms = 1000;
  serve->add_option("--port", port, "TCP port (0 = any free port)");
  serve->add_option("--address", address, "Bind address");
  serve->add_option("--heartbeat-ms", heartbeat_ms, "Telemetry heartbeat period")->check(CLI::Range(10, 3600000));
  serve->add_option("--seed", seed, "Seed for tip-mode IK restarts");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    err << sub->help();
    return kUsage;
  }
  bool seed_given = false;
  for (auto* sub : {ik, ws, follow, serve}) seed_given = seed_given || sub->count("--seed") > 0;

  try {
    const RobotConfig config = resolve_config(config_path.empty() ? std::nullopt : std::optional(config_path));
    const Robot& robot = config.robot;
    const ActuationLimits& limits = config.limits;
    SolverOptions solver = config.solver;
    if (seed_given) solver.seed = seed;

    if (*design) {
      const bool proximal = design_segment == "proximal";
      SegmentSpec seg = proximal ? robot.proximal : robot.distal;
      SlitPair slits = reference_slits(proximal);
      if (degrees) alpha *= kPi / 180.0;
      if (!design_input.empty()) {
        const Json doc = read_json(design_input, in);
        json_detail::expect_object(doc, "design");
        json_detail::only_keys(doc, {"segment", "outer_slit", "inner_slit", "alpha", "force", "youngs_modulus", "results"},
                               "design");
        if (doc.contains("segment")) seg = segment_from_json(doc.at("segment"), "design.segment");
        if (doc.contains("outer_slit")) slits.outer = slit_from_json(doc.at("outer_slit"), "design.outer_slit");
        if (doc.contains("inner_slit")) slits.inner = slit_from_json(doc.at("inner_slit"), "design.inner_slit");
        alpha = json_detail::number_or(doc, "alpha", alpha, "design");
        force = json_detail::number_or(doc, "force", force, "design");
        youngs = json_detail::number_or(doc, "youngs_modulus", youngs, "design");
      }
      seg.validate("design.segment");
      slits.outer.validate("design.outer_slit");
      slits.inner.validate("design.inner_slit");
      const double r_od = seg.outer_tube.outer_diameter / 2.0;
      const double r_id = seg.outer_tube.inner_diameter / 2.0;
      const double length = seg.steerable_length();

      if (csv) {
        out << "alpha_rad,I_mm4,w_mm\n";
        for (int k = 1; k <= curve_points; ++k) {
          const double a = kTwoPi * k / curve_points;
          const double i_mm4 = second_moment(a, r_od, r_id);
          out << csv_number(a) << ',' << csv_number(i_mm4) << ','
              << csv_number(cantilever_deflection(force, length, youngs, i_mm4)) << '\n';
        }
        return kOk;
      }
      const double i_mm4 = second_moment(alpha, r_od, r_id);
      const SlitCount outer_pitch = slit_count_from_pitch(length, slits.outer.slit_height, slits.outer.gap_distance);
      const SlitCount inner_pitch =
          slit_count_from_pitch(seg.inner_tube.steerable_length, slits.inner.slit_height, slits.inner.gap_distance);
      OrderedJson results{
          {"max_bend_from_outer_slits", max_bend_from_outer_slits(slits.outer, seg)},
          {"slit_relation_residual", slit_relation_residual(slits.outer, slits.inner, seg)},
          {"solved_inner_count", solve_inner_slit_count(slits.outer, slits.inner, seg)},
          {"outer_count_from_pitch", {{"count", outer_pitch.count}, {"quotient", outer_pitch.quotient}}},
          {"inner_count_from_pitch", {{"count", inner_pitch.count}, {"quotient", inner_pitch.quotient}}},
          {"second_moment", i_mm4},
          {"deflection", i_mm4 > 0.0 ? OrderedJson(cantilever_deflection(force, length, youngs, i_mm4))
                                     : OrderedJson(nullptr)}};
      OrderedJson doc{{"segment", to_json(seg)},
                      {"outer_slit", to_json(slits.outer)},
                      {"inner_slit", to_json(slits.inner)},
                      {"alpha", alpha},
                      {"force", force},
                      {"youngs_modulus", youngs},
                      {"results", results}};
      out << doc.dump() << '\n';
      return kOk;
    }

    if (*fk) {
      const ActuationInput q = read_q(q_text, q_input, degrees, in);
      const ForwardResult res = forward_kinematics(q, robot, limits, sampling_step);
      if (csv) {
        write_shape_csv(out, res.shape);
        return kOk;
      }
      OrderedJson j = to_json(res.tip);
      if (with_shape) j["shape"] = shape_to_json(res.shape);
      out << j.dump() << '\n';
      return kOk;
    }

    if (*ik) {
      std::optional<ActuationInput> warm;
      if (!warm_text.empty()) warm = read_q(warm_text, "", degrees, in);
      if (!batch.empty()) {
        if (!target_text.empty() || !target_input.empty()) throw InvalidArgument("--batch excludes --target/--input");
        std::ifstream f(batch);
        if (!f) throw InvalidArgument("cannot open " + batch);
        const PathSpec targets = read_path_csv(f, "targets", 1);
        if (csv) write_report_csv_header(out);
        bool all = true;
        for (std::size_t i = 0; i < targets.waypoints.size(); ++i) {
          const auto& w = targets.waypoints[i];
          const SolverReport rep = solve_ik({w.position, w.direction}, robot, limits, solver, warm);
          all = all && rep.converged;
          if (csv) {
            write_report_csv_row(out, rep);
          } else {
            out << report_line(rep).dump() << '\n';
          }
        }
        return all ? kOk : kNotConverged;
      }
      IkTarget target;
      if (!target_input.empty()) {
        if (!target_text.empty() || !dir_text.empty()) throw InvalidArgument("--input excludes --target/--dir");
        target = target_from_json(read_json(target_input, in));
      } else {
        if (target_text.empty()) throw InvalidArgument("missing --target, --input or --batch");
        target.position = parse_vec3(target_text, "--target");
        if (!dir_text.empty()) {
          const Vec3 d = parse_vec3(dir_text, "--dir");
          if (!(d.norm() > 0.0)) throw InvalidArgument("--dir: zero vector");
          target.direction = d.normalized();
        }
      }
      const SolverReport rep = solve_ik(target, robot, limits, solver, warm);
      if (csv) {
        write_report_csv_header(out);
        write_report_csv_row(out, rep);
      } else {
        out << report_line(rep).dump() << '\n';
      }
      return rep.converged ? kOk : kNotConverged;
    }

    if (*jac) {
      const ActuationInput q = read_q(q_text, q_input, degrees, in);
      validate_actuation(q, robot, limits);
      const JacobianMatrix j = jacobian_fd(q, robot, FdSteps{}, limits);
      const SingularityCheck chk = detect_singularity(j, tolerance);
      if (csv) {
        out << "row,d_q_p,d_D_p,d_phi_p,d_q_d,d_D_d,d_phi_d\n";
        const char* rows[] = {"P_x", "P_y", "P_z", "R_x", "R_y", "R_z"};
        for (int r = 0; r < 6; ++r) {
          out << rows[r];
          for (int c = 0; c < 6; ++c) out << ',' << csv_number(j(r, c));
          out << '\n';
        }
        return kOk;
      }
      OrderedJson rows = OrderedJson::array();
      for (int r = 0; r < 6; ++r) {
        OrderedJson row = OrderedJson::array();
        for (int c = 0; c < 6; ++c) row.push_back(j(r, c));
        rows.push_back(row);
      }
      const Eigen::JacobiSVD<JacobianMatrix> svd(j);
      OrderedJson sv = OrderedJson::array();
      for (int i = 0; i < 6; ++i) sv.push_back(svd.singularValues()[i]);
      OrderedJson doc{{"Q", to_json(q)},
                      {"J", rows},
                      {"singular_values", sv},
                      {"sigma_min", chk.smallest_singular_value},
                      {"is_singular", chk.is_singular}};
      out << doc.dump() << '\n';
      return kOk;
    }

    if (*scan) {
      auto axis = [&](double lo, double hi, bool periodic) {
        std::vector<double> v;
        for (int k = 0; k < grid_steps; ++k) {
          if (grid_steps == 1) {
            v.push_back(lo);
          } else {
            v.push_back(lo + (hi - lo) * k / (periodic ? grid_steps : grid_steps - 1));
          }
        }
        return v;
      };
      const auto qp = axis(0.0, limits.q_p_max, false);
      const auto dp = axis(0.0, pull_bound(robot.proximal, limits.D_max), false);
      const auto pp = axis(0.0, kTwoPi, true);
      const auto qd = axis(limits.q_d_min, limits.q_d_max, false);
      const auto dd = axis(0.0, pull_bound(robot.distal, limits.D_max), false);
      const auto pd = axis(0.0, kTwoPi, true);
      if (csv) out << "q_p,D_p,phi_p,q_d,D_d,phi_d,sigma_min,is_singular\n";
      for (double a : qp)
        for (double b : dp)
          for (double c : pp)
            for (double d : qd)
              for (double e : dd)
                for (double f : pd) {
                  const ActuationInput q = project_to_limits({a, b, c, d, e, f}, robot, limits);
                  const SingularityCheck chk = detect_singularity(jacobian_fd(q, robot, FdSteps{}, limits), tolerance);
                  if (csv) {
                    const Vec6 v = q.vector();
                    for (int i = 0; i < 6; ++i) out << csv_number(v[i]) << ',';
                    out << csv_number(chk.smallest_singular_value) << ',' << (chk.is_singular ? "true" : "false")
                        << '\n';
                  } else {
                    OrderedJson row{{"Q", to_json(q)},
                                    {"sigma_min", chk.smallest_singular_value},
                                    {"is_singular", chk.is_singular}};
                    out << row.dump() << '\n';
                  }
                }
      return kOk;
    }

    if (*ws) {
      const std::uint64_t ws_seed = seed_given ? seed : 1;
      const WorkspaceEstimate est = workspace_volume(robot, limits, samples, ws_seed, voxel);
      if (csv) {
        out << "volume_cm3,occupied_voxels,samples,voxel_mm,seed\n"
            << csv_number(est.volume_cm3) << ',' << est.occupied_voxels << ',' << est.samples << ','
            << csv_number(voxel) << ',' << ws_seed << '\n';
        return kOk;
      }
      OrderedJson doc{{"volume_cm3", est.volume_cm3},
                      {"occupied_voxels", est.occupied_voxels},
                      {"samples", est.samples},
                      {"voxel_mm", voxel},
                      {"seed", ws_seed}};
      out << doc.dump() << '\n';
      return kOk;
    }

    if (*follow) {
      if (path_file.empty() == generate.empty()) throw InvalidArgument("give exactly one of --path or --generate");
      ReachabilityCheck check;
      check.robot = robot;
      check.limits = limits;
      check.solver = solver;
      PathSpec path;
      if (!path_file.empty()) {
        std::ifstream f(path_file);
        if (!f) throw InvalidArgument("cannot open " + path_file);
        path = read_path_csv(f, path_file);
      } else if (generate == "spiral") {
        SpiralParams sp;
        if (seed_given) sp.seed = seed;
        path = generate_spiral(sp, check);
      } else {
        path = generate_circle(CircleParams{}, check);
      }
      if (!save_path.empty()) {
        std::ofstream f(save_path);
        if (!f) throw InvalidArgument("cannot write " + save_path);
        write_path_csv(f, path);
      }
      FollowOptions fo;
      fo.mode = mode == "rr" ? FollowMode::ResolvedRate : FollowMode::Ik;
      fo.solver = solver;
      const FollowTrace trace = follow_path(path, robot, limits, fo);
      if (csv) {
        out << "index,x_mm,y_mm,z_mm,achieved_x_mm,achieved_y_mm,achieved_z_mm,residual,iterations,converged,singular\n";
        for (std::size_t i = 0; i < trace.records.size(); ++i) {
          const auto& r = trace.records[i];
          out << i;
          for (int k = 0; k < 3; ++k) out << ',' << csv_number(r.target.position[k]);
          for (int k = 0; k < 3; ++k) out << ',' << csv_number(r.achieved.position[k]);
          out << ',' << csv_number(r.residual) << ',' << r.iterations << ',' << (r.converged ? "true" : "false")
              << ',' << (r.singular ? "true" : "false") << '\n';
        }
      } else {
        for (std::size_t i = 0; i < trace.records.size(); ++i) out << to_json(trace.records[i], i).dump() << '\n';
        OrderedJson summary{{"type", "summary"}};
        summary.update(summary_json(trace, fo.mode));
        out << summary.dump() << '\n';
      }
      return trace.failures == 0 ? kOk : kNotConverged;
    }

    if (*serve) {
      TeleopService service(RobotConfig{robot, limits, solver});
      TeleopServer server(service, {address, port, std::chrono::milliseconds(heartbeat_ms)});
      out << OrderedJson{{"listening", address}, {"port", server.port()}}.dump() << std::endl;
      server.stop_on_signals();
      server.run();
      return kOk;
    }
  } catch (const PathGenerationError& e) {
    err << "error: " << e.what() << '\n';
    return kNotConverged;
  } catch (const std::logic_error& e) {
    // InvalidArgument, LimitViolation, NestingViolation
    err << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const Json::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kFault;
  }
  return kUsage;
}

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  return run(args, std::cin, out, err);
}

}  // namespace cppr::cli
