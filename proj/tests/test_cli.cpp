#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cppr/cli.hpp"

using namespace cppr;

namespace {

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun invoke(const std::vector<std::string>& args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string temp_file(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("cppr_cli_" + name);
  std::ofstream(path) << content;
  return path.string();
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::istringstream is(s);
  for (std::string l; std::getline(is, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST(Cli, FkStraightPose) {
  const CliRun r = invoke({"fk", "--q", "0,0,0,0,0,0"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "{\"P\":[0.0,0.0,50.0],\"R\":[0.0,0.0,1.0]}\n");
}

TEST(Cli, FkDegreesMatchesRadians) {
  const CliRun deg = invoke({"--degrees", "fk", "--q", "1,1.5,90,2,1,180"});
  const CliRun rad = invoke({"fk", "--q", "1,1.5," + std::to_string(kPi / 2) + ",2,1," + std::to_string(kPi)});
  ASSERT_EQ(deg.code, 0);
  const Json a = Json::parse(deg.out);
  const Json b = Json::parse(rad.out);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(a["P"][i].get<double>(), b["P"][i].get<double>(), 1e-5);
}

TEST(Cli, FkShapeCsv) {
  const CliRun r = invoke({"--csv", "fk", "--q", "0,0,0,0,0,0", "--step", "25"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(lines(r.out).front(), "x_mm,y_mm,z_mm,segment_label");
  EXPECT_EQ(lines(r.out).size(), 5u);
}

TEST(Cli, ExitCodes) {
  EXPECT_EQ(invoke({"fk", "--q", "11,0,0,0,0,0"}).code, 2);       // limit violation
  EXPECT_EQ(invoke({"fk", "--q", "1,2,3"}).code, 2);              // wrong arity
  EXPECT_EQ(invoke({"fk", "--input", "-"}, "{\"q_p\":0}").code, 2);
  EXPECT_EQ(invoke({"ik", "--target", "200,0,0", "--seed", "3"}).code, 3);
  EXPECT_EQ(invoke({"fk", "--bogus"}).code, 64);
  EXPECT_EQ(invoke({"teleport"}).code, 64);
  EXPECT_EQ(invoke({}).code, 64);
  const CliRun help = invoke({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("singularity-scan"), std::string::npos);
  const CliRun bad = invoke({"ik", "--seed", "x"});
  EXPECT_EQ(bad.code, 64);
  EXPECT_NE(bad.err.find("--target"), std::string::npos);  // subcommand help follows the error
}

TEST(Cli, FkThenIkRoundTrip) {
  const CliRun fk = invoke({"fk", "--q", "2,1.2,0.7,3,0.8,1.9"});
  ASSERT_EQ(fk.code, 0);
  const CliRun ik = invoke({"ik", "--input", "-"}, fk.out);
  ASSERT_EQ(ik.code, 0) << ik.err;
  const Json rep = Json::parse(ik.out);
  EXPECT_TRUE(rep["converged"].get<bool>());
  EXPECT_LE(rep["position_residual"].get<double>(), 0.01);
  // Reported Q reproduces the tip.
  const Json q = rep["Q"];
  std::string csv;
  for (const char* k : {"q_p", "D_p", "phi_p", "q_d", "D_d", "phi_d"}) csv += (csv.empty() ? "" : ",") + q[k].dump();
  const Json tip = Json::parse(invoke({"fk", "--q", csv}).out);
  const Json want = Json::parse(fk.out);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(tip["P"][i].get<double>(), want["P"][i].get<double>(), 0.01);
}

TEST(Cli, IkIsDeterministic) {
  const std::vector<std::string> args{"ik", "--target", "20,-8,40", "--dir", "0.4,-0.3,0.8", "--seed", "5"};
  EXPECT_EQ(invoke(args).out, invoke(args).out);
}

TEST(Cli, IkBatchEmitsOneLinePerTarget) {
  const std::string f = temp_file("batch.csv", "0,0,50\n17.676,0,45.969,0.5,0,0.866\n5,0,49\n");
  const CliRun r = invoke({"ik", "--batch", f});
  EXPECT_EQ(r.code, 0) << r.err;
  const auto ls = lines(r.out);
  ASSERT_EQ(ls.size(), 3u);
  for (const auto& l : ls) EXPECT_TRUE(Json::parse(l)["converged"].get<bool>());
}

TEST(Cli, ConfigFlagAndEnvironment) {
  Json j = Json::parse(to_json(RobotConfig{}).dump());
  j["limits"]["q_p_max"] = 20.0;
  const std::string path = temp_file("cfg.json", j.dump());
  EXPECT_EQ(invoke({"fk", "--q", "15,0,0,0,0,0"}).code, 2);
  EXPECT_EQ(invoke({"--config", path, "fk", "--q", "15,0,0,0,0,0"}).code, 0);
  setenv(kConfigEnv, path.c_str(), 1);
  const CliRun r = invoke({"fk", "--q", "15,0,0,0,0,0"});
  unsetenv(kConfigEnv);
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(Json::parse(r.out)["P"][2], 65.0);
  EXPECT_EQ(invoke({"--config", "/nonexistent.json", "fk", "--q", "0,0,0,0,0,0"}).code, 2);
}

TEST(Cli, Jacobian) {
  const CliRun r = invoke({"jacobian", "--q", "0,0,0,0,0,0"});
  ASSERT_EQ(r.code, 0);
  const Json j = Json::parse(r.out);
  EXPECT_TRUE(j["is_singular"].get<bool>());
  EXPECT_EQ(j["J"].size(), 6u);
  EXPECT_EQ(j["singular_values"].size(), 6u);
  EXPECT_FALSE(Json::parse(invoke({"jacobian", "--q", "2,1,0.3,3,0.9,1.4"}).out)["is_singular"].get<bool>());
}

TEST(Cli, SingularityScan) {
  const CliRun ndjson = invoke({"singularity-scan", "--steps", "1"});
  ASSERT_EQ(ndjson.code, 0);
  ASSERT_EQ(lines(ndjson.out).size(), 1u);
  EXPECT_TRUE(Json::parse(ndjson.out)["is_singular"].get<bool>());
  const CliRun csv = invoke({"--csv", "singularity-scan", "--steps", "2"});
  ASSERT_EQ(csv.code, 0);
  const auto ls = lines(csv.out);
  EXPECT_EQ(ls.front(), "q_p,D_p,phi_p,q_d,D_d,phi_d,sigma_min,is_singular");
  EXPECT_EQ(ls.size(), 1u + 64u);
}

TEST(Cli, DesignOutputs) {
  const CliRun r = invoke({"design", "--segment", "proximal", "--alpha", "3.14159265358979"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_TRUE(j.contains("results"));
  EXPECT_TRUE(j["results"].contains("second_moment"));
  const CliRun csv = invoke({"--csv", "design", "--points", "10"});
  ASSERT_EQ(csv.code, 0);
  EXPECT_EQ(lines(csv.out).front(), "alpha_rad,I_mm4,w_mm");
  EXPECT_EQ(lines(csv.out).size(), 11u);
}

TEST(Cli, SmallWorkspace) {
  const CliRun a = invoke({"workspace", "--samples", "20000", "--seed", "4"});
  ASSERT_EQ(a.code, 0);
  const Json j = Json::parse(a.out);
  EXPECT_EQ(j["samples"], 20000);
  EXPECT_GT(j["volume_cm3"].get<double>(), 0.0);
  EXPECT_EQ(a.out, invoke({"workspace", "--samples", "20000", "--seed", "4"}).out);
}

TEST(Cli, FollowPathFile) {
  const std::string saved = (std::filesystem::temp_directory_path() / "cppr_cli_saved.csv").string();
  const CliRun gen = invoke({"follow", "--generate", "spiral", "--save-path", saved});
  ASSERT_EQ(gen.code, 0) << gen.err;
  const auto ls = lines(gen.out);
  ASSERT_EQ(ls.size(), 13u);
  const Json summary = Json::parse(ls.back());
  EXPECT_EQ(summary["type"], "summary");
  EXPECT_LE(summary["rmse"].get<double>(), 0.1);

  const CliRun again = invoke({"follow", "--path", saved});
  ASSERT_EQ(again.code, 0) << again.err;
  EXPECT_EQ(lines(again.out).size(), 13u);
  EXPECT_EQ(invoke({"follow"}).code, 2);
  EXPECT_EQ(invoke({"follow", "--path", "/nonexistent.csv"}).code, 2);
}
