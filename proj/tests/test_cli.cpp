#include <gtest/gtest.h>

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "hanes/cli.hpp"

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult call(std::vector<std::string> args) {
  args.insert(args.begin(), "hanes");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = hanes::cli_main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, ListsBuiltins) {
  const auto r = call({"scenarios"});
  EXPECT_EQ(r.code, 0);
  for (const char* name : {"pursuit_evasion", "leader_follower", "decoupled_lqr"})
    EXPECT_NE(r.out.find(name), std::string::npos);
}

TEST(Cli, UnknownSubcommandIsUsageError) {
  const auto r = call({"frobnicate"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
}

TEST(Cli, CheckPursuitEvasion) {
  const auto r = call({"check", "pursuit_evasion"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("spanning-tree=true"), std::string::npos);
  EXPECT_NE(r.out.find("stabilizable=true"), std::string::npos);
  for (int i = 1; i <= 4; ++i)
    EXPECT_NE(r.out.find("agent " + std::to_string(i) + ": stabilizable=true"), std::string::npos);
  EXPECT_NE(r.out.find("margin="), std::string::npos);
}

TEST(Cli, RunWritesArtifacts) {
  const auto dir = fs::temp_directory_path() / "hanes_cli_run";
  fs::remove_all(dir);
  const auto r = call({"--seed", "7", "--out-dir", dir.string(), "run", "leader_follower"});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* f : {"leader_follower.csv", "leader_follower.csv.events.csv", "leader_follower_summary.json",
                        "leader_follower_states.svg", "leader_follower_errors.svg"})
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_NE(r.out.find("seed=7"), std::string::npos);
}

TEST(Cli, SolvePrintsJson) {
  const auto r = call({"--mode", "coupled-gauss-seidel", "solve", "leader_follower"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j.at("agents").size(), 4u);
  EXPECT_EQ(j.at("mode"), "coupled-gauss-seidel");
}

TEST(Cli, ValidationFailuresExitOne) {
  EXPECT_EQ(call({"--mode", "sideways", "solve", "leader_follower"}).code, 1);
  EXPECT_EQ(call({"--dt", "-1", "run", "--no-plots", "decoupled_lqr"}).code, 1);
  EXPECT_EQ(call({"check", "/nonexistent/scenario.json"}).code, 1);
  EXPECT_EQ(call({"run"}).code, 1);
}

TEST(Cli, RuntimeAbortExitsTwo) {
  const auto dir = fs::temp_directory_path() / "hanes_cli_abort";
  fs::remove_all(dir);
  fs::create_directories(dir);
  auto sc = hanes::decoupled_lqr();
  sc.dynamics[0] = hanes::LinearDynamics::scalar(1.0, 0.0);  // solver precondition fails
  hanes::save_scenario(sc, dir / "bad.json");
  EXPECT_EQ(call({"--no-plots", "--out-dir", dir.string(), "run", (dir / "bad.json").string()}).code, 2);
}
