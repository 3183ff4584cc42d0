#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <regex>
#include <sstream>
#include <string>

#include "hanes/hanes_runtime.hpp"
#include "hanes/io.hpp"
#include "hanes/scenarios.hpp"

using namespace hanes;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("hanes_io_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

bool any_contains(const std::vector<std::string>& v, const std::string& a, const std::string& b = "") {
  return std::any_of(v.begin(), v.end(), [&](const std::string& s) {
    return s.find(a) != std::string::npos && s.find(b) != std::string::npos;
  });
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(BuiltinPursuitEvasion, Constants) {
  const auto sc = builtin_pursuit_evasion();
  EXPECT_NO_THROW(sc.validate());
  EXPECT_EQ(sc.t_final, 3.0);
  EXPECT_EQ(sc.dt, 0.01);
  EXPECT_EQ(sc.x0[0](0), 2.0);
  EXPECT_EQ(sc.x0[1](0), 1.8);
  EXPECT_EQ(sc.x0[2](0), 1.5);
  EXPECT_EQ(sc.x0[3](0), 1.2);
  EXPECT_EQ(sc.dynamics[0].A(0, 0), -1.0);
  EXPECT_EQ(sc.dynamics[2].A(0, 0), -2.0);
  for (const auto& d : sc.dynamics) EXPECT_EQ(d.B(0, 0), 1.0);
  EXPECT_EQ(sc.weights[0].R(0, 0), 1.304);
  EXPECT_EQ(sc.weights[1].R(0, 0), 1.5);
  EXPECT_EQ(sc.weights[2].R(0, 0), 4.0);
  EXPECT_EQ(sc.weights[3].R(0, 0), 3.5);
  EXPECT_EQ(sc.weights[0].role, Role::Minimizer);
  EXPECT_EQ(sc.weights[2].role, Role::Maximizer);
  EXPECT_EQ(sc.weights[3].role, Role::Maximizer);
  for (const auto& w : sc.weights) EXPECT_EQ(w.jump_penalty, 0.4481);
  EXPECT_EQ(sc.hybrid.jump_threshold, 1.0);
  EXPECT_EQ(sc.hybrid.reset_lo, 0.3);
  EXPECT_EQ(sc.hybrid.reset_hi, 0.5);
  // pursuer-pursuer weight |L_p| off-diagonal, A_pe, A_ep, |L_e|
  const auto& a = sc.graph.adjacency();
  EXPECT_EQ(a(0, 1), 0.5);
  EXPECT_EQ(a(2, 3), 0.3);
  EXPECT_EQ(a(0, 2), 1.0);
  EXPECT_EQ(a(0, 3), 0.7);
  EXPECT_EQ(a(1, 2), 0.8);
  EXPECT_EQ(a(2, 0), 0.9);
  EXPECT_EQ(a(2, 1), 0.5);
  EXPECT_EQ(a(3, 0), 0.6);
  EXPECT_EQ(a(3, 2), 0.3);
  EXPECT_EQ(sc.diagnostics.q_joint(2, 3), 0.3);
  EXPECT_EQ(sc.diagnostics.q_joint(3, 3), 1.5);
  EXPECT_EQ(sc.weights[2].Q(0, 0), 1.5);
}

TEST(BuiltinLeaderFollower, Constants) {
  const auto sc = builtin_leader_follower();
  EXPECT_NO_THROW(sc.validate());
  ASSERT_EQ(sc.graph.leaders().size(), 1u);
  EXPECT_EQ(sc.graph.leaders()[0] + 1, 2);  // second agent, 1-based
  ASSERT_TRUE(sc.fixed_gains.has_value());
  EXPECT_EQ(sc.fixed_gains->k_consensus, 0.8);
  EXPECT_EQ(sc.fixed_gains->k_tracking, 1.2);
  ASSERT_TRUE(sc.reference.has_value());
  EXPECT_EQ(sc.reference->amplitude, 2.0);
  EXPECT_EQ(sc.reference->decay_rate, 0.3);
  EXPECT_EQ(sc.reference->angular_frequency, 0.5);
  EXPECT_EQ(sc.diagnostics.p_hybrid, 0.4);
  EXPECT_EQ(sc.diagnostics.gamma, (std::vector<double>{0.8, 0.9, 0.85, 0.75}));
  EXPECT_EQ(sc.diagnostics.beta, 0.95);
  EXPECT_EQ(sc.diagnostics.gamma_base, 0.5);
  EXPECT_EQ(sc.diagnostics.q_joint(1, 1), 1.5);
  EXPECT_EQ(sc.diagnostics.q_joint(1, 2), 0.4);
  EXPECT_EQ(sc.t_final, 25.0);
  EXPECT_EQ(sc.x0[1](0), 2.0);
  ASSERT_EQ(sc.hybrid.scheduled_events.size(), 1u);
  EXPECT_EQ(sc.hybrid.scheduled_events[0].time, 2.5);
  EXPECT_EQ(sc.hybrid.scheduled_events[0].agent, 1);
}

TEST(ScenarioJson, RoundTripEveryBuiltin) {
  for (const auto& name : builtin_names()) {
    const auto sc = *builtin_scenario(name);
    const std::string text = serialize_scenario(sc);
    const auto back = parse_scenario(text);
    ASSERT_TRUE(back.ok()) << name << ": " << (back.violations.empty() ? "" : back.violations.front());
    EXPECT_TRUE(*back.config == sc) << name;
    EXPECT_EQ(serialize_scenario(*back.config), text) << name;
  }
}

TEST(ScenarioJson, FileRoundTrip) {
  const auto dir = scratch_dir("file");
  const auto sc = builtin_leader_follower();
  save_scenario(sc, dir / "lf.json");
  const auto back = load_scenario(dir / "lf.json");
  ASSERT_TRUE(back.ok());
  EXPECT_TRUE(*back.config == sc);
  EXPECT_TRUE(resolve_scenario((dir / "lf.json").string()) == sc);
  EXPECT_FALSE(load_scenario(dir / "missing.json").ok());
}

TEST(ScenarioJson, InvertedResetIntervalNamed) {
  auto j = scenario_to_json(builtin_pursuit_evasion());
  j["hybrid"]["reset_interval"] = {0.5, 0.3};
  const auto load = scenario_from_json(j);
  EXPECT_FALSE(load.ok());
  EXPECT_TRUE(any_contains(load.violations, "reset_interval"));
}

TEST(ScenarioJson, NegativeMinimizerRRejected) {
  auto j = scenario_to_json(builtin_pursuit_evasion());
  j["agents"][0]["R"] = {{-1.304}};
  const auto load = scenario_from_json(j);
  EXPECT_FALSE(load.ok());
  EXPECT_TRUE(any_contains(load.violations, "agents[0]", "positive definite"));
}

TEST(ScenarioJson, ReportsEveryViolation) {
  auto j = scenario_to_json(builtin_leader_follower());
  j["agents"][0]["R"] = {{-1.0}};
  j["agents"][2]["Q"] = {{-2.0}};
  j["hybrid"]["reset_interval"] = {0.5, 0.3};
  j["dt"] = -0.01;
  const auto load = scenario_from_json(j);
  EXPECT_GE(load.violations.size(), 4u);
  EXPECT_TRUE(any_contains(load.violations, "agents[0]"));
  EXPECT_TRUE(any_contains(load.violations, "agents[2]"));
  EXPECT_TRUE(any_contains(load.violations, "dt"));
}

TEST(ScenarioJson, SyntaxAndSchemaErrors) {
  EXPECT_FALSE(parse_scenario("{not json").ok());
  auto j = scenario_to_json(builtin_leader_follower());
  j["schema"] = "hanes-scenario/99";
  EXPECT_TRUE(any_contains(scenario_from_json(j).violations, "schema"));
  j = scenario_to_json(builtin_leader_follower());
  j.erase("agents");
  EXPECT_TRUE(any_contains(scenario_from_json(j).violations, "agents"));
  EXPECT_THROW(resolve_scenario("no_such_builtin"), InvalidArgument);
}

TEST(ScenarioConfig, ReferenceDecayMustBeNonnegative) {
  auto sc = builtin_leader_follower();
  sc.reference->decay_rate = -0.1;
  EXPECT_TRUE(any_contains(sc.violations(), "reference.decay_rate"));
}

TEST(TrajectoryCsv, EmptyIsHeaderOnly) {
  TrajectoryRecord traj;
  const std::string csv = trajectory_csv(traj);
  EXPECT_EQ(count_lines(csv), 2u);  // comment + header
  EXPECT_NE(csv.find("\nt,j,agent,x,u,e,V\n"), std::string::npos);
  EXPECT_EQ(events_csv(traj), "t,j,agent,kind,pre_state,post_state\n");
}

TEST(TrajectoryCsv, RowCountMatchesHorizon) {
  const auto res = run(builtin_pursuit_evasion(), HanesConfig{});
  const std::string csv = trajectory_csv(res.trajectory);
  const std::size_t per_agent = static_cast<std::size_t>(std::floor(3.0 / 0.01 + 1e-9)) + 1;
  EXPECT_EQ(count_lines(csv), 2 + 4 * per_agent);
}

TEST(TrajectoryCsv, PursuitEvasionHasTwoJumpRows) {
  const auto res = run(builtin_pursuit_evasion(), HanesConfig{});
  const std::string ev = events_csv(res.trajectory);
  std::size_t n = 0;
  for (std::size_t pos = 0; (pos = ev.find(",threshold-jump,", pos)) != std::string::npos; ++pos) ++n;
  EXPECT_EQ(n, 2u);
  EXPECT_NE(ev.find(",1,threshold-jump,"), std::string::npos);
  EXPECT_NE(ev.find(",2,threshold-jump,"), std::string::npos);
}

TEST(TrajectoryCsv, ByteIdenticalAcrossRuns) {
  const auto dir = scratch_dir("csv");
  export_csv(run(builtin_pursuit_evasion(), HanesConfig{}).trajectory, dir / "a.csv");
  export_csv(run(builtin_pursuit_evasion(), HanesConfig{}).trajectory, dir / "b.csv");
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  EXPECT_EQ(slurp(events_path(dir / "a.csv")), slurp(events_path(dir / "b.csv")));
  EXPECT_FALSE(slurp(dir / "a.csv").empty());
}

TEST(Summary, LeaderFollowerConverged) {
  const auto res = run(builtin_leader_follower(), HanesConfig{});
  const auto j = summary_to_json(res.summary, res.solution);
  EXPECT_TRUE(j.at("converged").get<bool>());
  EXPECT_LE(j.at("convergence_time").get<double>(), 8.0);
}

TEST(Summary, RoundTripsLosslessly) {
  HanesConfig cfg;
  cfg.solver.mode = SolverMode::CoupledGaussSeidel;
  const auto sc = builtin_pursuit_evasion();
  const auto res = run(sc, cfg);
  const auto cond = check_conditions(sc, cfg.solver);
  const std::string text = serialize_summary(res.summary, res.solution, cond);
  const auto doc = parse_summary(text);
  EXPECT_EQ(doc.summary, res.summary);
  ASSERT_TRUE(doc.solution.has_value());
  EXPECT_EQ(doc.solution->K.size(), 4u);
  EXPECT_EQ(doc.solution->K[0](0, 0), res.solution->K[0](0, 0));
  ASSERT_TRUE(doc.conditions.has_value());
  EXPECT_EQ(serialize_summary(doc.summary, doc.solution, doc.conditions), text);
}

TEST(Summary, SolverFailureHasErrorAndNoGains) {
  auto sc = builtin_leader_follower();
  sc.dynamics[0] = LinearDynamics::scalar(1.0, 0.0);
  sc.hybrid.scheduled_events.clear();
  HanesConfig cfg;
  cfg.t_max = 0.5;
  const auto res = run(sc, cfg);
  const auto j = summary_to_json(res.summary, res.solution);
  EXPECT_TRUE(j.at("solver").at("error").is_string());
  EXPECT_TRUE(j.at("solution").is_null());
  const auto doc = parse_summary(j.dump());
  EXPECT_EQ(doc.summary, res.summary);
  EXPECT_FALSE(doc.solution.has_value());
}

TEST(Plots, PursuitEvasionMarkersAtThreshold) {
  const auto dir = scratch_dir("svg");
  const auto res = run(builtin_pursuit_evasion(), HanesConfig{});
  PlotOptions opt;
  opt.threshold = 1.0;
  const auto files = render_plots(res.trajectory, (dir / "pe").string(), opt);
  ASSERT_EQ(files.size(), 4u);
  const std::string svg = slurp(dir / "pe_states.svg");
  const std::regex marker(R"re(class="jump"[^>]*data-y="([-0-9.eE+]+)")re");
  int n = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), marker); it != std::sregex_iterator(); ++it) {
    EXPECT_NEAR(std::stod((*it)[1].str()), 1.0, 0.02);
    ++n;
  }
  EXPECT_EQ(n, 2);
}

TEST(Plots, DeterministicBytes) {
  const auto dir = scratch_dir("svg_det");
  const auto res = run(builtin_pursuit_evasion(), HanesConfig{});
  render_plots(res.trajectory, (dir / "a").string());
  render_plots(res.trajectory, (dir / "b").string());
  for (const char* suffix : {"_states.svg", "_controls.svg", "_errors.svg", "_values.svg"})
    EXPECT_EQ(slurp(dir / (std::string("a") + suffix)), slurp(dir / (std::string("b") + suffix)));
}

TEST(Plots, EmptySubsetOrTrajectoryRejected) {
  const auto dir = scratch_dir("svg_err");
  const auto res = run(builtin_pursuit_evasion(), HanesConfig{});
  PlotOptions opt;
  opt.agents = std::vector<int>{};
  EXPECT_THROW(render_plots(res.trajectory, (dir / "x").string(), opt), InvalidArgument);
  EXPECT_THROW(render_plots(TrajectoryRecord{}, (dir / "y").string()), InvalidArgument);
}
