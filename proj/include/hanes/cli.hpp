#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "hanes/errors.hpp"
#include "hanes/hanes_runtime.hpp"
#include "hanes/io.hpp"
#include "hanes/nash_solver.hpp"
#include "hanes/oracle.hpp"
#include "hanes/scenarios.hpp"

namespace hanes {

struct CliOptions {
  std::string scenario;
  std::optional<std::uint64_t> seed;
  std::optional<double> dt;
  std::optional<double> t_final;
  double epsilon = 0.05;
  std::string mode = "decoupled";
  std::string out_dir = "out";
  bool no_plots = false;
  bool early_stop = false;
  bool on_event = false;
};

namespace detail {

inline ScenarioConfig cli_scenario(const CliOptions& o) {
  ScenarioConfig sc = resolve_scenario(o.scenario);
  if (o.seed) sc.seed = *o.seed;
  if (o.dt) sc.dt = *o.dt;
  if (o.t_final) sc.t_final = *o.t_final;
  sc.validate();
  return sc;
}

inline HanesConfig cli_config(const CliOptions& o) {
  HanesConfig cfg;
  cfg.epsilon = o.epsilon;
  auto mode = solver_mode_from_string(o.mode);
  if (!mode) throw InvalidArgument("unknown --mode '" + o.mode + "'");
  cfg.solver.mode = *mode;
  cfg.early_stop = o.early_stop;
  cfg.resolve = o.on_event ? ResolvePolicy::OnEvent : ResolvePolicy::OnceAtStart;
  cfg.validate();
  return cfg;
}

inline const char* yes(bool b) { return b ? "true" : "false"; }

inline int cmd_run(const CliOptions& o, std::ostream& out) {
  const ScenarioConfig sc = cli_scenario(o);
  const HanesConfig cfg = cli_config(o);
  const RunResult res = run(sc, cfg);
  const std::filesystem::path dir(o.out_dir);
  std::filesystem::create_directories(dir);
  const auto csv = dir / (sc.name + ".csv");
  export_csv(res.trajectory, csv);
  std::optional<ConditionReport> cond;
  cond = check_conditions(sc, cfg.solver);
  export_summary(res.summary, res.solution, dir / (sc.name + "_summary.json"), cond);
  if (!o.no_plots) {
    PlotOptions po;
    if (!sc.hybrid.enabled_agents.empty()) po.threshold = sc.hybrid.jump_threshold;
    render_plots(res.trajectory, (dir / sc.name).string(), po);
  }
  const auto& s = res.summary;
  out << "scenario " << sc.name << " seed=" << s.seed << " dt=" << sc.dt << " t_final=" << sc.t_final << "\n";
  out << "converged=" << yes(s.converged) << " convergence_time="
      << (s.convergence_time ? fmt12(*s.convergence_time) : std::string("none"))
      << " final_max_error=" << fmt12(s.final_max_error) << "\n";
  out << "events=" << res.trajectory.events.size() << " lyapunov_violations=" << s.lyapunov_violations << "\n";
  out << "wrote " << csv.string() << " (+ .events.csv, _summary.json" << (o.no_plots ? "" : ", SVG plots") << ")\n";
  return 0;
}

inline int cmd_solve(const CliOptions& o, std::ostream& out) {
  const ScenarioConfig sc = cli_scenario(o);
  const HanesConfig cfg = cli_config(o);
  const NashSolution sol = solve_fixed_point(sc.graph, sc.dynamics, sc.weights, cfg.solver);
  const auto bound = check_coupling_bound(sc.graph, sc.dynamics, sc.weights, sol);
  json j;
  j["scenario"] = sc.name;
  j["mode"] = to_string(sol.mode);
  j["iterations"] = sol.iterations;
  json agents = json::array();
  for (std::size_t i = 0; i < sol.P.size(); ++i)
    agents.push_back({{"agent", i + 1},
                      {"role", to_string(sc.weights[i].role)},
                      {"coefficient", sol.coefficients[i]},
                      {"P", matrix_to_json(sol.P[i].P)},
                      {"K", matrix_to_json(sol.K[i])},
                      {"residual", sol.residuals[i]},
                      {"coupling_margin", finite_or_null(bound.margins[i])}});
  j["agents"] = std::move(agents);
  j["coupling_bound_satisfied"] = bound.satisfied;
  out << j.dump(2) << "\n";
  return 0;
}

inline int cmd_check(const CliOptions& o, std::ostream& out) {
  const ScenarioConfig sc = cli_scenario(o);
  const HanesConfig cfg = cli_config(o);
  const ConditionReport rep = check_conditions(sc, cfg.solver);
  out << "scenario " << sc.name << "\n";
  out << "spanning-tree=" << yes(rep.spanning_tree) << "\n";
  out << "stabilizable=" << yes(rep.all_stabilizable()) << "\n";
  out << "observable=" << yes(rep.all_observable()) << "\n";
  for (int i = 0; i < sc.n_agents(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    out << "agent " << i + 1 << ": stabilizable=" << yes(rep.stabilizable[ui]) << " observable=" << yes(rep.observable[ui]);
    if (rep.coupling)
      out << " coupling-sum=" << fmt12(rep.coupling->sums[ui]) << " alpha=" << fmt12(rep.coupling->alphas[ui])
          << " margin=" << fmt12(rep.coupling->margins[ui]);
    out << "\n";
  }
  if (rep.coupling) out << "coupling-bound=" << yes(rep.coupling->satisfied) << "\n";
  else out << "coupling-bound=unavailable (" << *rep.solver_error << ")\n";
  return 0;
}

inline int cmd_oracle(const CliOptions& o, std::ostream& out) {
  const ScenarioConfig sc = cli_scenario(o);
  HanesConfig cfg = cli_config(o);
  json j;
  j["scenario"] = sc.name;
  const NashSolution sol = solve_fixed_point(sc.graph, sc.dynamics, sc.weights, cfg.solver);

  SplitMix64 rng(sc.seed);
  json stat = json::array();
  for (int i = 0; i < sc.n_agents(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Eigen::VectorXd e = random_vector(rng, sc.dynamics[ui].state_dim());
      worst = std::max(worst, stationarity_check(sc.weights[ui], sc.dynamics[ui], sc.graph, i, e, sol));
    }
    stat.push_back(worst);
  }
  j["stationarity_max_norm"] = std::move(stat);

  HanesConfig solved = cfg;
  solved.controller = ControllerSource::SolvedGains;
  json scans = json::array();
  for (int i = 0; i < sc.n_agents(); ++i) {
    const double k_star = sol.K[static_cast<std::size_t>(i)](0, 0);
    const auto grid = gain_grid(k_star, 0.5, 41);
    const auto scan = best_response_scan(sc, i, grid, solved);
    scans.push_back({{"agent", i + 1},
                     {"role", to_string(scan.role)},
                     {"k_star", scan.k_star},
                     {"best_gain", scan.best_gain},
                     {"grid_step", scan.grid_step},
                     {"best_within_one_step", scan.best_near_equilibrium()}});
  }
  j["best_response"] = std::move(scans);

  const RunResult res = run(sc, cfg);
  try {
    const FitResult fit = exp_fit(flow_error_series(res.trajectory));
    j["exp_fit"] = {{"M", fit.M}, {"rho", fit.rho}, {"r_squared", fit.r_squared}};
  } catch (const InvalidArgument& e) {
    j["exp_fit"] = {{"error", e.what()}};
  }
  if (res.solution) {
    const auto rep = lyapunov_monitor(res.trajectory, *res.solution);
    j["lyapunov"] = {{"violations", rep.violations}, {"checked", rep.checked}, {"max_increase", rep.max_increase}};
  }
  json jumps = json::array();
  for (const auto& ev : res.trajectory.events) {
    if (!changes_state(ev.kind)) continue;
    const double pre = ev.pre_error.norm();
    const double ratio = pre > 0.0 ? ev.post_error.norm() / pre : 1.0;
    jumps.push_back({{"t", ev.t}, {"agent", ev.agent + 1}, {"kind", to_string(ev.kind)}, {"contraction", finite_or_null(ratio)}});
  }
  j["jumps"] = std::move(jumps);
  out << j.dump(2) << "\n";
  return 0;
}

inline int cmd_scenarios(std::ostream& out) {
  for (const auto& name : builtin_names()) {
    const auto sc = *builtin_scenario(name);
    out << name << "  agents=" << sc.n_agents() << " t_final=" << sc.t_final << " dt=" << sc.dt
        << " controller=" << to_string(sc.controller) << "\n";
  }
  return 0;
}

}  // namespace detail

/// Exit codes: 0 success, 1 usage or validation failure, 2 runtime abort.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Hybrid multi-agent Nash equilibrium simulator", "hanes"};
  app.require_subcommand(1);
  app.fallthrough();
  CliOptions o;
  std::uint64_t seed = 0;
  double dt = 0.0, t_final = 0.0;
  auto* seed_opt = app.add_option("--seed", seed, "RNG seed (overrides the scenario)");
  auto* dt_opt = app.add_option("--dt", dt, "integration step in seconds");
  auto* tf_opt = app.add_option("--t-final", t_final, "horizon in seconds");
  app.add_option("--epsilon", o.epsilon, "convergence tolerance on max_i ||e_i||");
  app.add_option("--mode", o.mode, "solver mode: decoupled | coupled-jacobi | coupled-gauss-seidel");
  app.add_option("--out-dir", o.out_dir, "output directory for run artifacts");
  app.add_flag("--no-plots", o.no_plots, "skip SVG output");
  app.add_flag("--early-stop", o.early_stop, "stop once converged and no events remain");
  app.add_flag("--resolve-on-event", o.on_event, "re-solve gains whenever links are cut or restored");

  const char* scenario_help = "builtin name or path to a scenario JSON file";
  auto* run_cmd = app.add_subcommand("run", "simulate a scenario and export CSV, summary and plots");
  run_cmd->add_option("scenario", o.scenario, scenario_help)->required();
  auto* solve_cmd = app.add_subcommand("solve", "print Nash gains and the coupling-bound report");
  solve_cmd->add_option("scenario", o.scenario, scenario_help)->required();
  auto* check_cmd = app.add_subcommand("check", "check equilibrium existence conditions");
  check_cmd->add_option("scenario", o.scenario, scenario_help)->required();
  auto* oracle_cmd = app.add_subcommand("oracle", "run the verification oracles");
  oracle_cmd->add_option("scenario", o.scenario, scenario_help)->required();
  auto* list_cmd = app.add_subcommand("scenarios", "list builtin scenarios");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 1;
  }
  if (*seed_opt) o.seed = seed;
  if (*dt_opt) o.dt = dt;
  if (*tf_opt) o.t_final = t_final;

  try {
    if (*run_cmd) return detail::cmd_run(o, out);
    if (*solve_cmd) return detail::cmd_solve(o, out);
    if (*check_cmd) return detail::cmd_check(o, out);
    if (*oracle_cmd) return detail::cmd_oracle(o, out);
    if (*list_cmd) return detail::cmd_scenarios(out);
  } catch (const InvalidArgument& e) {
    err << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const SolverFailure& e) {
    err << "solver failure (" << SolverFailure::kind_name(e.kind()) << "): " << e.what() << "\n";
    return 2;
  } catch (const SimulationAbort& e) {
    err << "simulation aborted: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  err << app.help();
  return 1;
}

}  // namespace hanes
