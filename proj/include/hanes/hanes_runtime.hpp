#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hanes/dynamics.hpp"
#include "hanes/errors.hpp"
#include "hanes/game_costs.hpp"
#include "hanes/hybrid.hpp"
#include "hanes/nash_solver.hpp"
#include "hanes/scenarios.hpp"
#include "hanes/topology.hpp"

namespace hanes {

enum class ResolvePolicy { OnceAtStart, OnEvent };

inline const char* to_string(ResolvePolicy r) { return r == ResolvePolicy::OnceAtStart ? "once-at-start" : "on-event"; }

struct HanesConfig {
  double epsilon = 0.05;
  std::optional<double> t_max;                  // defaults to the scenario's t_final
  ResolvePolicy resolve = ResolvePolicy::OnceAtStart;
  std::optional<ControllerSource> controller;   // defaults to the scenario's choice
  bool early_stop = false;
  SolverConfig solver;

  void validate() const {
    detail::require(epsilon > 0.0 && std::isfinite(epsilon), "epsilon must be finite and > 0");
    detail::require(!t_max || (*t_max > 0.0 && std::isfinite(*t_max)), "t_max must be finite and > 0");
    solver.validate();
  }
};

struct RunSummary {
  std::string scenario;
  bool converged = false;
  std::optional<double> convergence_time;
  double final_max_error = 0.0;
  std::vector<int> jump_counts;   // state-changing events per agent
  std::vector<double> costs;      // J_i
  std::uint64_t seed = 0;
  double epsilon = 0.05;
  double t_max = 0.0;
  std::string controller;
  std::string solver_mode;
  std::optional<std::string> solver_error;
  int solver_iterations = 0;
  double max_residual = 0.0;
  int lyapunov_violations = 0;
  std::optional<double> max_jump_contraction;
  int resolves = 0;

  friend bool operator==(const RunSummary&, const RunSummary&) = default;
};

struct RunResult {
  RunSummary summary;
  TrajectoryRecord trajectory;
  std::optional<NashSolution> solution;
  std::vector<FeedbackGain> gains;
};

/// max_i ||e_i|| < epsilon.
inline bool convergence_check(std::span<const Eigen::VectorXd> e_all, double epsilon) {
  detail::require(epsilon > 0.0, "convergence_check: epsilon must be > 0");
  double m = 0.0;
  for (const auto& e : e_all) m = std::max(m, e.norm());
  return m < epsilon;
}

inline double max_error_norm(std::span<const Eigen::VectorXd> e_all) {
  double m = 0.0;
  for (const auto& e : e_all) m = std::max(m, e.norm());
  return m;
}

/// Earliest sample time from which the check holds at every later sample.
inline std::optional<double> convergence_time(const TrajectoryRecord& traj, double epsilon) {
  std::optional<double> t;
  for (const auto& s : traj.samples) {
    if (convergence_check(s.e, epsilon)) {
      if (!t) t = s.t;
    } else {
      t.reset();
    }
  }
  return t;
}

/// Agent i's error computed from the links it can currently hear. Leaders
/// read their own state and the reference only.
inline Eigen::VectorXd local_error(const CommGraph& g, const std::optional<ReferenceSignal>& ref,
                                   std::span<const Eigen::VectorXd> x, const LinkState& links, double t, int i) {
  const auto& xi = x[static_cast<std::size_t>(i)];
  if (g.is_leader(i)) return ref ? leader_error(xi, *ref, t) : xi;
  Eigen::VectorXd e = Eigen::VectorXd::Zero(xi.size());
  for (const auto& l : g.neighbors(i)) {
    if (g.is_leader(l.source) || links.is_cut(i, l.source)) continue;
    e += l.weight * (xi - x[static_cast<std::size_t>(l.source)]);
  }
  for (const auto& l : g.leader_links(i)) {
    if (links.is_cut(i, l.source)) continue;
    e += l.weight * (xi - x[static_cast<std::size_t>(l.source)]);
  }
  return e;
}

/// One HANES execution: gains are fixed before the first step, events are
/// declared before start, and each `step()` advances the hybrid simulator by
/// one sample.
class HanesRun {
 public:
  HanesRun(ScenarioConfig scenario, HanesConfig cfg) : sc_(std::move(scenario)), cfg_(std::move(cfg)) {
    cfg_.validate();
    if (cfg_.t_max) sc_.t_final = *cfg_.t_max;
    sc_.validate();
    source_ = cfg_.controller.value_or(sc_.controller);
    if (source_ == ControllerSource::ScenarioFixedGains && !sc_.fixed_gains)
      throw InvalidArgument("controller scenario-fixed-gains needs fixed gains in the scenario");
  }

  // the simulator's policy captures this object
  HanesRun(const HanesRun&) = delete;
  HanesRun& operator=(const HanesRun&) = delete;

  const ScenarioConfig& scenario() const noexcept { return sc_; }
  bool started() const noexcept { return sim_ != nullptr; }

  /// Queues an event; only allowed before start.
  void inject_event(const ScheduledEvent& ev) {
    if (started()) throw InvalidArgument("inject_event: events must be declared before the run starts");
    if (!(ev.time >= 0.0 && ev.time <= sc_.t_final))
      throw InvalidArgument("inject_event: t=" + std::to_string(ev.time) + " outside [0, " +
                            std::to_string(sc_.t_final) + "]");
    HybridSpec trial = sc_.hybrid;
    trial.scheduled_events.push_back(ev);
    trial.validate(sc_.n_agents());
    sc_.hybrid = std::move(trial);
  }

  /// Replaces one agent's gain after the solve (best-response scans).
  void override_gain(int agent, FeedbackGain gain) {
    if (started()) throw InvalidArgument("override_gain: run already started");
    detail::require(agent >= 0 && agent < sc_.n_agents(), "override_gain: agent out of range");
    overrides_.emplace_back(agent, std::move(gain));
  }

  void set_record_samples(bool on) { record_samples_ = on; }

  void start() {
    if (started()) return;
    solve_gains(sc_.graph);
    for (auto& [i, k] : overrides_) gains_[static_cast<std::size_t>(i)] = k;
    values_.resize(static_cast<std::size_t>(sc_.n_agents()));
    for (int i = 0; i < sc_.n_agents(); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      values_[ui].P = solution_ ? solution_->P[ui].P
                                : Eigen::MatrixXd::Zero(sc_.dynamics[ui].state_dim(), sc_.dynamics[ui].state_dim());
    }
    sim_ = std::make_unique<HybridSimulator>(
        sc_.hybrid, sc_.dynamics,
        [this](double t, std::span<const Eigen::VectorXd> x, const LinkState& links, PolicyOutput& out) {
          policy(t, x, links, out);
        },
        sc_.x0, sc_.t_final, sc_.dt, sc_.seed);
    sim_->set_record_samples(record_samples_);
  }

  /// One sample of the HANES loop: local errors, jump checks, controls,
  /// flow. Returns false once the horizon (or an early stop) is reached.
  bool step() {
    start();
    if (sim_->finished()) return false;
    sim_->step();
    if (cfg_.early_stop && sim_->schedule_exhausted() && !sim_->links().any_cut() &&
        convergence_check(sim_->last_output().e, cfg_.epsilon))
      sim_->request_stop();
    return !sim_->finished();
  }

  RunResult finish() {
    start();
    while (step()) {
    }
    RunResult res;
    res.trajectory = sim_->take_record();
    res.solution = solution_;
    res.gains = gains_;
    res.summary = summarize(res.trajectory);
    return res;
  }

  RunResult run() { return finish(); }

  const std::vector<FeedbackGain>& gains() const noexcept { return gains_; }
  const std::optional<NashSolution>& solution() const noexcept { return solution_; }

 private:
  void solve_gains(const CommGraph& g) {
    const auto n = static_cast<std::size_t>(sc_.n_agents());
    solver_error_.reset();
    try {
      solution_ = solve_fixed_point(g, sc_.dynamics, sc_.weights, cfg_.solver);
    } catch (const SolverFailure& f) {
      // fixed gains do not need the solve; it only feeds the value estimate
      if (source_ == ControllerSource::SolvedGains) throw;
      solver_error_ = std::string(SolverFailure::kind_name(f.kind())) + ": " + f.what();
      solution_.reset();
    }
    gains_.clear();
    for (std::size_t i = 0; i < n; ++i) {
      const int ii = static_cast<int>(i);
      if (source_ == ControllerSource::SolvedGains) {
        gains_.push_back({solution_->K[i], sc_.weights[i].role});
      } else {
        const double k = g.is_leader(ii) ? sc_.fixed_gains->k_tracking : sc_.fixed_gains->k_consensus;
        gains_.push_back({k * Eigen::MatrixXd::Identity(sc_.dynamics[i].input_dim(), sc_.dynamics[i].state_dim()),
                          Role::Minimizer});
      }
    }
  }

  void policy(double t, std::span<const Eigen::VectorXd> x, const LinkState& links, PolicyOutput& out) {
    if (cfg_.resolve == ResolvePolicy::OnEvent && source_ == ControllerSource::SolvedGains && links.cut != last_cut_) {
      last_cut_ = links.cut;
      solve_gains(sc_.graph.without_links(links.cut));
      for (auto& [i, k] : overrides_) gains_[static_cast<std::size_t>(i)] = k;
      ++resolves_;
    }
    for (int i = 0; i < sc_.n_agents(); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      out.e[ui] = local_error(sc_.graph, sc_.reference, x, links, t, i);
      out.u[ui] = gains_[ui].control(out.e[ui]);
      out.V[ui] = value_eval(values_[ui], out.e[ui]);
    }
  }

  RunSummary summarize(const TrajectoryRecord& traj) const {
    RunSummary s;
    const auto n = static_cast<std::size_t>(sc_.n_agents());
    s.scenario = sc_.name;
    s.seed = sc_.seed;
    s.epsilon = cfg_.epsilon;
    s.t_max = sc_.t_final;
    s.controller = to_string(source_);
    s.solver_mode = to_string(cfg_.solver.mode);
    s.solver_error = solver_error_;
    s.resolves = resolves_;
    if (solution_) {
      s.solver_iterations = solution_->iterations;
      for (double r : solution_->residuals) s.max_residual = std::max(s.max_residual, r);
    }
    s.jump_counts.assign(n, 0);
    for (const auto& ev : traj.events)
      if (changes_state(ev.kind)) ++s.jump_counts[static_cast<std::size_t>(ev.agent)];
    if (!traj.samples.empty()) {
      s.final_max_error = max_error_norm(traj.samples.back().e);
      s.convergence_time = convergence_time(traj, cfg_.epsilon);
      s.converged = convergence_check(traj.samples.back().e, cfg_.epsilon);
      for (std::size_t i = 0; i < n; ++i) s.costs.push_back(total_cost(traj, sc_.weights, static_cast<int>(i)));
      if (solution_) s.lyapunov_violations = lyapunov_monitor(traj, values_).violations;
    }
    for (const auto& ev : traj.events) {
      if (!changes_state(ev.kind)) continue;
      s.max_jump_contraction = estimate_jump_contraction(traj).max_ratio;
      break;
    }
    return s;
  }

  ScenarioConfig sc_;
  HanesConfig cfg_;
  ControllerSource source_ = ControllerSource::SolvedGains;
  std::optional<NashSolution> solution_;
  std::optional<std::string> solver_error_;
  std::vector<FeedbackGain> gains_;
  std::vector<ValueQuadratic> values_;
  std::vector<std::pair<int, FeedbackGain>> overrides_;
  std::vector<std::pair<int, int>> last_cut_;
  int resolves_ = 0;
  bool record_samples_ = true;
  std::unique_ptr<HybridSimulator> sim_;
};

/// Existence conditions for the equilibrium: graph reachability,
/// per-agent stabilizability and observability, and the coupling bound
/// (evaluated post hoc on a decoupled solve when no solution is given).
struct ConditionReport {
  bool spanning_tree = false;
  std::vector<char> stabilizable;
  std::vector<char> observable;
  std::optional<CouplingBoundReport> coupling;
  std::optional<std::string> solver_error;

  bool all_stabilizable() const { return std::all_of(stabilizable.begin(), stabilizable.end(), [](char c) { return c; }); }
  bool all_observable() const { return std::all_of(observable.begin(), observable.end(), [](char c) { return c; }); }
};

inline ConditionReport check_conditions(const ScenarioConfig& sc, const SolverConfig& cfg = {}) {
  sc.validate();
  ConditionReport rep;
  rep.spanning_tree = sc.graph.has_spanning_tree();
  for (int i = 0; i < sc.n_agents(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    rep.stabilizable.push_back(check_stabilizable(sc.dynamics[ui]));
    rep.observable.push_back(check_observable(sc.dynamics[ui], sc.weights[ui].Q));
  }
  try {
    const auto sol = solve_fixed_point(sc.graph, sc.dynamics, sc.weights, cfg);
    rep.coupling = check_coupling_bound(sc.graph, sc.dynamics, sc.weights, sol);
  } catch (const SolverFailure& f) {
    rep.solver_error = std::string(SolverFailure::kind_name(f.kind())) + ": " + f.what();
  }
  return rep;
}

/// Solves (or loads) the gains, runs to t_max (or convergence when early
/// stop is set) and returns the summary with the full record.
inline RunResult run(const ScenarioConfig& scenario, const HanesConfig& cfg) {
  HanesRun r(scenario, cfg);
  return r.run();
}

}  // namespace hanes
