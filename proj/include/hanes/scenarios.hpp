#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "hanes/dynamics.hpp"
#include "hanes/errors.hpp"
#include "hanes/game_costs.hpp"
#include "hanes/hybrid.hpp"
#include "hanes/topology.hpp"

namespace hanes {

enum class ControllerSource { SolvedGains, ScenarioFixedGains };

inline const char* to_string(ControllerSource c) {
  return c == ControllerSource::SolvedGains ? "solved-gains" : "scenario-fixed-gains";
}

inline std::optional<ControllerSource> controller_source_from_string(const std::string& s) {
  if (s == "solved-gains") return ControllerSource::SolvedGains;
  if (s == "scenario-fixed-gains") return ControllerSource::ScenarioFixedGains;
  return std::nullopt;
}

/// Hand-tuned feedback: u_i = -k_consensus e_i for non-leaders and
/// u_l = -k_tracking e_l for leaders.
struct FixedGains {
  double k_consensus = 0.0;
  double k_tracking = 0.0;
  friend bool operator==(const FixedGains&, const FixedGains&) = default;
};

/// Parameters used only by diagnostics (value series, joint cost).
struct DiagnosticParams {
  std::vector<double> gamma;  // per-agent value weights
  double beta = 1.0;          // discount factor
  double gamma_base = 0.0;
  Eigen::MatrixXd q_joint;    // n x n joint interaction weight, may be empty
  double p_hybrid = 0.0;
};

struct ScenarioConfig {
  std::string name;
  std::vector<LinearDynamics> dynamics;
  CommGraph graph;
  std::vector<CostWeights> weights;
  std::vector<Eigen::VectorXd> x0;
  std::optional<FixedGains> fixed_gains;
  std::optional<ReferenceSignal> reference;
  HybridSpec hybrid;
  double dt = 0.01;
  double t_final = 1.0;
  std::uint64_t seed = 42;
  ControllerSource controller = ControllerSource::SolvedGains;
  DiagnosticParams diagnostics;

  int n_agents() const noexcept { return graph.size(); }

  /// Every violation, each prefixed with its field path.
  std::vector<std::string> violations() const;

  void validate() const {
    const auto v = violations();
    if (v.empty()) return;
    std::string msg = "invalid scenario '" + name + "':";
    for (const auto& s : v) msg += "\n  " + s;
    throw InvalidArgument(msg);
  }
};

namespace detail {

inline bool same_matrix(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && a == b;
}

inline std::string agent_path(const char* field, std::size_t i) {
  return std::string(field) + "[" + std::to_string(i) + "]";
}

}  // namespace detail

inline bool operator==(const ReferenceSignal& a, const ReferenceSignal& b) {
  return a.amplitude == b.amplitude && a.decay_rate == b.decay_rate && a.angular_frequency == b.angular_frequency;
}

inline bool operator==(const ScenarioConfig& a, const ScenarioConfig& b) {
  if (a.name != b.name || !(a.graph == b.graph) || a.fixed_gains != b.fixed_gains || a.reference != b.reference ||
      !(a.hybrid == b.hybrid) || a.dt != b.dt || a.t_final != b.t_final || a.seed != b.seed ||
      a.controller != b.controller)
    return false;
  if (a.dynamics.size() != b.dynamics.size() || a.weights.size() != b.weights.size() || a.x0.size() != b.x0.size())
    return false;
  for (std::size_t i = 0; i < a.dynamics.size(); ++i)
    if (!detail::same_matrix(a.dynamics[i].A, b.dynamics[i].A) || !detail::same_matrix(a.dynamics[i].B, b.dynamics[i].B))
      return false;
  for (std::size_t i = 0; i < a.weights.size(); ++i) {
    const auto& x = a.weights[i];
    const auto& y = b.weights[i];
    if (!detail::same_matrix(x.Q, y.Q) || !detail::same_matrix(x.R, y.R) || x.role != y.role ||
        x.jump_penalty != y.jump_penalty)
      return false;
  }
  for (std::size_t i = 0; i < a.x0.size(); ++i)
    if (!detail::same_matrix(a.x0[i], b.x0[i])) return false;
  const auto& d = a.diagnostics;
  const auto& e = b.diagnostics;
  return d.gamma == e.gamma && d.beta == e.beta && d.gamma_base == e.gamma_base && d.p_hybrid == e.p_hybrid &&
         detail::same_matrix(d.q_joint, e.q_joint);
}

inline std::vector<std::string> ScenarioConfig::violations() const {
  std::vector<std::string> out;
  const auto n = static_cast<std::size_t>(n_agents());
  if (name.empty()) out.push_back("name: must be nonempty");
  if (n == 0) {
    out.push_back("graph: needs at least one agent");
    return out;
  }
  if (dynamics.size() != n) out.push_back("dynamics: expected " + std::to_string(n) + " entries");
  if (weights.size() != n) out.push_back("weights: expected " + std::to_string(n) + " entries");
  if (x0.size() != n) out.push_back("x0: expected " + std::to_string(n) + " entries");
  for (std::size_t i = 0; i < std::min(n, weights.size()); ++i) {
    for (const auto& v : weights[i].violations()) out.push_back(detail::agent_path("weights", i) + ": " + v);
    if (i < dynamics.size() && weights[i].Q.rows() == weights[i].Q.cols() && weights[i].R.rows() == weights[i].R.cols() &&
        (weights[i].Q.rows() != dynamics[i].state_dim() || weights[i].R.rows() != dynamics[i].input_dim()))
      out.push_back(detail::agent_path("weights", i) + ": dimensions do not match dynamics");
  }
  for (std::size_t i = 0; i < std::min(n, x0.size()); ++i) {
    if (i < dynamics.size() && x0[i].size() != dynamics[i].state_dim())
      out.push_back(detail::agent_path("x0", i) + ": dimension does not match dynamics");
    if (!x0[i].allFinite()) out.push_back(detail::agent_path("x0", i) + ": must be finite");
  }
  if (!(dt > 0.0) || !std::isfinite(dt)) out.push_back("dt: must be finite and > 0");
  if (!(t_final > 0.0) || !std::isfinite(t_final)) out.push_back("t_final: must be finite and > 0");
  else if (dt > 0.0 && dt > t_final) out.push_back("dt: must not exceed t_final");
  for (const auto& v : hybrid.violations(n_agents())) out.push_back("hybrid." + v);
  for (std::size_t k = 0; k < hybrid.scheduled_events.size(); ++k)
    if (hybrid.scheduled_events[k].time > t_final)
      out.push_back("hybrid.scheduled_events[" + std::to_string(k) + "]: time beyond t_final");
  if (controller == ControllerSource::ScenarioFixedGains) {
    if (!fixed_gains) out.push_back("fixed_gains: required by controller scenario-fixed-gains");
    for (std::size_t i = 0; i < std::min(n, dynamics.size()); ++i)
      if (dynamics[i].state_dim() != dynamics[i].input_dim())
        out.push_back(detail::agent_path("dynamics", i) + ": fixed gains need input_dim == state_dim");
  }
  if (fixed_gains && (!std::isfinite(fixed_gains->k_consensus) || !std::isfinite(fixed_gains->k_tracking)))
    out.push_back("fixed_gains: must be finite");
  if (reference && !(std::isfinite(reference->amplitude) && std::isfinite(reference->decay_rate) &&
                     std::isfinite(reference->angular_frequency)))
    out.push_back("reference: must be finite");
  else if (reference && reference->decay_rate < 0.0)
    out.push_back("reference.decay_rate: must be >= 0");
  for (int l : graph.leaders())
    if (weights.size() == n && weights[static_cast<std::size_t>(l)].role == Role::Maximizer)
      out.push_back(detail::agent_path("weights", static_cast<std::size_t>(l)) + ".role: a leader must be a minimizer");
  const auto& d = diagnostics;
  if (!d.gamma.empty() && d.gamma.size() != n) out.push_back("diagnostics.gamma: expected " + std::to_string(n) + " entries");
  if (!(d.beta > 0.0 && d.beta <= 1.0)) out.push_back("diagnostics.beta: must be in (0, 1]");
  if (d.q_joint.size() != 0) {
    if (d.q_joint.rows() != static_cast<Eigen::Index>(n) || d.q_joint.cols() != static_cast<Eigen::Index>(n))
      out.push_back("diagnostics.q_joint: must be n x n");
    else if (!d.q_joint.isApprox(d.q_joint.transpose(), 1e-12) ||
             Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(d.q_joint).eigenvalues().minCoeff() < -1e-10)
      out.push_back("diagnostics.q_joint: must be symmetric positive semidefinite");
  }
  return out;
}

namespace detail {

inline std::vector<Eigen::VectorXd> scalar_states(std::initializer_list<double> xs) {
  std::vector<Eigen::VectorXd> out;
  for (double x : xs) out.push_back(Eigen::VectorXd::Constant(1, x));
  return out;
}

}  // namespace detail

/// Two pursuers (agents 1, 2) against two evaders (agents 3, 4).
///
/// One graph carries all four interaction matrices: pursuer rows take the
/// pursuer-to-pursuer weight |L_p| and A_pe, evader rows take |L_e| and A_ep.
inline ScenarioConfig builtin_pursuit_evasion() {
  ScenarioConfig s;
  s.name = "pursuit_evasion";
  const Eigen::Matrix2d lp{{1.0, -0.5}, {-0.5, 1.0}};
  const Eigen::Matrix2d le{{1.0, -0.3}, {-0.3, 1.0}};
  const Eigen::Matrix2d ape{{1.0, 0.7}, {0.8, 1.0}};
  const Eigen::Matrix2d aep{{0.9, 0.5}, {0.6, 1.0}};
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(4, 4);
  adj.block(0, 0, 2, 2) = lp.cwiseAbs();
  adj.block(0, 2, 2, 2) = ape;
  adj.block(2, 0, 2, 2) = aep;
  adj.block(2, 2, 2, 2) = le.cwiseAbs();
  adj.diagonal().setZero();
  s.graph = CommGraph(adj);

  s.dynamics = {LinearDynamics::scalar(-1.0, 1.0), LinearDynamics::scalar(-1.0, 1.0),
                LinearDynamics::scalar(-2.0, 1.0), LinearDynamics::scalar(-2.0, 1.0)};
  Eigen::Matrix4d qc{{1.0, 0.1, 0.2, 0.1}, {0.1, 1.0, 0.1, 0.2}, {0.2, 0.1, 1.5, 0.3}, {0.1, 0.2, 0.3, 1.5}};
  const double r[4] = {1.304, 1.5, 4.0, 3.5};
  const double p = 0.4481;
  for (int i = 0; i < 4; ++i)
    s.weights.push_back(CostWeights::scalar(qc(i, i), r[i], p, i < 2 ? Role::Minimizer : Role::Maximizer));
  s.x0 = detail::scalar_states({2.0, 1.8, 1.5, 1.2});

  s.hybrid.jump_threshold = 1.0;
  s.hybrid.reset_lo = 0.3;
  s.hybrid.reset_hi = 0.5;
  s.hybrid.enabled_agents = {0, 1};
  s.dt = 0.01;
  s.t_final = 3.0;
  s.seed = 42;
  s.controller = ControllerSource::SolvedGains;
  s.diagnostics.q_joint = qc;
  s.diagnostics.p_hybrid = p;
  return s;
}

/// Agent 2 (index 1) leads and tracks 2 e^{-0.3 t} cos(0.5 t).
inline ScenarioConfig builtin_leader_follower() {
  ScenarioConfig s;
  s.name = "leader_follower";
  const Eigen::Matrix4d adj{{0, 1, 0, 0}, {1, 0, 1, 1}, {0, 1, 0, 1}, {0, 1, 1, 0}};
  s.graph = CommGraph(adj, {1});
  s.dynamics.assign(4, LinearDynamics::scalar(-1.0, 1.0));
  const Eigen::Matrix4d qc{{1.0, 0.3, 0.1, 0.2}, {0.3, 1.5, 0.4, 0.4}, {0.1, 0.4, 1.0, 0.3}, {0.2, 0.4, 0.3, 1.0}};
  for (int i = 0; i < 4; ++i) s.weights.push_back(CostWeights::scalar(qc(i, i), 1.0, 0.4));
  s.x0 = detail::scalar_states({1.8, 2.0, 1.5, 1.7});
  s.reference = ReferenceSignal{2.0, 0.3, 0.5};
  s.fixed_gains = FixedGains{0.8, 1.2};

  s.hybrid.jump_threshold = 1.0;
  s.hybrid.reset_lo = 0.3;
  s.hybrid.reset_hi = 0.5;
  // The t = 2.5 s reconfiguration puts the leader back on its reference.
  s.hybrid.scheduled_events.push_back(
      ScheduledEvent{2.5, 1, EventKind::StateSet, reference_eval(*s.reference, 2.5), -1, 0.0});
  s.dt = 0.01;
  s.t_final = 25.0;
  s.seed = 42;
  s.controller = ControllerSource::ScenarioFixedGains;
  s.diagnostics.gamma = {0.8, 0.9, 0.85, 0.75};
  s.diagnostics.beta = 0.95;
  s.diagnostics.gamma_base = 0.5;
  s.diagnostics.q_joint = qc;
  s.diagnostics.p_hybrid = 0.4;
  return s;
}

/// Single scalar agent x' = -x + u regulated to zero with Q = R = 1.
inline ScenarioConfig decoupled_lqr() {
  ScenarioConfig s;
  s.name = "decoupled_lqr";
  s.graph = CommGraph(Eigen::MatrixXd::Zero(1, 1), {0});
  s.dynamics = {LinearDynamics::scalar(-1.0, 1.0)};
  s.weights = {CostWeights::scalar(1.0, 1.0)};
  s.x0 = detail::scalar_states({1.0});
  s.reference = ReferenceSignal{0.0, 0.0, 0.0};
  s.dt = 0.01;
  s.t_final = 10.0;
  return s;
}

/// Bidirectional ring of n identical scalar agents, degree 2 everywhere.
inline ScenarioConfig ring(int n) {
  detail::require(n >= 2, "ring: need at least 2 agents");
  ScenarioConfig s;
  s.name = "ring_" + std::to_string(n);
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    adj(i, (i + 1) % n) = 1.0;
    adj(i, (i + n - 1) % n) = 1.0;
  }
  s.graph = CommGraph(adj);
  s.dynamics.assign(static_cast<std::size_t>(n), LinearDynamics::scalar(-1.0, 1.0));
  s.weights.assign(static_cast<std::size_t>(n), CostWeights::scalar(1.0, 1.0));
  for (int i = 0; i < n; ++i) s.x0.push_back(Eigen::VectorXd::Constant(1, 1.0 + 0.5 * std::sin(i)));
  s.dt = 0.01;
  s.t_final = 5.0;
  return s;
}

inline std::vector<std::string> builtin_names() { return {"pursuit_evasion", "leader_follower", "decoupled_lqr"}; }

inline std::optional<ScenarioConfig> builtin_scenario(const std::string& name) {
  if (name == "pursuit_evasion") return builtin_pursuit_evasion();
  if (name == "leader_follower") return builtin_leader_follower();
  if (name == "decoupled_lqr") return decoupled_lqr();
  return std::nullopt;
}

}  // namespace hanes
