#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "hanes/dynamics.hpp"
#include "hanes/errors.hpp"
#include "hanes/hybrid.hpp"
#include "hanes/topology.hpp"

namespace hanes {

/// Minimizers pay the running cost, maximizers collect it. R is always
/// stored positive definite; the role carries the sign.
enum class Role { Minimizer, Maximizer };

inline const char* to_string(Role r) { return r == Role::Minimizer ? "minimizer" : "maximizer"; }

inline double role_sign(Role r) { return r == Role::Minimizer ? 1.0 : -1.0; }

/// Gain coefficient of agent i's own control in its error flow: 1 for
/// leaders (tracking error x_l - x_ref), d_i + sum_l b_il otherwise.
inline double error_gain_coefficient(const CommGraph& g, int i) {
  return g.is_leader(i) ? 1.0 : g.effective_gain_coefficient(i);
}

struct CostWeights {
  Eigen::MatrixXd Q;
  Eigen::MatrixXd R;
  Role role = Role::Minimizer;
  double jump_penalty = 1.0;

  static CostWeights scalar(double q, double r, double p = 1.0, Role role = Role::Minimizer) {
    return {Eigen::MatrixXd::Constant(1, 1, q), Eigen::MatrixXd::Constant(1, 1, r), role, p};
  }

  std::vector<std::string> violations() const {
    std::vector<std::string> out;
    if (Q.rows() != Q.cols() || Q.rows() == 0) {
      out.push_back("Q must be square and nonempty");
    } else if (!Q.allFinite() || !Q.isApprox(Q.transpose(), 1e-12)) {
      out.push_back("Q must be finite and symmetric");
    } else if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(Q).eigenvalues().minCoeff() < -1e-10) {
      out.push_back("Q must be positive semidefinite");
    }
    if (R.rows() != R.cols() || R.rows() == 0) {
      out.push_back("R must be square and nonempty");
    } else if (!R.allFinite() || !R.isApprox(R.transpose(), 1e-12)) {
      out.push_back("R must be finite and symmetric");
    } else if (Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(R).eigenvalues().minCoeff() <= 0.0) {
      out.push_back("R must be positive definite");
    }
    if (!(jump_penalty > 0.0)) out.push_back("jump_penalty must be > 0");
    return out;
  }
};

struct ValueQuadratic {
  Eigen::MatrixXd P;

  bool positive_definite(double tol = 1e-10) const {
    if (P.rows() != P.cols() || P.rows() == 0) return false;
    if (!P.isApprox(P.transpose(), 1e-9)) return false;
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(P).eigenvalues().minCoeff() > tol;
  }
};

/// e'Qe + u'Ru.
inline double running_cost(const CostWeights& w, const Eigen::VectorXd& e, const Eigen::VectorXd& u) {
  detail::require(e.size() == w.Q.rows() && u.size() == w.R.rows(), "running_cost: dimension mismatch");
  return e.dot(w.Q * e) + u.dot(w.R * u);
}

/// p ||e+||^2.
inline double jump_cost(const CostWeights& w, const Eigen::VectorXd& e_plus) {
  return w.jump_penalty * e_plus.squaredNorm();
}

inline double value_eval(const ValueQuadratic& v, const Eigen::VectorXd& e) {
  detail::require(e.size() == v.P.rows(), "value_eval: dimension mismatch");
  return e.dot(v.P * e);
}

namespace detail {

/// Integral of f over the sample grid: trapezoid inside a flow interval,
/// left endpoint across a jump (the right sample is already post-jump).
template <class F>
double integrate_samples(const TrajectoryRecord& traj, F&& f) {
  double total = 0.0;
  const auto& s = traj.samples;
  for (std::size_t k = 0; k + 1 < s.size(); ++k) {
    const double h = s[k + 1].t - s[k].t;
    const double left = f(s[k]);
    total += s[k + 1].j == s[k].j ? 0.5 * h * (left + f(s[k + 1])) : h * left;
  }
  return total;
}

}  // namespace detail

/// J_i: integral of the running cost plus p ||e_i(t_k+)||^2 over agent i's
/// own jumps. Reported unsigned for both roles.
inline double total_cost(const TrajectoryRecord& traj, std::span<const CostWeights> weights, int i) {
  detail::require(!traj.samples.empty(), "total_cost: empty trajectory");
  detail::require(i >= 0 && i < traj.n_agents && static_cast<int>(weights.size()) == traj.n_agents,
                  "total_cost: agent index or weight count mismatch");
  const auto& w = weights[static_cast<std::size_t>(i)];
  const auto ui = static_cast<std::size_t>(i);
  double j = detail::integrate_samples(traj, [&](const Sample& s) { return running_cost(w, s.e[ui], s.u[ui]); });
  for (const auto& ev : traj.events)
    if (ev.agent == i && changes_state(ev.kind)) j += jump_cost(w, ev.post_error);
  return j;
}

/// H_i = e'Qe + s u'Ru + lambda' f_i(e, u, u_-i), s = -1 for maximizers.
/// f_i is the error flow: A e + B u for leaders, the graph form otherwise.
inline double hamiltonian(const CostWeights& w, const LinearDynamics& dyn, const CommGraph& g, int i,
                          const Eigen::VectorXd& e, const Eigen::VectorXd& u, const Eigen::VectorXd& lambda,
                          std::span<const Eigen::VectorXd> u_all) {
  detail::require(e.size() == dyn.state_dim() && lambda.size() == dyn.state_dim() && u.size() == dyn.input_dim(),
                  "hamiltonian: dimension mismatch");
  Eigen::VectorXd f;
  if (g.is_leader(i)) {
    f = dyn.A * e + dyn.B * u;
  } else {
    std::vector<Eigen::VectorXd> controls(u_all.begin(), u_all.end());
    detail::require(static_cast<int>(controls.size()) == g.size(), "hamiltonian: need one control per agent");
    controls[static_cast<std::size_t>(i)] = u;
    f = error_flow(dyn, g, e, controls, i);
  }
  return e.dot(w.Q * e) + role_sign(w.role) * u.dot(w.R * u) + lambda.dot(f);
}

/// W = sum_i e_i' P_i e_i.
inline double lyapunov_W(std::span<const Eigen::VectorXd> e, std::span<const ValueQuadratic> p) {
  detail::require(e.size() == p.size(), "lyapunov_W: need one value matrix per agent");
  double w = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) w += value_eval(p[i], e[i]);
  return w;
}

struct LyapunovReport {
  int violations = 0;
  int checked = 0;              // flow-interval sample pairs examined
  double max_increase = 0.0;    // largest W(t_k+1) - W(t_k) seen inside a flow interval
  double first_violation_t = -1.0;
  std::vector<double> W;        // per sample
};

/// Counts flow-interval increases of W beyond 1e-9 (1 + W). Pairs of samples
/// separated by a jump are skipped.
inline LyapunovReport lyapunov_monitor(const TrajectoryRecord& traj, std::span<const ValueQuadratic> p) {
  detail::require(static_cast<int>(p.size()) == traj.n_agents, "lyapunov_monitor: need one value matrix per agent");
  LyapunovReport rep;
  rep.W.reserve(traj.samples.size());
  for (const auto& s : traj.samples) rep.W.push_back(lyapunov_W(s.e, p));
  for (std::size_t k = 0; k + 1 < traj.samples.size(); ++k) {
    if (traj.samples[k + 1].j != traj.samples[k].j) continue;
    ++rep.checked;
    const double inc = rep.W[k + 1] - rep.W[k];
    rep.max_increase = std::max(rep.max_increase, inc);
    if (inc > 1e-9 * (1.0 + rep.W[k])) {
      if (rep.violations == 0) rep.first_violation_t = traj.samples[k + 1].t;
      ++rep.violations;
    }
  }
  return rep;
}

struct DiscountedSeries {
  std::vector<std::vector<double>> value;            // [agent][sample] Gamma_i ||e_i||^2
  std::vector<std::vector<double>> discounted_cost;  // [agent][sample] beta-weighted running cost so far
};

/// Diagnostic value estimates; never fed back into control.
inline DiscountedSeries discounted_value_series(const TrajectoryRecord& traj, std::span<const CostWeights> weights,
                                                std::span<const double> gammas, double beta) {
  detail::require(beta > 0.0 && beta <= 1.0, "discounted_value_series: beta must be in (0, 1]");
  detail::require(static_cast<int>(gammas.size()) == traj.n_agents &&
                      static_cast<int>(weights.size()) == traj.n_agents,
                  "discounted_value_series: need one Gamma and weight per agent");
  const auto n = static_cast<std::size_t>(traj.n_agents);
  const auto& s = traj.samples;
  DiscountedSeries out;
  out.value.assign(n, std::vector<double>(s.size()));
  out.discounted_cost.assign(n, std::vector<double>(s.size()));
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    double disc = 1.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
      out.value[i][k] = gammas[i] * s[k].e[i].squaredNorm();
      if (k > 0) {
        const double h = s[k].t - s[k - 1].t;
        const double left = running_cost(weights[i], s[k - 1].e[i], s[k - 1].u[i]);
        const double seg = s[k].j == s[k - 1].j
                               ? 0.5 * h * (left + running_cost(weights[i], s[k].e[i], s[k].u[i]))
                               : h * left;
        acc += disc * seg;
        disc *= beta;
      }
      out.discounted_cost[i][k] = acc;
    }
  }
  return out;
}

/// Integral of e' Qj e over the stacked scalar errors, with the off-diagonal
/// entries of the joint weight scaled by `cross_scale`.
inline double global_quadratic_cost(const TrajectoryRecord& traj, const Eigen::MatrixXd& q_joint,
                                    double cross_scale = 1.0) {
  detail::require(q_joint.rows() == traj.n_agents && q_joint.cols() == traj.n_agents,
                  "global_quadratic_cost: joint weight must be n x n");
  Eigen::MatrixXd q = cross_scale * q_joint;
  q.diagonal() = q_joint.diagonal();
  Eigen::VectorXd e(traj.n_agents);
  return detail::integrate_samples(traj, [&](const Sample& s) {
    for (int i = 0; i < traj.n_agents; ++i) e(i) = s.e[static_cast<std::size_t>(i)](0);
    return e.dot(q * e);
  });
}

}  // namespace hanes
