#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hanes/dynamics.hpp"
#include "hanes/errors.hpp"
#include "hanes/game_costs.hpp"
#include "hanes/topology.hpp"

namespace hanes {

enum class SolverMode { Decoupled, CoupledJacobi, CoupledGaussSeidel };

inline const char* to_string(SolverMode m) {
  switch (m) {
    case SolverMode::Decoupled: return "decoupled";
    case SolverMode::CoupledJacobi: return "coupled-jacobi";
    case SolverMode::CoupledGaussSeidel: return "coupled-gauss-seidel";
  }
  return "unknown";
}

inline std::optional<SolverMode> solver_mode_from_string(const std::string& s) {
  for (auto m : {SolverMode::Decoupled, SolverMode::CoupledJacobi, SolverMode::CoupledGaussSeidel})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

struct SolverConfig {
  SolverMode mode = SolverMode::Decoupled;
  int max_iter = 500;
  double tol = 1e-10;     // on max entrywise |dP| per sweep and on the Riccati residual
  double damping = 0.5;   // P <- (1 - damping) P + damping P_new

  void validate() const {
    detail::require(tol > 0.0, "solver tol must be > 0");
    detail::require(max_iter >= 1, "solver max_iter must be >= 1");
    detail::require(damping > 0.0 && damping <= 1.0, "solver damping must be in (0, 1]");
  }
};

/// Linear feedback u = -K e (minimizer) or u = +K e (maximizer).
struct FeedbackGain {
  Eigen::MatrixXd K;
  Role role = Role::Minimizer;

  Eigen::VectorXd control(const Eigen::VectorXd& e) const {
    return role == Role::Minimizer ? Eigen::VectorXd(-(K * e)) : Eigen::VectorXd(K * e);
  }
};

struct NashSolution {
  SolverMode mode = SolverMode::Decoupled;
  std::vector<ValueQuadratic> P;
  std::vector<Eigen::MatrixXd> K;
  std::vector<double> coefficients;        // c_i used in the Riccati and the gain
  int iterations = 0;
  std::vector<double> residuals;           // per agent, max |entry| of the Riccati residual
  std::vector<double> sweep_deltas;        // max |dP| per sweep
  std::vector<double> contraction_ratios;  // sweep_deltas[k] / sweep_deltas[k-1]
};

/// Q + PA + A'P - c^2 P B R^-1 B' P + E.
inline Eigen::MatrixXd riccati_residual(const Eigen::MatrixXd& P, const LinearDynamics& dyn, const CostWeights& w,
                                        double c, const Eigen::MatrixXd& E) {
  const auto n = dyn.state_dim();
  detail::require(P.rows() == n && P.cols() == n && E.rows() == n && E.cols() == n && w.Q.rows() == n,
                  "riccati_residual: dimension mismatch");
  Eigen::LDLT<Eigen::MatrixXd> r(w.R);
  if (r.info() != Eigen::Success || !r.isPositive() || std::abs(w.R.determinant()) < 1e-300)
    throw InvalidArgument("riccati_residual: R is singular");
  const Eigen::MatrixXd s = dyn.B * r.solve(dyn.B.transpose());
  return w.Q + P * dyn.A + dyn.A.transpose() * P - c * c * P * s * P + E;
}

/// K = c R^-1 B' P.
inline FeedbackGain gain_from_value(const Eigen::MatrixXd& P, const LinearDynamics& dyn, const CostWeights& w,
                                    double c, Role role) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(w.R);
  if (!lu.isInvertible()) throw InvalidArgument("gain_from_value: R is singular");
  return {c * lu.solve(dyn.B.transpose() * P), role};
}

namespace detail {

inline Eigen::Index numeric_rank(const Eigen::MatrixXcd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0) return 0;
  const double tol = 1e-9 * std::max(1.0, sv(0));
  Eigen::Index r = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k)
    if (sv(k) > tol) ++r;
  return r;
}

inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& q) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  if (es.eigenvalues().minCoeff() < -1e-10) throw InvalidArgument("matrix is not positive semidefinite");
  return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
         es.eigenvectors().transpose();
}

/// Hautus test on (A, C) for eigenvalues with Re >= threshold (-inf: all).
inline bool hautus_observable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c, double re_threshold) {
  const auto n = a.rows();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(a.cast<std::complex<double>>());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto lambda = es.eigenvalues()(k);
    if (lambda.real() < re_threshold) continue;
    Eigen::MatrixXcd m(n + c.rows(), n);
    m.topRows(n) = a.cast<std::complex<double>>() - lambda * Eigen::MatrixXcd::Identity(n, n);
    m.bottomRows(c.rows()) = c.cast<std::complex<double>>();
    if (numeric_rank(m) < n) return false;
  }
  return true;
}

inline bool hautus_stabilizable(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return hautus_observable(a.transpose(), b.transpose(), -1e-12);
}

/// Solves A'P + PA + Q = 0 through the Kronecker form.
inline Eigen::MatrixXd solve_lyapunov(const Eigen::MatrixXd& a, const Eigen::MatrixXd& q) {
  const auto n = a.rows();
  const Eigen::MatrixXd id = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd k(n * n, n * n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j)
      k.block(i * n, j * n, n, n) = a(j, i) * id + (i == j ? Eigen::MatrixXd(a.transpose()) : Eigen::MatrixXd::Zero(n, n));
  Eigen::VectorXd rhs = -Eigen::Map<const Eigen::VectorXd>(q.data(), n * n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(k);
  if (!lu.isInvertible()) throw SolverFailure(SolverFailure::Kind::Precondition, "Lyapunov equation is singular");
  Eigen::VectorXd v = lu.solve(rhs);
  Eigen::MatrixXd p = Eigen::Map<Eigen::MatrixXd>(v.data(), n, n);
  return 0.5 * (p + p.transpose());
}

/// Stabilizing solution of Q + PA + A'P - P S P = 0 with S = B R^-1 B'.
inline Eigen::MatrixXd solve_care(const Eigen::MatrixXd& a, const Eigen::MatrixXd& s, const Eigen::MatrixXd& q) {
  const auto n = a.rows();
  if (s.cwiseAbs().maxCoeff() == 0.0) return solve_lyapunov(a, q);
  if (n == 1) {
    const double av = a(0, 0), sv = s(0, 0), qv = q(0, 0);
    const double disc = av * av + sv * qv;
    if (disc < 0.0) throw SolverFailure(SolverFailure::Kind::Precondition, "scalar Riccati has no real root");
    const double root = std::sqrt(disc);
    // q / (root - a) avoids cancellation when a < 0
    double p;
    if (av <= 0.0 && root - av > 0.0) p = qv / (root - av);
    else p = (av + root) / sv;
    return Eigen::MatrixXd::Constant(1, 1, p);
  }
  Eigen::MatrixXd h(2 * n, 2 * n);
  h << a, -s, -q, -a.transpose();
  Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(h.cast<std::complex<double>>());
  Eigen::MatrixXcd basis(2 * n, n);
  Eigen::Index cols = 0;
  for (Eigen::Index k = 0; k < 2 * n; ++k) {
    if (es.eigenvalues()(k).real() < 0.0) {
      if (cols == n) break;
      basis.col(cols++) = es.eigenvectors().col(k);
    }
  }
  if (cols != n)
    throw SolverFailure(SolverFailure::Kind::Precondition, "Hamiltonian has eigenvalues on the imaginary axis");
  Eigen::FullPivLU<Eigen::MatrixXcd> lu(basis.topRows(n));
  if (!lu.isInvertible()) throw SolverFailure(SolverFailure::Kind::Precondition, "stable subspace is not a graph");
  const Eigen::MatrixXd p = (basis.bottomRows(n) * lu.inverse()).real();
  return 0.5 * (p + p.transpose());
}

inline Eigen::MatrixXd control_weight(const LinearDynamics& dyn, const CostWeights& w) {
  return dyn.B * Eigen::LDLT<Eigen::MatrixXd>(w.R).solve(dyn.B.transpose());
}

inline double max_abs(const Eigen::MatrixXd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace detail

/// Hautus: rank[A - lambda I, B] = n for every eigenvalue with Re >= 0.
inline bool check_stabilizable(const LinearDynamics& dyn) { return detail::hautus_stabilizable(dyn.A, dyn.B); }

/// Hautus on (A, Q^1/2) over every eigenvalue of A.
inline bool check_observable(const LinearDynamics& dyn, const Eigen::MatrixXd& Q) {
  return detail::hautus_observable(dyn.A, detail::psd_sqrt(Q), -std::numeric_limits<double>::infinity());
}

inline bool check_detectable(const LinearDynamics& dyn, const Eigen::MatrixXd& Q) {
  return detail::hautus_observable(dyn.A, detail::psd_sqrt(Q), -1e-12);
}

/// E_i = sum over the links in agent i's error of
///   w * c_j * sym(P_i B R_j^-1 B' P_j),  sym(M) = (M + M')/2.
/// Leaders track a reference and have no coupling.
inline Eigen::MatrixXd coupling_term(std::span<const ValueQuadratic> P, const CommGraph& g,
                                     std::span<const LinearDynamics> dyns, std::span<const CostWeights> weights, int i,
                                     std::span<const double> coefficients = {}) {
  const auto n = static_cast<std::size_t>(g.size());
  detail::require(P.size() == n && dyns.size() == n && weights.size() == n, "coupling_term: need one P per agent");
  detail::require(coefficients.empty() || coefficients.size() == n, "coupling_term: coefficient count mismatch");
  const auto ui = static_cast<std::size_t>(i);
  const auto dim = P[ui].P.rows();
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(dim, dim);
  if (g.is_leader(i)) return e;
  auto add = [&](const Link& l) {
    const auto uj = static_cast<std::size_t>(l.source);
    if (P[uj].P.size() == 0) throw InvalidArgument("coupling_term: missing value matrix for agent " + std::to_string(l.source));
    const double cj = coefficients.empty() ? error_gain_coefficient(g, l.source) : coefficients[uj];
    const Eigen::MatrixXd rinv_bt = Eigen::LDLT<Eigen::MatrixXd>(weights[uj].R).solve(dyns[uj].B.transpose());
    const Eigen::MatrixXd m = P[ui].P * dyns[ui].B * rinv_bt * P[uj].P;
    e += l.weight * cj * 0.5 * (m + m.transpose());
  };
  for (const auto& l : g.neighbors(i)) add(l);
  for (const auto& l : g.leader_links(i)) add(l);
  return e;
}

/// Fixed-point iteration on the coupled Riccati system.
///
/// Each sweep solves every agent's Riccati equation exactly with the coupling
/// term frozen at the current iterates (Jacobi: previous sweep, Gauss-Seidel:
/// freshest), then damps. `coefficients` overrides the c_i derived from the
/// graph.
inline NashSolution solve_fixed_point(const CommGraph& g, std::span<const LinearDynamics> dyns,
                                      std::span<const CostWeights> weights, const SolverConfig& cfg,
                                      std::span<const double> coefficients = {}) {
  cfg.validate();
  const int n = g.size();
  const auto un = static_cast<std::size_t>(n);
  detail::require(dyns.size() == un && weights.size() == un, "solve_fixed_point: one dynamics and weight per agent");
  detail::require(coefficients.empty() || coefficients.size() == un, "solve_fixed_point: coefficient count mismatch");

  NashSolution sol;
  sol.mode = cfg.mode;
  sol.coefficients.resize(un);
  std::vector<Eigen::MatrixXd> s(un);
  std::vector<char> needs_pd(un);
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const auto& w = weights[ui];
    const auto v = w.violations();
    if (!v.empty()) throw InvalidArgument("agent " + std::to_string(i + 1) + " weights: " + v.front());
    detail::require(w.Q.rows() == dyns[ui].state_dim() && w.R.rows() == dyns[ui].input_dim(),
                    "solve_fixed_point: weight dimensions do not match dynamics");
    const double c = coefficients.empty() ? error_gain_coefficient(g, i) : coefficients[ui];
    sol.coefficients[ui] = c;
    s[ui] = c * c * detail::control_weight(dyns[ui], w);
    if (!detail::hautus_stabilizable(dyns[ui].A, c * dyns[ui].B))
      throw SolverFailure(SolverFailure::Kind::Precondition,
                          "agent " + std::to_string(i + 1) + ": (A, c B) is not stabilizable");
    if (!check_detectable(dyns[ui], w.Q))
      throw SolverFailure(SolverFailure::Kind::Precondition,
                          "agent " + std::to_string(i + 1) + ": (A, Q^1/2) is not detectable");
    needs_pd[ui] = check_observable(dyns[ui], w.Q);
  }

  auto accept = [&](int i, const Eigen::MatrixXd& p) {
    const double lo = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(p).eigenvalues().minCoeff();
    const double floor = needs_pd[static_cast<std::size_t>(i)] ? 1e-10 : -1e-10;
    if (!(lo > floor) || !p.allFinite())
      throw SolverFailure(SolverFailure::Kind::LostDefiniteness,
                          "agent " + std::to_string(i + 1) + ": iterate lost definiteness (min eigenvalue " +
                              std::to_string(lo) + ")");
  };

  sol.P.resize(un);
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    sol.P[ui].P = detail::solve_care(dyns[ui].A, s[ui], weights[ui].Q);
    accept(i, sol.P[ui].P);
  }

  auto coupling = [&](std::span<const ValueQuadratic> p, int i) -> Eigen::MatrixXd {
    if (cfg.mode == SolverMode::Decoupled) {
      const auto dim = p[static_cast<std::size_t>(i)].P.rows();
      return Eigen::MatrixXd::Zero(dim, dim);
    }
    return coupling_term(p, g, dyns, weights, i, sol.coefficients);
  };
  auto residuals = [&]() {
    std::vector<double> r(un);
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      r[ui] = detail::max_abs(riccati_residual(sol.P[ui].P, dyns[ui], weights[ui], sol.coefficients[ui],
                                               coupling(sol.P, i)));
    }
    return r;
  };

  auto finish = [&]() {
    sol.K.resize(un);
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      sol.K[ui] = gain_from_value(sol.P[ui].P, dyns[ui], weights[ui], sol.coefficients[ui], weights[ui].role).K;
    }
    return sol;
  };

  if (cfg.mode == SolverMode::Decoupled) {
    sol.iterations = 1;
    sol.residuals = residuals();
    return finish();
  }

  double prev_res = std::numeric_limits<double>::infinity();
  int growth = 0;
  std::vector<ValueQuadratic> prev;
  for (int sweep = 1; sweep <= cfg.max_iter; ++sweep) {
    prev = sol.P;
    for (int i = 0; i < n; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const auto& src = cfg.mode == SolverMode::CoupledGaussSeidel ? sol.P : prev;
      const Eigen::MatrixXd qe = weights[ui].Q + coupling(src, i);
      const Eigen::MatrixXd fresh = detail::solve_care(dyns[ui].A, s[ui], qe);
      Eigen::MatrixXd next = (1.0 - cfg.damping) * prev[ui].P + cfg.damping * fresh;
      next = 0.5 * (next + next.transpose());
      accept(i, next);
      sol.P[ui].P = std::move(next);
    }
    double delta = 0.0;
    for (std::size_t i = 0; i < un; ++i) delta = std::max(delta, detail::max_abs(sol.P[i].P - prev[i].P));
    if (!sol.sweep_deltas.empty() && sol.sweep_deltas.back() > 0.0)
      sol.contraction_ratios.push_back(delta / sol.sweep_deltas.back());
    sol.sweep_deltas.push_back(delta);
    sol.iterations = sweep;
    sol.residuals = residuals();
    const double res = *std::max_element(sol.residuals.begin(), sol.residuals.end());
    if (delta < cfg.tol && res < cfg.tol) return finish();
    growth = res > prev_res ? growth + 1 : 0;
    if (growth >= 10)
      throw SolverFailure(SolverFailure::Kind::Divergence,
                          "Riccati residual grew for 10 consecutive sweeps (now " + std::to_string(res) + ")");
    prev_res = res;
  }
  throw SolverFailure(SolverFailure::Kind::MaxIterations,
                      "fixed point not reached in " + std::to_string(cfg.max_iter) + " sweeps");
}

struct CouplingBoundReport {
  std::vector<double> sums;     // s_i = sum_j a_ij + sum_l b_il
  std::vector<double> alphas;   // 2 sqrt(lambda_min(R_i) / lambda_max(B' P_i B)), +inf if the max is 0
  std::vector<double> margins;  // alpha_i - s_i
  bool satisfied = true;
};

inline CouplingBoundReport check_coupling_bound(const CommGraph& g, std::span<const LinearDynamics> dyns,
                                                std::span<const CostWeights> weights, const NashSolution& sol) {
  const auto n = static_cast<std::size_t>(g.size());
  detail::require(dyns.size() == n && weights.size() == n && sol.P.size() == n,
                  "check_coupling_bound: size mismatch");
  CouplingBoundReport rep;
  for (int i = 0; i < g.size(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double sum = g.in_degree(i) + g.leader_weight(i);
    const double rmin = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(weights[ui].R).eigenvalues().minCoeff();
    const Eigen::MatrixXd bpb = dyns[ui].B.transpose() * sol.P[ui].P * dyns[ui].B;
    const double bmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(0.5 * (bpb + bpb.transpose())).eigenvalues().maxCoeff();
    const double alpha = bmax > 0.0 ? 2.0 * std::sqrt(rmin / bmax) : std::numeric_limits<double>::infinity();
    rep.sums.push_back(sum);
    rep.alphas.push_back(alpha);
    rep.margins.push_back(alpha - sum);
    if (!(sum < alpha)) rep.satisfied = false;
  }
  return rep;
}

/// Per-agent feedback with the sign fixed by role: minimizers u = -K e,
/// maximizers u = +K e.
inline std::vector<FeedbackGain> saddle_gains(const NashSolution& sol, std::span<const Role> roles) {
  if (roles.size() != sol.K.size())
    throw InvalidArgument("saddle_gains: need one role flag per agent (" + std::to_string(sol.K.size()) + ")");
  std::vector<FeedbackGain> out;
  for (std::size_t i = 0; i < roles.size(); ++i) out.push_back({sol.K[i], roles[i]});
  return out;
}

}  // namespace hanes
