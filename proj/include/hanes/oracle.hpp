#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hanes/errors.hpp"
#include "hanes/game_costs.hpp"
#include "hanes/hanes_runtime.hpp"
#include "hanes/nash_solver.hpp"
#include "hanes/rng.hpp"
#include "hanes/scenarios.hpp"

namespace hanes {

// ---------------------------------------------------------------------------
// Best response

/// Role-aware objective: integral of e'Qe + s u'Ru plus the jump terms,
/// s = -1 for maximizers. Equals total_cost for minimizers.
inline double game_payoff(const TrajectoryRecord& traj, std::span<const CostWeights> weights, int i) {
  detail::require(i >= 0 && i < traj.n_agents && static_cast<int>(weights.size()) == traj.n_agents,
                  "game_payoff: agent index or weight count mismatch");
  const auto ui = static_cast<std::size_t>(i);
  const auto& w = weights[ui];
  const double s = role_sign(w.role);
  double j = detail::integrate_samples(traj, [&](const Sample& smp) {
    return smp.e[ui].dot(w.Q * smp.e[ui]) + s * smp.u[ui].dot(w.R * smp.u[ui]);
  });
  for (const auto& ev : traj.events)
    if (ev.agent == i && changes_state(ev.kind)) j += jump_cost(w, ev.post_error);
  return j;
}

struct ScanPoint {
  double gain = 0.0;
  double payoff = std::numeric_limits<double>::quiet_NaN();
  std::optional<std::string> error;  // abort at this grid point
};

struct ScanResult {
  int agent = 0;
  Role role = Role::Minimizer;
  double k_star = 0.0;
  std::vector<ScanPoint> points;
  int best_index = -1;   // argmin for minimizers, argmax for maximizers
  double best_gain = 0.0;
  double grid_step = 0.0;

  /// |best_gain - k_star| within one grid step.
  bool best_near_equilibrium() const { return best_index >= 0 && std::abs(best_gain - k_star) <= grid_step * (1 + 1e-9); }
};

/// k_star (1 + span t), t in [-1, 1], `points` values.
inline std::vector<double> gain_grid(double k_star, double span, int points) {
  detail::require(points >= 2, "gain_grid: need at least 2 points");
  std::vector<double> g;
  for (int q = 0; q < points; ++q) g.push_back(k_star * (1.0 + span * (-1.0 + 2.0 * q / (points - 1))));
  return g;
}

/// Replaces agent i's gain by each grid value (others held at the solved
/// gains), reruns the scenario with its own seed and records the payoff.
inline ScanResult best_response_scan(const ScenarioConfig& sc, int agent, std::span<const double> grid,
                                     const HanesConfig& cfg = {}) {
  detail::require(!grid.empty(), "best_response_scan: empty gain grid");
  detail::require(agent >= 0 && agent < sc.n_agents(), "best_response_scan: agent out of range");
  HanesConfig c = cfg;
  c.controller = ControllerSource::SolvedGains;
  c.early_stop = false;
  ScanResult res;
  res.agent = agent;
  res.role = sc.weights[static_cast<std::size_t>(agent)].role;
  {
    HanesRun probe(sc, c);
    probe.start();
    res.k_star = probe.gains()[static_cast<std::size_t>(agent)].K(0, 0);
  }
  std::vector<double> sorted(grid.begin(), grid.end());
  std::sort(sorted.begin(), sorted.end());
  res.grid_step = std::numeric_limits<double>::infinity();
  for (std::size_t q = 1; q < sorted.size(); ++q) res.grid_step = std::min(res.grid_step, sorted[q] - sorted[q - 1]);
  if (sorted.size() < 2) res.grid_step = 0.0;

  const auto& dyn = sc.dynamics[static_cast<std::size_t>(agent)];
  for (double k : grid) {
    ScanPoint pt;
    pt.gain = k;
    try {
      HanesRun r(sc, c);
      r.override_gain(agent, {k * Eigen::MatrixXd::Identity(dyn.input_dim(), dyn.state_dim()), res.role});
      const auto out = r.run();
      pt.payoff = game_payoff(out.trajectory, sc.weights, agent);
    } catch (const SimulationAbort& e) {
      pt.error = e.what();
    }
    res.points.push_back(pt);
  }
  for (std::size_t q = 0; q < res.points.size(); ++q) {
    if (res.points[q].error) continue;
    const bool better = res.best_index < 0 ||
                        (res.role == Role::Minimizer ? res.points[q].payoff < res.points[res.best_index].payoff
                                                     : res.points[q].payoff > res.points[res.best_index].payoff);
    if (better) res.best_index = static_cast<int>(q);
  }
  if (res.best_index >= 0) res.best_gain = res.points[static_cast<std::size_t>(res.best_index)].gain;
  return res;
}

// ---------------------------------------------------------------------------
// Stationarity of the Hamiltonian

/// Central-difference ||dH_i/du_i|| at u_i = -/+ K e with lambda = 2 P_i e.
/// `gain` replaces the solved K_i when given.
inline double stationarity_check(const CostWeights& w, const LinearDynamics& dyn, const CommGraph& g, int i,
                                 const Eigen::VectorXd& e, const NashSolution& sol,
                                 const std::optional<Eigen::MatrixXd>& gain = std::nullopt) {
  const auto ui = static_cast<std::size_t>(i);
  detail::require(ui < sol.P.size() && ui < sol.K.size(), "stationarity_check: agent missing from solution");
  const FeedbackGain fb{gain.value_or(sol.K[ui]), w.role};
  const Eigen::VectorXd u_star = fb.control(e);
  const Eigen::VectorXd lambda = 2.0 * sol.P[ui].P * e;
  std::vector<Eigen::VectorXd> u_all(static_cast<std::size_t>(g.size()), Eigen::VectorXd::Zero(dyn.input_dim()));
  const double h = 1e-6 * (1.0 + u_star.norm());
  Eigen::VectorXd grad(u_star.size());
  for (Eigen::Index k = 0; k < u_star.size(); ++k) {
    Eigen::VectorXd up = u_star, dn = u_star;
    up(k) += h;
    dn(k) -= h;
    grad(k) = (hamiltonian(w, dyn, g, i, e, up, lambda, u_all) - hamiltonian(w, dyn, g, i, e, dn, lambda, u_all)) /
              (2.0 * h);
  }
  return grad.norm();
}

// ---------------------------------------------------------------------------
// Exponential decay fit

struct NormSample {
  double t = 0.0;
  double norm = 0.0;
  int interval = 0;  // flow interval id (jump count)
};

struct FitResult {
  double M = 0.0;
  double rho = 0.0;
  double r_squared = 0.0;
  int samples_used = 0;
  int intervals = 0;
};

inline constexpr double kNormFloor = 1e-12;

/// ||e(t)|| over the stacked errors of every sample, tagged with its flow
/// interval.
inline std::vector<NormSample> flow_error_series(const TrajectoryRecord& traj, double t_from = 0.0) {
  std::vector<NormSample> out;
  for (const auto& s : traj.samples) {
    if (s.t < t_from) continue;
    double sq = 0.0;
    for (const auto& e : s.e) sq += e.squaredNorm();
    out.push_back({s.t, std::sqrt(sq), s.j});
  }
  return out;
}

/// Least squares on log ||e|| = b_k - rho t with one intercept per flow
/// interval and a shared slope. M is the largest exp(b_k). Norms below
/// 1e-12 are dropped.
inline FitResult exp_fit(std::span<const NormSample> series) {
  std::map<int, std::vector<std::pair<double, double>>> by_interval;
  int used = 0;
  for (const auto& s : series) {
    if (!(s.norm >= kNormFloor) || !std::isfinite(s.norm)) continue;
    by_interval[s.interval].emplace_back(s.t, std::log(s.norm));
    ++used;
  }
  if (used < 10) throw InvalidArgument("exp_fit: need at least 10 samples with norm >= 1e-12, got " + std::to_string(used));

  double sxx = 0.0, sxy = 0.0;
  std::map<int, std::pair<double, double>> means;
  for (const auto& [k, pts] : by_interval) {
    double tm = 0.0, ym = 0.0;
    for (const auto& [t, y] : pts) {
      tm += t;
      ym += y;
    }
    tm /= static_cast<double>(pts.size());
    ym /= static_cast<double>(pts.size());
    means[k] = {tm, ym};
    for (const auto& [t, y] : pts) {
      sxx += (t - tm) * (t - tm);
      sxy += (t - tm) * (y - ym);
    }
  }
  if (!(sxx > 0.0)) throw InvalidArgument("exp_fit: samples span no time within any flow interval");
  const double slope = sxy / sxx;

  FitResult fit;
  fit.rho = -slope;
  fit.samples_used = used;
  fit.intervals = static_cast<int>(by_interval.size());
  double ss_res = 0.0, ss_tot = 0.0, ybar = 0.0;
  for (const auto& [k, pts] : by_interval)
    for (const auto& [t, y] : pts) ybar += y;
  ybar /= used;
  double best_b = -std::numeric_limits<double>::infinity();
  for (const auto& [k, pts] : by_interval) {
    const double b = means[k].second - slope * means[k].first;
    best_b = std::max(best_b, b);
    for (const auto& [t, y] : pts) {
      const double r = y - (b + slope * t);
      ss_res += r * r;
      ss_tot += (y - ybar) * (y - ybar);
    }
  }
  fit.M = std::exp(best_b);
  if (ss_tot <= 1e-300) fit.r_squared = ss_res <= 1e-20 ? 1.0 : 0.0;
  else fit.r_squared = std::clamp(1.0 - ss_res / ss_tot, 0.0, 1.0);
  return fit;
}

inline FitResult exp_fit(const std::vector<NormSample>& series) { return exp_fit(std::span<const NormSample>(series)); }

// ---------------------------------------------------------------------------
// Lyapunov and jump diagnostics

inline LyapunovReport lyapunov_monitor(const TrajectoryRecord& traj, const NashSolution& sol) {
  return lyapunov_monitor(traj, std::span<const ValueQuadratic>(sol.P));
}

/// V(e) - p ||e||^2 - min over the reset interval of V, scalar states only.
inline double jump_value_residual(const ValueQuadratic& v, const CostWeights& w, double e, double reset_lo,
                                  double reset_hi) {
  detail::require(v.P.rows() == 1 && v.P.cols() == 1, "jump_value_residual: scalar state only");
  detail::require(reset_lo <= reset_hi, "jump_value_residual: reset interval lo > hi");
  const double p = v.P(0, 0);
  double g_near = 0.0;
  if (reset_lo > 0.0) g_near = reset_lo;
  else if (reset_hi < 0.0) g_near = reset_hi;
  return p * e * e - w.jump_penalty * e * e - p * g_near * g_near;
}

// ---------------------------------------------------------------------------
// Scaling

struct ScalingResult {
  std::vector<int> sizes;
  std::vector<double> step_seconds;  // median per-step wall time
  double slope = 0.0;                // d log(time) / d log(N)
  double slope_stderr = 0.0;
  double ci_lo = 0.0;                // slope -/+ 2 standard errors
  double ci_hi = 0.0;
};

/// Times hanes_step on bidirectional rings. Each size runs `warmup` discarded
/// steps, then `batches` batches of `batch_steps` steps; the median batch
/// time divided by the batch length is the per-step time.
inline ScalingResult scaling_probe(std::span<const int> sizes, int batches = 21, int batch_steps = 10,
                                   int warmup = 20) {
  detail::require(sizes.size() >= 2, "scaling_probe: need at least two sizes");
  detail::require(batches * batch_steps >= 100, "scaling_probe: need at least 100 timed steps");
  ScalingResult res;
  for (int n : sizes) {
    detail::require(n >= 2, "scaling_probe: sizes must be >= 2");
    ScenarioConfig sc = ring(n);
    sc.t_final = sc.dt * (warmup + batches * batch_steps + 2);
    HanesRun r(sc, HanesConfig{});
    r.start();
    for (int k = 0; k < warmup; ++k) r.step();
    std::vector<double> times;
    for (int b = 0; b < batches; ++b) {
      const auto t0 = std::chrono::steady_clock::now();
      for (int k = 0; k < batch_steps; ++k) r.step();
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double>(t1 - t0).count() / batch_steps);
    }
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(times.size() / 2), times.end());
    res.sizes.push_back(n);
    res.step_seconds.push_back(times[times.size() / 2]);
  }
  const auto m = static_cast<double>(res.sizes.size());
  double xm = 0.0, ym = 0.0;
  for (std::size_t k = 0; k < res.sizes.size(); ++k) {
    xm += std::log(static_cast<double>(res.sizes[k]));
    ym += std::log(res.step_seconds[k]);
  }
  xm /= m;
  ym /= m;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < res.sizes.size(); ++k) {
    const double dx = std::log(static_cast<double>(res.sizes[k])) - xm;
    sxx += dx * dx;
    sxy += dx * (std::log(res.step_seconds[k]) - ym);
  }
  res.slope = sxy / sxx;
  if (res.sizes.size() > 2) {
    double ss = 0.0;
    for (std::size_t k = 0; k < res.sizes.size(); ++k) {
      const double fit = ym + res.slope * (std::log(static_cast<double>(res.sizes[k])) - xm);
      ss += std::pow(std::log(res.step_seconds[k]) - fit, 2);
    }
    res.slope_stderr = std::sqrt(ss / (m - 2.0) / sxx);
  }
  res.ci_lo = res.slope - 2.0 * res.slope_stderr;
  res.ci_hi = res.slope + 2.0 * res.slope_stderr;
  return res;
}

/// Uniform vectors in [-1, 1]^n from the given generator.
inline Eigen::VectorXd random_vector(SplitMix64& rng, Eigen::Index n) {
  Eigen::VectorXd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v(k) = 2.0 * rng.uniform() - 1.0;
  return v;
}

}  // namespace hanes
