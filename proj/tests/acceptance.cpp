// Acceptance gate: one PASS/FAIL line per criterion, tolerances pinned here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "hanes/hanes.hpp"

namespace {

using namespace hanes;

constexpr double kRiccatiTol = 1e-9;
constexpr double kEpsilon = 0.05;
constexpr double kLfConvergenceBound = 8.0;
constexpr double kLfRuntimeBound = 1.0;
constexpr double kLfEventTime = 2.5;
constexpr double kPeSettleTime = 1.2;
constexpr double kPeBand = 0.1;
constexpr double kMinRSquared = 0.98;
constexpr double kStationarityTol = 1e-6;
constexpr double kCoupledTol = 1e-10;
constexpr int kCoupledMaxIter = 500;
constexpr double kDecoupledMatchTol = 1e-8;
constexpr double kSlopeTarget = 1.0;
constexpr double kSlopeTol = 0.3;

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("[%s] %2d %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string num(double v) {
  char b[48];
  std::snprintf(b, sizeof b, "%.6g", v);
  return b;
}

template <class F>
void guarded(int id, const char* name, F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    report(id, name, false, std::string("exception: ") + e.what());
  }
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

int main() {
  HanesConfig cfg;
  cfg.epsilon = kEpsilon;

  const auto lf = builtin_leader_follower();
  const auto pe = builtin_pursuit_evasion();
  const auto lqr = decoupled_lqr();

  const auto t0 = std::chrono::steady_clock::now();
  const RunResult lf_run = run(lf, cfg);
  const double lf_seconds = seconds_since(t0);
  const RunResult pe_run = run(pe, cfg);

  guarded(1, "scalar Riccati oracle", [&] {
    const auto sol = solve_fixed_point(lqr.graph, lqr.dynamics, lqr.weights, SolverConfig{});
    const double p = sol.P[0].P(0, 0);
    const double eig = lqr.dynamics[0].A(0, 0) - sol.coefficients[0] * lqr.dynamics[0].B(0, 0) * sol.K[0](0, 0);
    const double dp = std::abs(p - (std::sqrt(2.0) - 1.0));
    const double de = std::abs(eig + std::sqrt(2.0));
    report(1, "scalar Riccati oracle", dp < kRiccatiTol && de < kRiccatiTol,
           "P=" + num(p) + " |dP|=" + num(dp) + " eig=" + num(eig) + " |deig|=" + num(de) + " tol=1e-9");
  });

  guarded(2, "leader-follower convergence", [&] {
    const auto& s = lf_run.summary;
    const bool pass = s.converged && s.convergence_time && *s.convergence_time <= kLfConvergenceBound &&
                      lf_seconds < kLfRuntimeBound;
    report(2, "leader-follower convergence", pass,
           "converged=" + std::string(s.converged ? "true" : "false") + " t_conv=" +
               (s.convergence_time ? num(*s.convergence_time) : "none") + " (<= 8.0) runtime=" + num(lf_seconds) +
               " s (< 1)");
  });

  guarded(3, "leader-follower scheduled event", [&] {
    const double expected = std::ceil(kLfEventTime / lf.dt - 1e-9) * lf.dt;
    const EventRecord* hit = nullptr;
    for (const auto& ev : lf_run.trajectory.events)
      if (ev.kind == EventKind::StateSet && ev.agent == 1) hit = &ev;
    const auto& s = lf_run.summary;
    const bool conv = s.converged && s.convergence_time && *s.convergence_time <= kLfConvergenceBound;
    bool j_inc = false;
    if (hit) {
      for (std::size_t k = 1; k < lf_run.trajectory.samples.size(); ++k) {
        const auto& smp = lf_run.trajectory.samples[k];
        if (std::abs(smp.t - hit->t) < 1e-12) j_inc = smp.j == lf_run.trajectory.samples[k - 1].j + 1;
      }
    }
    const bool pass = hit && std::abs(hit->t - expected) < 1e-12 && j_inc && conv;
    report(3, "leader-follower scheduled event", pass,
           hit ? "fired at t=" + num(hit->t) + " (expected " + num(expected) + "), j increments=" +
                     (j_inc ? "true" : "false") + ", convergence holds=" + (conv ? "true" : "false")
               : std::string("no state-set event logged"));
  });

  guarded(4, "pursuit-evasion convergence", [&] {
    double worst = 0.0;
    double settle = -1.0;
    for (const auto& smp : pe_run.trajectory.samples) {
      double m = 0.0;
      for (const auto& x : smp.x) m = std::max(m, x.cwiseAbs().maxCoeff());
      if (smp.t >= kPeSettleTime - 1e-9) worst = std::max(worst, m);
      if (m < kPeBand) {
        if (settle < 0) settle = smp.t;
      } else {
        settle = -1.0;
      }
    }
    report(4, "pursuit-evasion convergence", worst < kPeBand,
           "max |x_i| for t >= 1.2 s is " + num(worst) + " (< 0.1); band entered for good at t=" +
               (settle < 0 ? std::string("never") : num(settle)));
  });

  guarded(5, "pursuit-evasion jump fidelity", [&] {
    const auto& traj = pe_run.trajectory;
    const double mu = pe.hybrid.jump_threshold;
    bool pass = true;
    std::string detail;
    for (int p : {0, 1}) {
      int count = 0;
      for (const auto& ev : traj.events) {
        if (ev.agent != p || ev.kind != EventKind::ThresholdJump) continue;
        ++count;
        double step = 0.0;
        for (std::size_t k = 1; k < traj.samples.size(); ++k)
          if (std::abs(traj.samples[k].t - ev.t) < 1e-12) step = std::abs(traj.samples[k - 1].x[p](0) - ev.pre_state(0));
        const double pre = ev.pre_state(0), post = ev.post_state(0);
        const bool ok = std::abs(pre - mu) <= step && post >= pe.hybrid.reset_lo && post <= pe.hybrid.reset_hi;
        pass = pass && ok;
        detail += "agent " + std::to_string(p + 1) + " t=" + num(ev.t) + " pre=" + num(pre) + " (step " + num(step) +
                  ") post=" + num(post) + "; ";
      }
      if (count != 1) pass = false;
      detail += "agent " + std::to_string(p + 1) + " jumps=" + std::to_string(count) + "; ";
    }
    const RunResult again = run(pe, cfg);
    const bool same = trajectory_csv(again.trajectory) == trajectory_csv(traj) &&
                      events_csv(again.trajectory) == events_csv(traj);
    report(5, "pursuit-evasion jump fidelity", pass && same, detail + "seed-42 CSVs identical=" + (same ? "true" : "false"));
  });

  guarded(6, "jump contraction", [&] {
    const double lf_max = estimate_jump_contraction(lf_run.trajectory).max_ratio;
    const double pe_max = estimate_jump_contraction(pe_run.trajectory).max_ratio;
    report(6, "jump contraction", lf_max < 1.0 && pe_max < 1.0,
           "leader-follower max ratio=" + num(lf_max) + ", pursuit-evasion max ratio=" + num(pe_max) + " (< 1)");
  });

  guarded(7, "exponential decay fit", [&] {
    const FitResult fit = exp_fit(flow_error_series(lf_run.trajectory));
    report(7, "exponential decay fit", fit.rho > 0.0 && fit.r_squared >= kMinRSquared,
           "rho=" + num(fit.rho) + " R^2=" + num(fit.r_squared) + " M=" + num(fit.M) + " (need rho > 0, R^2 >= 0.98)");
  });

  guarded(8, "Nash best response", [&] {
    const auto sol = solve_fixed_point(lqr.graph, lqr.dynamics, lqr.weights, SolverConfig{});
    const double k_star = sol.K[0](0, 0);
    const auto grid = gain_grid(k_star, 0.5, 41);
    const auto scan = best_response_scan(lqr, 0, grid, cfg);
    SplitMix64 rng(42);
    double worst = 0.0;
    for (int k = 0; k < 100; ++k) {
      const Eigen::VectorXd e = random_vector(rng, 1);
      worst = std::max(worst, stationarity_check(lqr.weights[0], lqr.dynamics[0], lqr.graph, 0, e, sol));
    }
    report(8, "Nash best response", scan.best_near_equilibrium() && worst < kStationarityTol,
           "K*=" + num(k_star) + " argmin=" + num(scan.best_gain) + " step=" + num(scan.grid_step) +
               " max stationarity=" + num(worst) + " (< 1e-6)");
  });

  guarded(9, "coupled solver sanity", [&] {
    SolverConfig gs;
    gs.mode = SolverMode::CoupledGaussSeidel;
    gs.tol = kCoupledTol;
    gs.max_iter = kCoupledMaxIter;
    const auto sol = solve_fixed_point(lf.graph, lf.dynamics, lf.weights, gs);
    double max_res = 0.0;
    bool pd = true;
    for (std::size_t i = 0; i < sol.P.size(); ++i) {
      max_res = std::max(max_res, sol.residuals[i]);
      pd = pd && sol.P[i].positive_definite();
    }
    std::vector<double> coeffs;
    for (int i = 0; i < lf.n_agents(); ++i) coeffs.push_back(error_gain_coefficient(lf.graph, i));
    const CommGraph zero(Eigen::MatrixXd::Zero(4, 4), lf.graph.leaders(),
                         Eigen::MatrixXd::Zero(4, static_cast<Eigen::Index>(lf.graph.leaders().size())));
    const auto coupled0 = solve_fixed_point(zero, lf.dynamics, lf.weights, gs, coeffs);
    const auto decoupled0 = solve_fixed_point(zero, lf.dynamics, lf.weights, SolverConfig{}, coeffs);
    double diff = 0.0;
    for (std::size_t i = 0; i < coupled0.P.size(); ++i)
      diff = std::max(diff, (coupled0.P[i].P - decoupled0.P[i].P).cwiseAbs().maxCoeff());
    report(9, "coupled solver sanity",
           max_res < kCoupledTol && sol.iterations <= kCoupledMaxIter && pd && diff < kDecoupledMatchTol,
           "sweeps=" + std::to_string(sol.iterations) + " max residual=" + num(max_res) + " all PD=" +
               (pd ? "true" : "false") + " zero-coupling |dP|=" + num(diff) + " (< 1e-8)");
  });

  guarded(10, "condition checks", [&] {
    bool pass = true;
    std::string detail;
    for (const auto* sc : {&lf, &pe}) {
      const auto rep = check_conditions(*sc);
      const bool ok = rep.spanning_tree && rep.all_stabilizable() && rep.all_observable() && rep.coupling &&
                      static_cast<int>(rep.coupling->margins.size()) == sc->n_agents();
      pass = pass && ok;
      detail += sc->name + ": spanning-tree=" + (rep.spanning_tree ? "true" : "false") +
                " stabilizable=" + (rep.all_stabilizable() ? "true" : "false") +
                " observable=" + (rep.all_observable() ? "true" : "false") + " margins=[";
      if (rep.coupling)
        for (std::size_t i = 0; i < rep.coupling->margins.size(); ++i)
          detail += (i ? "," : "") + num(rep.coupling->margins[i]);
      detail += "]; ";
    }
    report(10, "condition checks", pass, detail);
  });

  guarded(11, "linear scaling", [&] {
    const std::vector<int> sizes{4, 8, 16, 32, 64, 128, 256};
    const auto res = scaling_probe(sizes);
    report(11, "linear scaling", std::abs(res.slope - kSlopeTarget) <= kSlopeTol,
           "log-log slope=" + num(res.slope) + " band=[" + num(res.ci_lo) + ", " + num(res.ci_hi) +
               "] (need 1.0 +/- 0.3); step time N=4: " + num(res.step_seconds.front()) +
               " s, N=256: " + num(res.step_seconds.back()) + " s");
  });

  guarded(12, "Lyapunov monitor", [&] {
    const RunResult r = run(lqr, cfg);
    const int v = lyapunov_monitor(r.trajectory, *r.solution).violations;
    HanesConfig coupled = cfg;
    coupled.solver.mode = SolverMode::CoupledGaussSeidel;
    const RunResult lfc = run(lf, coupled);
    const RunResult pec = run(pe, coupled);
    report(12, "Lyapunov monitor", v == 0,
           "decoupled LQR violations=" + std::to_string(v) + "; reported only: leader-follower (coupled)=" +
               std::to_string(lfc.summary.lyapunov_violations) +
               ", pursuit-evasion (coupled)=" + std::to_string(pec.summary.lyapunov_violations));
  });

  std::printf("%d of 12 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
