#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hanes/nash_solver.hpp"
#include "hanes/scenarios.hpp"

using namespace hanes;

namespace {

const double kRoot = std::sqrt(2.0) - 1.0;

Eigen::MatrixXd m1(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }
Eigen::VectorXd s(double v) { return Eigen::VectorXd::Constant(1, v); }

struct Problem {
  CommGraph graph;
  std::vector<LinearDynamics> dyns;
  std::vector<CostWeights> weights;
};

// A lone leader has c = 1.
Problem single(double a, double b, double q, double r) {
  return {CommGraph(Eigen::MatrixXd::Zero(1, 1), {0}), {LinearDynamics::scalar(a, b)}, {CostWeights::scalar(q, r)}};
}

SolverConfig mode(SolverMode m) {
  SolverConfig cfg;
  cfg.mode = m;
  return cfg;
}

}  // namespace

TEST(RiccatiResidual, ClosedFormRootVanishes) {
  EXPECT_NEAR(riccati_residual(m1(kRoot), LinearDynamics::scalar(-1, 1), CostWeights::scalar(1, 1), 1.0, m1(0))(0, 0),
              0.0, 1e-9);
}

TEST(RiccatiResidual, ZeroValueLeavesQ) {
  EXPECT_DOUBLE_EQ(
      riccati_residual(m1(0), LinearDynamics::scalar(-1, 1), CostWeights::scalar(1, 1), 1.0, m1(0))(0, 0), 1.0);
}

TEST(RiccatiResidual, IntegratorExample) {
  EXPECT_DOUBLE_EQ(
      riccati_residual(m1(1), LinearDynamics::scalar(0, 1), CostWeights::scalar(1, 1), 1.0, m1(0))(0, 0), 0.0);
}

TEST(CouplingTerm, IsolatedAgentIsZero) {
  CommGraph g(Eigen::MatrixXd::Zero(2, 2));
  const std::vector<ValueQuadratic> p{{m1(0.5)}, {m1(0.5)}};
  const std::vector<LinearDynamics> d(2, LinearDynamics::scalar(-1, 1));
  const std::vector<CostWeights> w(2, CostWeights::scalar(1, 1));
  EXPECT_EQ(coupling_term(p, g, d, w, 0)(0, 0), 0.0);
  EXPECT_EQ(coupling_term(p, g, d, w, 1)(0, 0), 0.0);
}

TEST(CouplingTerm, TwoAgentChain) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 1) = 1.0;
  CommGraph g(a);
  const std::vector<ValueQuadratic> p{{m1(0.5)}, {m1(0.5)}};
  const std::vector<LinearDynamics> d(2, LinearDynamics::scalar(-1, 1));
  const std::vector<CostWeights> w(2, CostWeights::scalar(1, 1));
  const std::vector<double> c{1.0, 1.0};
  EXPECT_DOUBLE_EQ(coupling_term(p, g, d, w, 0, c)(0, 0), 0.25);
  EXPECT_EQ(coupling_term(p, g, d, w, 1, c)(0, 0), 0.0);
}

TEST(CouplingTerm, MissingNeighbourMatrixThrows) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(2, 2);
  a(0, 1) = 1.0;
  CommGraph g(a);
  const std::vector<ValueQuadratic> p{{m1(0.5)}, {}};
  const std::vector<LinearDynamics> d(2, LinearDynamics::scalar(-1, 1));
  const std::vector<CostWeights> w(2, CostWeights::scalar(1, 1));
  EXPECT_THROW(coupling_term(p, g, d, w, 0), InvalidArgument);
}

TEST(SolveFixedPoint, ScalarClosedForm) {
  const auto pr = single(-1, 1, 1, 1);
  const auto sol = solve_fixed_point(pr.graph, pr.dyns, pr.weights, SolverConfig{});
  EXPECT_NEAR(sol.P[0].P(0, 0), kRoot, 1e-9);
  EXPECT_NEAR(sol.K[0](0, 0), kRoot, 1e-9);
  EXPECT_NEAR(-1.0 - sol.K[0](0, 0), -std::sqrt(2.0), 1e-9);
}

TEST(SolveFixedPoint, ZeroStateWeightGivesZero) {
  const auto pr = single(-1, 1, 0, 1);
  const auto sol = solve_fixed_point(pr.graph, pr.dyns, pr.weights, SolverConfig{});
  EXPECT_NEAR(sol.P[0].P(0, 0), 0.0, 1e-14);
  EXPECT_NEAR(sol.K[0](0, 0), 0.0, 1e-14);
}

TEST(SolveFixedPoint, UnstableUncontrollableIsRejected) {
  const auto pr = single(1, 0, 1, 1);
  try {
    solve_fixed_point(pr.graph, pr.dyns, pr.weights, SolverConfig{});
    FAIL();
  } catch (const SolverFailure& e) {
    EXPECT_EQ(e.kind(), SolverFailure::Kind::Precondition);
  }
}

TEST(SolveFixedPoint, MultiStateMatchesCareResidual) {
  Eigen::MatrixXd a(2, 2), b(2, 1);
  a << 0, 1, 2, -1;  // unstable
  b << 0, 1;
  Problem pr{CommGraph(Eigen::MatrixXd::Zero(1, 1), {0}), {LinearDynamics(a, b)},
             {CostWeights{Eigen::MatrixXd::Identity(2, 2), m1(0.5)}}};
  const auto sol = solve_fixed_point(pr.graph, pr.dyns, pr.weights, SolverConfig{});
  EXPECT_LT(detail::max_abs(riccati_residual(sol.P[0].P, pr.dyns[0], pr.weights[0], 1.0, Eigen::MatrixXd::Zero(2, 2))),
            1e-9);
  EXPECT_TRUE(sol.P[0].positive_definite());
  const Eigen::MatrixXd closed = a - b * sol.K[0];
  EXPECT_LT(Eigen::EigenSolver<Eigen::MatrixXd>(closed).eigenvalues().real().maxCoeff(), 0.0);
}

TEST(SolveFixedPoint, LeaderFollowerGaussSeidelConverges) {
  const auto sc = builtin_leader_follower();
  const auto sol = solve_fixed_point(sc.graph, sc.dynamics, sc.weights, mode(SolverMode::CoupledGaussSeidel));
  EXPECT_LE(sol.iterations, 500);
  for (std::size_t i = 0; i < sol.P.size(); ++i) {
    EXPECT_LT(sol.residuals[i], 1e-10);
    EXPECT_TRUE(sol.P[i].positive_definite());
    const double c = sol.coefficients[i];
    EXPECT_LT(detail::max_abs(riccati_residual(sol.P[i].P, sc.dynamics[i], sc.weights[i], c,
                                               coupling_term(sol.P, sc.graph, sc.dynamics, sc.weights,
                                                             static_cast<int>(i), sol.coefficients))),
              1e-10);
  }
}

TEST(SolveFixedPoint, JacobiAndGaussSeidelAgree) {
  const auto sc = builtin_leader_follower();
  const auto gs = solve_fixed_point(sc.graph, sc.dynamics, sc.weights, mode(SolverMode::CoupledGaussSeidel));
  const auto jac = solve_fixed_point(sc.graph, sc.dynamics, sc.weights, mode(SolverMode::CoupledJacobi));
  for (std::size_t i = 0; i < gs.P.size(); ++i) EXPECT_NEAR(gs.P[i].P(0, 0), jac.P[i].P(0, 0), 1e-9);
}

TEST(SolveFixedPoint, SweepDeltasShrinkAfterThirdSweep) {
  for (const auto& sc : {builtin_leader_follower(), builtin_pursuit_evasion()}) {
    for (auto m : {SolverMode::CoupledJacobi, SolverMode::CoupledGaussSeidel}) {
      const auto sol = solve_fixed_point(sc.graph, sc.dynamics, sc.weights, mode(m));
      const auto& d = sol.sweep_deltas;
      for (std::size_t k = 3; k < d.size(); ++k) {
        if (d[k - 1] < 1e-13) break;  // rounding floor
        EXPECT_LE(d[k], d[k - 1] * (1.0 + 1e-9)) << sc.name << " " << to_string(m) << " sweep " << k + 1;
      }
    }
  }
}

TEST(SolveFixedPoint, ZeroCouplingMatchesDecoupled) {
  const auto sc = builtin_leader_follower();
  std::vector<double> c(static_cast<std::size_t>(sc.n_agents()));
  for (int i = 0; i < sc.n_agents(); ++i) c[static_cast<std::size_t>(i)] = error_gain_coefficient(sc.graph, i);
  const CommGraph cut(Eigen::MatrixXd::Zero(4, 4), sc.graph.leaders());
  const auto dec = solve_fixed_point(sc.graph, sc.dynamics, sc.weights, SolverConfig{});
  for (auto m : {SolverMode::CoupledJacobi, SolverMode::CoupledGaussSeidel}) {
    const auto sol = solve_fixed_point(cut, sc.dynamics, sc.weights, mode(m), c);
    for (std::size_t i = 0; i < sol.P.size(); ++i) EXPECT_NEAR(sol.P[i].P(0, 0), dec.P[i].P(0, 0), 1e-8);
  }
}

TEST(SolveFixedPoint, IteratesStaySymmetric) {
  Eigen::MatrixXd a(2, 2), b(2, 1);
  a << -1, 0.5, 0.3, -2;
  b << 1, 0.4;
  Eigen::MatrixXd adj = Eigen::MatrixXd::Zero(3, 3);
  adj(1, 0) = adj(2, 1) = adj(1, 2) = 0.5;
  const CommGraph g(adj, {0});
  const std::vector<LinearDynamics> d(3, LinearDynamics(a, b));
  const std::vector<CostWeights> w(3, CostWeights{Eigen::MatrixXd::Identity(2, 2), m1(1.0)});
  const auto sol = solve_fixed_point(g, d, w, mode(SolverMode::CoupledGaussSeidel));
  for (const auto& p : sol.P) EXPECT_EQ(p.P, p.P.transpose());
}

TEST(SolverConfig, Validation) {
  SolverConfig cfg;
  cfg.tol = 0.0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = SolverConfig{};
  cfg.max_iter = 0;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
  cfg = SolverConfig{};
  cfg.damping = 1.5;
  EXPECT_THROW(cfg.validate(), InvalidArgument);
}

TEST(GainFromValue, ZeroErrorZeroControl) {
  const auto k = gain_from_value(m1(3.0), LinearDynamics::scalar(-1, 1), CostWeights::scalar(1, 1), 2.0, Role::Minimizer);
  EXPECT_EQ(k.control(s(0))(0), 0.0);
}

TEST(GainFromValue, ClosedFormControl) {
  const auto k = gain_from_value(m1(kRoot), LinearDynamics::scalar(-1, 1), CostWeights::scalar(1, 1), 1.0, Role::Minimizer);
  EXPECT_NEAR(k.control(s(2.0))(0), -0.828427, 1e-6);
}

TEST(GainFromValue, LinearInCoefficient) {
  const auto dyn = LinearDynamics::scalar(-1, 1);
  const auto w = CostWeights::scalar(1, 0.7);
  const double k1 = gain_from_value(m1(0.3), dyn, w, 1.5, Role::Minimizer).K(0, 0);
  const double k2 = gain_from_value(m1(0.3), dyn, w, 3.0, Role::Minimizer).K(0, 0);
  EXPECT_NEAR(k2, 2.0 * k1, 1e-15);
}

TEST(GainFromValue, SingularRThrows) {
  CostWeights w{m1(1.0), m1(0.0)};
  EXPECT_THROW(gain_from_value(m1(1.0), LinearDynamics::scalar(-1, 1), w, 1.0, Role::Minimizer), InvalidArgument);
}

TEST(CheckStabilizable, Examples) {
  EXPECT_TRUE(check_stabilizable(LinearDynamics::scalar(-1, 0)));
  EXPECT_TRUE(check_stabilizable(LinearDynamics::scalar(-1, 7)));
  EXPECT_FALSE(check_stabilizable(LinearDynamics::scalar(1, 0)));
  EXPECT_TRUE(check_stabilizable(LinearDynamics::scalar(-1, 1)));
}

TEST(CheckObservable, Examples) {
  EXPECT_TRUE(check_observable(LinearDynamics::scalar(3.0, 1), m1(1.0)));
  EXPECT_FALSE(check_observable(LinearDynamics::scalar(0.0, 1), m1(0.0)));
  EXPECT_TRUE(check_detectable(LinearDynamics::scalar(-1.0, 1), m1(0.0)));
  const auto sc = builtin_leader_follower();
  for (int i = 0; i < sc.n_agents(); ++i)
    EXPECT_TRUE(check_observable(sc.dynamics[static_cast<std::size_t>(i)], sc.weights[static_cast<std::size_t>(i)].Q));
}

TEST(CheckCouplingBound, EdgelessIsSatisfied) {
  const std::vector<LinearDynamics> d(3, LinearDynamics::scalar(-1, 1));
  const std::vector<CostWeights> w(3, CostWeights::scalar(1, 1));
  const CommGraph g(Eigen::MatrixXd::Zero(3, 3));
  const auto sol = solve_fixed_point(g, d, w, SolverConfig{}, std::vector<double>{1, 1, 1});
  const auto rep = check_coupling_bound(g, d, w, sol);
  EXPECT_TRUE(rep.satisfied);
  for (double v : rep.sums) EXPECT_EQ(v, 0.0);
}

TEST(CheckCouplingBound, ScalarAlpha) {
  const auto pr = single(-1, 1, 1, 1);
  const auto sol = solve_fixed_point(pr.graph, pr.dyns, pr.weights, SolverConfig{});
  const auto rep = check_coupling_bound(pr.graph, pr.dyns, pr.weights, sol);
  EXPECT_NEAR(rep.alphas[0], 3.1075, 1e-4);
  EXPECT_NEAR(rep.alphas[0], 2.0 / std::sqrt(kRoot), 1e-9);
}

TEST(CheckCouplingBound, LeaderFollowerReportsMargins) {
  const auto sc = builtin_leader_follower();
  const auto sol = solve_fixed_point(sc.graph, sc.dynamics, sc.weights, SolverConfig{});
  const auto rep = check_coupling_bound(sc.graph, sc.dynamics, sc.weights, sol);
  ASSERT_EQ(rep.margins.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_TRUE(std::isfinite(rep.margins[i]));
    EXPECT_NEAR(rep.margins[i], rep.alphas[i] - rep.sums[i], 1e-15);
  }
  EXPECT_DOUBLE_EQ(rep.sums[1], 3.0);  // leader keeps its full row
}

TEST(SaddleGains, OpposingSigns) {
  const auto sc = builtin_pursuit_evasion();
  const auto sol = solve_fixed_point(sc.graph, sc.dynamics, sc.weights, SolverConfig{});
  std::vector<Role> roles;
  for (const auto& w : sc.weights) roles.push_back(w.role);
  const auto gains = saddle_gains(sol, roles);
  for (std::size_t i = 0; i < gains.size(); ++i) {
    const double u = gains[i].control(s(0.5))(0);
    if (roles[i] == Role::Minimizer) EXPECT_LT(u, 0.0) << i;
    else EXPECT_GT(u, 0.0) << i;
    EXPECT_EQ(gains[i].control(s(0.0))(0), 0.0);
  }
}

TEST(SaddleGains, SwappingRolesNegatesControl) {
  const auto pr = single(-1, 1, 1, 1);
  const auto sol = solve_fixed_point(pr.graph, pr.dyns, pr.weights, SolverConfig{});
  const std::vector<Role> mn{Role::Minimizer}, mx{Role::Maximizer};
  EXPECT_EQ(saddle_gains(sol, mn)[0].control(s(0.9))(0), -saddle_gains(sol, mx)[0].control(s(0.9))(0));
  EXPECT_THROW(saddle_gains(sol, std::vector<Role>{}), InvalidArgument);
}
