#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <span>
#include <string>

#include "hanes/errors.hpp"
#include "hanes/topology.hpp"

namespace hanes {

/// x' = A x + B u, shared form for every agent.
struct LinearDynamics {
  Eigen::MatrixXd A;
  Eigen::MatrixXd B;

  LinearDynamics() = default;
  LinearDynamics(Eigen::MatrixXd a, Eigen::MatrixXd b) : A(std::move(a)), B(std::move(b)) {
    detail::require(A.rows() == A.cols() && A.rows() > 0, "A must be square and nonempty");
    detail::require(B.rows() == A.rows() && B.cols() > 0, "B must be n x m with m > 0");
    detail::require(A.allFinite() && B.allFinite(), "dynamics entries must be finite");
  }

  static LinearDynamics scalar(double a, double b) {
    return {Eigen::MatrixXd::Constant(1, 1, a), Eigen::MatrixXd::Constant(1, 1, b)};
  }

  Eigen::Index state_dim() const noexcept { return A.rows(); }
  Eigen::Index input_dim() const noexcept { return B.cols(); }
};

/// x_ref(t) = amplitude * exp(-decay_rate t) * cos(angular_frequency t),
/// applied to every state component.
struct ReferenceSignal {
  double amplitude = 0.0;
  double decay_rate = 0.0;
  double angular_frequency = 0.0;
};

inline double reference_eval(const ReferenceSignal& ref, double t) {
  detail::require(t >= 0.0, "reference time must be nonnegative");
  return ref.amplitude * std::exp(-ref.decay_rate * t) * std::cos(ref.angular_frequency * t);
}

inline Eigen::VectorXd flow_derivative(const LinearDynamics& dyn, const Eigen::VectorXd& x,
                                       const Eigen::VectorXd& u) {
  detail::require(x.size() == dyn.state_dim() && u.size() == dyn.input_dim(),
                  "flow_derivative: dimension mismatch");
  return dyn.A * x + dyn.B * u;
}

namespace detail {

inline void check_states(const CommGraph& g, std::span<const Eigen::VectorXd> x, int i) {
  require(static_cast<int>(x.size()) == g.size(), "need one state per agent");
  require(i >= 0 && i < g.size(), "agent index " + std::to_string(i) + " out of range");
}

}  // namespace detail

/// delta_i = sum_j a_ij (x_i - x_j).
inline Eigen::VectorXd consensus_error(const CommGraph& g, std::span<const Eigen::VectorXd> x,
                                       int i) {
  detail::check_states(g, x, i);
  const auto& xi = x[static_cast<std::size_t>(i)];
  Eigen::VectorXd d = Eigen::VectorXd::Zero(xi.size());
  for (const auto& l : g.neighbors(i)) d += l.weight * (xi - x[static_cast<std::size_t>(l.source)]);
  return d;
}

/// e_l = x_l - x_ref(t).
inline Eigen::VectorXd leader_error(const Eigen::VectorXd& x_leader, const ReferenceSignal& ref,
                                    double t) {
  return x_leader - Eigen::VectorXd::Constant(x_leader.size(), reference_eval(ref, t));
}

/// e_i = sum_{j in N_i, j follower} a_ij (x_i - x_j) + sum_l b_il (x_i - x_l).
inline Eigen::VectorXd follower_error(const CommGraph& g, std::span<const Eigen::VectorXd> x,
                                      int i) {
  detail::check_states(g, x, i);
  if (g.is_leader(i))
    throw InvalidArgument("follower_error: agent " + std::to_string(i) + " is a leader");
  const auto& xi = x[static_cast<std::size_t>(i)];
  Eigen::VectorXd e = Eigen::VectorXd::Zero(xi.size());
  for (const auto& l : g.neighbors(i)) {
    if (g.is_leader(l.source)) continue;
    e += l.weight * (xi - x[static_cast<std::size_t>(l.source)]);
  }
  for (const auto& l : g.leader_links(i)) e += l.weight * (xi - x[static_cast<std::size_t>(l.source)]);
  return e;
}

/// e_i' = A e_i + c_i B u_i - B sum_j a_ij u_j - B sum_l b_il u_l.
inline Eigen::VectorXd error_flow(const LinearDynamics& dyn, const CommGraph& g,
                                  const Eigen::VectorXd& e_i, std::span<const Eigen::VectorXd> u,
                                  int i) {
  detail::require(static_cast<int>(u.size()) == g.size(), "need one control per agent");
  detail::require(i >= 0 && i < g.size(), "agent index out of range");
  detail::require(e_i.size() == dyn.state_dim(), "error_flow: error dimension mismatch");
  for (const auto& ui : u)
    detail::require(ui.size() == dyn.input_dim(), "error_flow: control dimension mismatch");
  Eigen::VectorXd neighbor_u = Eigen::VectorXd::Zero(dyn.input_dim());
  for (const auto& l : g.neighbors(i)) neighbor_u += l.weight * u[static_cast<std::size_t>(l.source)];
  for (const auto& l : g.leader_links(i)) neighbor_u += l.weight * u[static_cast<std::size_t>(l.source)];
  const double c = g.effective_gain_coefficient(i);
  return dyn.A * e_i + c * (dyn.B * u[static_cast<std::size_t>(i)]) - dyn.B * neighbor_u;
}

}  // namespace hanes
