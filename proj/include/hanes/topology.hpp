#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "hanes/errors.hpp"

namespace hanes {

/// Weighted link into an agent: `weight` is a_ij (or b_il) and `source` is
/// the transmitting agent's index.
struct Link {
  int source;
  double weight;
};

/// Directed communication graph. a_ij > 0 means agent j transmits to agent i.
///
/// Leaders are ordinary agents flagged in the leader set. Links from a leader
/// into a follower are stored separately as leader coupling weights b_il;
/// every other link lives in the adjacency matrix. Immutable once built.
class CommGraph {
 public:
  CommGraph() = default;

  /// Graph without leaders.
  explicit CommGraph(Eigen::MatrixXd adjacency)
      : CommGraph(std::move(adjacency), {}) {}

  /// Graph with a declared leader set. Follower rows that point at a leader
  /// are moved out of the adjacency into the leader coupling matrix.
  CommGraph(Eigen::MatrixXd adjacency, std::vector<int> leaders)
      : adjacency_(std::move(adjacency)), leaders_(std::move(leaders)) {
    validate_adjacency();
    init_leaders();
    coupling_ = Eigen::MatrixXd::Zero(size(), static_cast<Eigen::Index>(leaders_.size()));
    for (int i = 0; i < size(); ++i) {
      if (is_leader_[i]) continue;
      for (std::size_t l = 0; l < leaders_.size(); ++l) {
        const int li = leaders_[l];
        coupling_(i, static_cast<Eigen::Index>(l)) = adjacency_(i, li);
        adjacency_(i, li) = 0.0;
      }
    }
    build_links();
  }

  /// Graph with an explicit leader coupling matrix (n x |leaders|, columns in
  /// the order of `leaders`). The adjacency is used as given.
  CommGraph(Eigen::MatrixXd adjacency, std::vector<int> leaders, Eigen::MatrixXd coupling)
      : adjacency_(std::move(adjacency)), leaders_(std::move(leaders)), coupling_(std::move(coupling)) {
    validate_adjacency();
    init_leaders();
    detail::require(coupling_.rows() == size() &&
                        coupling_.cols() == static_cast<Eigen::Index>(leaders_.size()),
                    "leader coupling must be n x |leaders|");
    detail::require(coupling_.allFinite() && (coupling_.array() >= 0.0).all(),
                    "leader coupling weights must be finite and nonnegative");
    build_links();
  }

  friend bool operator==(const CommGraph& a, const CommGraph& b) {
    return a.leaders_ == b.leaders_ && a.adjacency_.rows() == b.adjacency_.rows() &&
           a.adjacency_.cols() == b.adjacency_.cols() && a.coupling_.rows() == b.coupling_.rows() &&
           a.coupling_.cols() == b.coupling_.cols() && a.adjacency_ == b.adjacency_ && a.coupling_ == b.coupling_;
  }

  int size() const noexcept { return static_cast<int>(adjacency_.rows()); }
  const Eigen::MatrixXd& adjacency() const noexcept { return adjacency_; }
  const Eigen::MatrixXd& leader_coupling() const noexcept { return coupling_; }
  const std::vector<int>& leaders() const noexcept { return leaders_; }

  bool is_leader(int i) const {
    check_index(i);
    return is_leader_[static_cast<std::size_t>(i)];
  }

  std::vector<int> followers() const {
    std::vector<int> out;
    for (int i = 0; i < size(); ++i)
      if (!is_leader_[static_cast<std::size_t>(i)]) out.push_back(i);
    return out;
  }

  /// Adjacency links into agent i, ascending by source.
  const std::vector<Link>& neighbors(int i) const {
    check_index(i);
    return in_links_[static_cast<std::size_t>(i)];
  }

  /// Leader coupling links into agent i (source is the leader's agent index).
  const std::vector<Link>& leader_links(int i) const {
    check_index(i);
    return leader_links_[static_cast<std::size_t>(i)];
  }

  /// d_i = sum_j a_ij.
  double in_degree(int i) const {
    check_index(i);
    double d = 0.0;
    for (const auto& l : in_links_[static_cast<std::size_t>(i)]) d += l.weight;
    return d;
  }

  double leader_weight(int i) const {
    check_index(i);
    double b = 0.0;
    for (const auto& l : leader_links_[static_cast<std::size_t>(i)]) b += l.weight;
    return b;
  }

  /// c_i = d_i + sum_l b_il, the factor multiplying B u_i in the error flow.
  double effective_gain_coefficient(int i) const { return in_degree(i) + leader_weight(i); }

  /// L = D - A over the adjacency (leader coupling excluded).
  Eigen::MatrixXd laplacian() const {
    Eigen::MatrixXd lap = -adjacency_;
    for (int i = 0; i < size(); ++i) lap(i, i) = in_degree(i);
    return lap;
  }

  /// True iff some root reaches every agent along transmitter -> receiver
  /// edges (adjacency and leader coupling both count).
  bool has_spanning_tree() const {
    const int n = size();
    if (n == 0) return false;
    std::vector<std::vector<int>> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      for (const auto& l : in_links_[static_cast<std::size_t>(i)])
        out[static_cast<std::size_t>(l.source)].push_back(i);
      for (const auto& l : leader_links_[static_cast<std::size_t>(i)])
        out[static_cast<std::size_t>(l.source)].push_back(i);
    }
    for (int root = 0; root < n; ++root) {
      std::vector<char> seen(static_cast<std::size_t>(n), 0);
      std::queue<int> q;
      q.push(root);
      seen[static_cast<std::size_t>(root)] = 1;
      int reached = 1;
      while (!q.empty()) {
        const int v = q.front();
        q.pop();
        for (int w : out[static_cast<std::size_t>(v)]) {
          if (!seen[static_cast<std::size_t>(w)]) {
            seen[static_cast<std::size_t>(w)] = 1;
            ++reached;
            q.push(w);
          }
        }
      }
      if (reached == n) return true;
    }
    return false;
  }

  /// Copy with the listed receiver/source links removed. A source of -1
  /// removes every incoming link of the receiver (adjacency and leader).
  CommGraph without_links(const std::vector<std::pair<int, int>>& cuts) const {
    Eigen::MatrixXd adj = adjacency_;
    Eigen::MatrixXd cpl = coupling_;
    for (const auto& [recv, src] : cuts) {
      check_index(recv);
      if (src < 0) {
        adj.row(recv).setZero();
        cpl.row(recv).setZero();
        continue;
      }
      check_index(src);
      adj(recv, src) = 0.0;
      const auto it = std::find(leaders_.begin(), leaders_.end(), src);
      if (it != leaders_.end()) cpl(recv, it - leaders_.begin()) = 0.0;
    }
    return CommGraph(std::move(adj), leaders_, std::move(cpl));
  }

 private:
  void check_index(int i) const {
    if (i < 0 || i >= size())
      throw InvalidArgument("agent index " + std::to_string(i) + " out of range [0, " +
                            std::to_string(size()) + ")");
  }

  void validate_adjacency() const {
    detail::require(adjacency_.rows() == adjacency_.cols(), "adjacency must be square");
    detail::require(adjacency_.rows() > 0, "graph needs at least one agent");
    detail::require(adjacency_.allFinite(), "adjacency weights must be finite");
    detail::require((adjacency_.array() >= 0.0).all(), "adjacency weights must be nonnegative");
    for (Eigen::Index i = 0; i < adjacency_.rows(); ++i)
      detail::require(adjacency_(i, i) == 0.0, "adjacency must have zero diagonal");
  }

  void init_leaders() {
    is_leader_.assign(static_cast<std::size_t>(size()), false);
    for (int l : leaders_) {
      check_index(l);
      detail::require(!is_leader_[static_cast<std::size_t>(l)], "duplicate leader index");
      is_leader_[static_cast<std::size_t>(l)] = true;
    }
  }

  void build_links() {
    const auto n = static_cast<std::size_t>(size());
    in_links_.assign(n, {});
    leader_links_.assign(n, {});
    for (int i = 0; i < size(); ++i) {
      for (int j = 0; j < size(); ++j)
        if (adjacency_(i, j) > 0.0) in_links_[static_cast<std::size_t>(i)].push_back({j, adjacency_(i, j)});
      for (std::size_t l = 0; l < leaders_.size(); ++l) {
        const double b = coupling_(i, static_cast<Eigen::Index>(l));
        if (b > 0.0) leader_links_[static_cast<std::size_t>(i)].push_back({leaders_[l], b});
      }
    }
  }

  Eigen::MatrixXd adjacency_;
  std::vector<int> leaders_;
  Eigen::MatrixXd coupling_;
  std::vector<bool> is_leader_;
  std::vector<std::vector<Link>> in_links_;
  std::vector<std::vector<Link>> leader_links_;
};

}  // namespace hanes
