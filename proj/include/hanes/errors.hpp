#pragma once

#include <stdexcept>
#include <string>

namespace hanes {

/// Bad argument to a library call: index out of range, dimension mismatch,
/// malformed interval, and so on.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The Riccati fixed-point iteration failed.
class SolverFailure : public std::runtime_error {
 public:
  enum class Kind { Divergence, LostDefiniteness, MaxIterations, Precondition };

  SolverFailure(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::Divergence: return "divergence";
      case Kind::LostDefiniteness: return "lost-definiteness";
      case Kind::MaxIterations: return "max-iterations";
      case Kind::Precondition: return "precondition";
    }
    return "unknown";
  }

 private:
  Kind kind_;
};

/// A simulation run was aborted (Zeno guard tripped, non-finite state).
class SimulationAbort : public std::runtime_error {
 public:
  enum class Kind { Zeno, NonFinite };

  SimulationAbort(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace detail
}  // namespace hanes
