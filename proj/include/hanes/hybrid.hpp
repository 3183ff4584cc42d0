#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hanes/dynamics.hpp"
#include "hanes/errors.hpp"
#include "hanes/rng.hpp"

namespace hanes {

/// How the jump threshold mu is interpreted.
///
/// The crossing modes use refractory arming: an agent arms once its state is
/// on the far side of mu, fires once when it reaches mu, and stays disarmed
/// until it is back on the far side. `LiteralBand` jumps whenever
/// |x - mu| < mu with no arming; it Zeno-loops into any reset interval inside
/// the band and exists only for fidelity experiments.
enum class TriggerDirection { DownwardCrossing, UpwardCrossing, MagnitudeExceeds, LiteralBand };

enum class EventKind {
  ThresholdJump,   // fired by the trigger, random reset
  ThresholdReset,  // scheduled random reset into the reset interval
  StateSet,        // scheduled reset to an explicit state
  CommLoss,        // incoming link(s) cut for a duration
  AgentFreeze,     // agent holds u = 0 for a duration
};

inline const char* to_string(EventKind k) {
  switch (k) {
    case EventKind::ThresholdJump: return "threshold-jump";
    case EventKind::ThresholdReset: return "threshold-reset";
    case EventKind::StateSet: return "state-set";
    case EventKind::CommLoss: return "comm-loss";
    case EventKind::AgentFreeze: return "agent-freeze";
  }
  return "unknown";
}

inline std::optional<EventKind> event_kind_from_string(const std::string& s) {
  for (auto k : {EventKind::ThresholdJump, EventKind::ThresholdReset, EventKind::StateSet,
                 EventKind::CommLoss, EventKind::AgentFreeze})
    if (s == to_string(k)) return k;
  return std::nullopt;
}

inline const char* to_string(TriggerDirection d) {
  switch (d) {
    case TriggerDirection::DownwardCrossing: return "downward-crossing";
    case TriggerDirection::UpwardCrossing: return "upward-crossing";
    case TriggerDirection::MagnitudeExceeds: return "magnitude-exceeds";
    case TriggerDirection::LiteralBand: return "literal-band";
  }
  return "unknown";
}

inline std::optional<TriggerDirection> trigger_direction_from_string(const std::string& s) {
  for (auto d : {TriggerDirection::DownwardCrossing, TriggerDirection::UpwardCrossing,
                 TriggerDirection::MagnitudeExceeds, TriggerDirection::LiteralBand})
    if (s == to_string(d)) return d;
  return std::nullopt;
}

inline bool changes_state(EventKind k) {
  return k == EventKind::ThresholdJump || k == EventKind::ThresholdReset || k == EventKind::StateSet;
}

struct ScheduledEvent {
  double time = 0.0;
  int agent = 0;
  EventKind kind = EventKind::StateSet;
  double value = 0.0;     // StateSet post-state
  int source = -1;        // CommLoss: transmitting agent, -1 cuts every incoming link
  double duration = 0.0;  // CommLoss / AgentFreeze window length

  friend bool operator==(const ScheduledEvent&, const ScheduledEvent&) = default;
};

struct HybridSpec {
  double jump_threshold = 1.0;
  double reset_lo = 0.3;
  double reset_hi = 0.5;
  TriggerDirection direction = TriggerDirection::DownwardCrossing;
  std::vector<int> enabled_agents;
  std::vector<ScheduledEvent> scheduled_events;
  int zeno_limit = 10;  // jumps per agent per second

  friend bool operator==(const HybridSpec&, const HybridSpec&) = default;

  /// Every invariant violation, empty when valid.
  std::vector<std::string> violations(int n_agents) const {
    std::vector<std::string> out;
    if (!(jump_threshold > 0.0)) out.push_back("jump_threshold must be > 0");
    if (!(reset_lo <= reset_hi)) out.push_back("reset_interval: lo must be <= hi");
    if (zeno_limit < 1) out.push_back("zeno_limit must be >= 1");
    switch (direction) {
      case TriggerDirection::DownwardCrossing:
        if (!(reset_hi < jump_threshold))
          out.push_back("reset_interval must lie strictly below jump_threshold for downward-crossing");
        break;
      case TriggerDirection::UpwardCrossing:
        if (!(reset_lo > jump_threshold))
          out.push_back("reset_interval must lie strictly above jump_threshold for upward-crossing");
        break;
      case TriggerDirection::MagnitudeExceeds:
        if (!(std::abs(reset_lo) < jump_threshold && std::abs(reset_hi) < jump_threshold))
          out.push_back("reset_interval must lie inside (-mu, mu) for magnitude-exceeds");
        break;
      case TriggerDirection::LiteralBand: break;
    }
    for (int a : enabled_agents)
      if (a < 0 || a >= n_agents) out.push_back("enabled agent " + std::to_string(a) + " out of range");
    for (std::size_t k = 0; k < scheduled_events.size(); ++k) {
      const auto& ev = scheduled_events[k];
      const std::string where = "scheduled_events[" + std::to_string(k) + "]: ";
      if (ev.agent < 0 || ev.agent >= n_agents) out.push_back(where + "agent out of range");
      if (!(ev.time >= 0.0) || !std::isfinite(ev.time)) out.push_back(where + "time must be finite and >= 0");
      if (ev.kind == EventKind::ThresholdJump)
        out.push_back(where + "threshold-jump events are trigger-generated and cannot be scheduled");
      if ((ev.kind == EventKind::CommLoss || ev.kind == EventKind::AgentFreeze) && !(ev.duration > 0.0))
        out.push_back(where + "duration must be > 0");
      if (ev.kind == EventKind::CommLoss && (ev.source < -1 || ev.source >= n_agents))
        out.push_back(where + "source out of range");
      if (ev.kind == EventKind::StateSet && !std::isfinite(ev.value))
        out.push_back(where + "value must be finite");
    }
    return out;
  }

  void validate(int n_agents) const {
    const auto v = violations(n_agents);
    if (!v.empty()) throw InvalidArgument("invalid hybrid spec: " + v.front());
  }
};

struct HybridClock {
  double t = 0.0;
  int j = 0;
};

struct Sample {
  double t = 0.0;
  int j = 0;
  std::vector<Eigen::VectorXd> x;
  std::vector<Eigen::VectorXd> u;
  std::vector<Eigen::VectorXd> e;
  std::vector<double> V;
};

struct EventRecord {
  double t = 0.0;
  int j = 0;  // jump count after this event
  int agent = 0;
  EventKind kind = EventKind::StateSet;
  Eigen::VectorXd pre_state;
  Eigen::VectorXd post_state;
  Eigen::VectorXd pre_error;
  Eigen::VectorXd post_error;
};

struct TrajectoryRecord {
  std::vector<Sample> samples;
  std::vector<EventRecord> events;
  std::uint64_t seed = 0;
  double dt = 0.0;
  int n_agents = 0;
};

/// Active discrete modes visible to the feedback policy.
struct LinkState {
  std::vector<std::pair<int, int>> cut;  // (receiver, source); source -1 = all
  std::vector<char> frozen;

  bool is_cut(int receiver, int source) const {
    for (const auto& [r, s] : cut)
      if (r == receiver && (s == -1 || s == source)) return true;
    return false;
  }
  bool any_cut() const noexcept { return !cut.empty(); }
};

struct PolicyOutput {
  std::vector<Eigen::VectorXd> e;
  std::vector<Eigen::VectorXd> u;
  std::vector<double> V;
};

/// Evaluates every agent's error, control and value estimate at (t, x).
using FeedbackPolicy =
    std::function<void(double t, std::span<const Eigen::VectorXd> x, const LinkState&, PolicyOutput&)>;

namespace detail {

inline bool beyond_threshold(const HybridSpec& spec, double x) {
  switch (spec.direction) {
    case TriggerDirection::DownwardCrossing: return x > spec.jump_threshold;
    case TriggerDirection::UpwardCrossing: return x < spec.jump_threshold;
    case TriggerDirection::MagnitudeExceeds: return std::abs(x) < spec.jump_threshold;
    case TriggerDirection::LiteralBand: return true;
  }
  return false;
}

inline bool in_literal_band(const HybridSpec& spec, double x) {
  return std::abs(x - spec.jump_threshold) < spec.jump_threshold;
}

}  // namespace detail

/// Flow holds unless a jump is due; the threshold itself belongs to the jump set.
inline bool in_flow_set(const HybridSpec& spec, double x, bool armed) {
  if (spec.direction == TriggerDirection::LiteralBand) return !detail::in_literal_band(spec, x);
  return !(armed && !detail::beyond_threshold(spec, x));
}

/// True iff an armed agent crossed mu in the configured direction between
/// two consecutive integrator states.
inline bool jump_due(const HybridSpec& spec, double x_prev, double x_next, bool armed) {
  if (spec.direction == TriggerDirection::LiteralBand) return detail::in_literal_band(spec, x_next);
  return armed && detail::beyond_threshold(spec, x_prev) && !detail::beyond_threshold(spec, x_next);
}

/// Uniform post-jump state in [reset_lo, reset_hi]; returns the advanced generator.
inline std::pair<double, SplitMix64> apply_jump(const HybridSpec& spec, double /*x*/, SplitMix64 rng) {
  if (!(spec.reset_lo <= spec.reset_hi) || !std::isfinite(spec.reset_lo) || !std::isfinite(spec.reset_hi))
    throw InvalidArgument("apply_jump: invalid reset interval");
  const double u = rng.uniform();
  return {spec.reset_lo + (spec.reset_hi - spec.reset_lo) * u, rng};
}

/// One classical RK4 step of x' = A x + B u with u held over the step.
inline Eigen::VectorXd integrate_step(const LinearDynamics& dyn, const Eigen::VectorXd& x,
                                      const Eigen::VectorXd& u, double dt) {
  if (!(dt > 0.0)) throw InvalidArgument("integrate_step: dt must be > 0");
  const Eigen::VectorXd bu = dyn.B * u;
  const Eigen::VectorXd k1 = dyn.A * x + bu;
  const Eigen::VectorXd k2 = dyn.A * (x + 0.5 * dt * k1) + bu;
  const Eigen::VectorXd k3 = dyn.A * (x + 0.5 * dt * k2) + bu;
  const Eigen::VectorXd k4 = dyn.A * (x + dt * k3) + bu;
  return x + dt * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
}

/// Fixed-step executor of the multi-agent hybrid inclusion.
///
/// Each `step()` at t_k = k dt: fires scheduled events due at t_k, evaluates
/// the policy and logs a sample, then (unless finished) integrates to t_{k+1}
/// and applies threshold jumps there. Jump detection is at step boundaries
/// only.
class HybridSimulator {
 public:
  HybridSimulator(HybridSpec spec, std::vector<LinearDynamics> dyns, FeedbackPolicy policy,
                  std::vector<Eigen::VectorXd> x0, double t_final, double dt, std::uint64_t seed)
      : spec_(std::move(spec)),
        dyns_(std::move(dyns)),
        policy_(std::move(policy)),
        x_(std::move(x0)),
        dt_(dt),
        rng_(seed) {
    const int n = static_cast<int>(x_.size());
    detail::require(n > 0, "simulate: need at least one agent");
    detail::require(static_cast<int>(dyns_.size()) == n, "simulate: one dynamics per agent");
    detail::require(dt > 0.0 && std::isfinite(dt), "simulate: dt must be > 0");
    detail::require(t_final > 0.0 && std::isfinite(t_final), "simulate: t_final must be > 0");
    detail::require(static_cast<bool>(policy_), "simulate: missing feedback policy");
    for (int i = 0; i < n; ++i)
      detail::require(x_[static_cast<std::size_t>(i)].size() == dyns_[static_cast<std::size_t>(i)].state_dim(),
                      "simulate: initial state dimension mismatch for agent " + std::to_string(i));
    spec_.validate(n);
    for (int a : spec_.enabled_agents)
      detail::require(x_[static_cast<std::size_t>(a)].size() == 1,
                      "threshold triggering needs scalar agent states");

    n_steps_ = static_cast<long>(std::floor(t_final / dt + 1e-9));
    enabled_.assign(static_cast<std::size_t>(n), 0);
    for (int a : spec_.enabled_agents) enabled_[static_cast<std::size_t>(a)] = 1;
    armed_.assign(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i)
      if (enabled_[static_cast<std::size_t>(i)])
        armed_[static_cast<std::size_t>(i)] = detail::beyond_threshold(spec_, x_[static_cast<std::size_t>(i)](0));
    jump_times_.resize(static_cast<std::size_t>(n));
    links_.frozen.assign(static_cast<std::size_t>(n), 0);

    schedule_order_.resize(spec_.scheduled_events.size());
    for (std::size_t k = 0; k < schedule_order_.size(); ++k) schedule_order_[k] = k;
    std::stable_sort(schedule_order_.begin(), schedule_order_.end(), [this](std::size_t a, std::size_t b) {
      return spec_.scheduled_events[a].time < spec_.scheduled_events[b].time;
    });

    record_.seed = seed;
    record_.dt = dt;
    record_.n_agents = n;
    if (record_samples_) record_.samples.reserve(static_cast<std::size_t>(n_steps_ + 1));
  }

  bool finished() const noexcept { return finished_; }
  long step_index() const noexcept { return k_; }
  long step_count() const noexcept { return n_steps_; }
  HybridClock clock() const noexcept { return {time_at(k_), j_}; }
  const std::vector<Eigen::VectorXd>& states() const noexcept { return x_; }
  const PolicyOutput& last_output() const noexcept { return out_; }
  const LinkState& links() const noexcept { return links_; }
  const TrajectoryRecord& record() const noexcept { return record_; }
  TrajectoryRecord take_record() { return std::move(record_); }
  int size() const noexcept { return static_cast<int>(x_.size()); }

  /// All scheduled events have fired.
  bool schedule_exhausted() const noexcept { return next_scheduled_ >= schedule_order_.size(); }

  void set_record_samples(bool on) { record_samples_ = on; }
  void set_policy(FeedbackPolicy p) { policy_ = std::move(p); }

  /// Called for every logged event, after the state change.
  void set_event_hook(std::function<void(const EventRecord&)> hook) { on_event_ = std::move(hook); }

  /// Finish after the sample of the current step.
  void request_stop() noexcept { stop_requested_ = true; }

  void step() {
    if (finished_) throw InvalidArgument("simulate: step() after finish");
    const double t = time_at(k_);
    expire_windows(t);
    fire_scheduled(t);

    evaluate(t, x_, out_);
    if (record_samples_) {
      record_.samples.push_back(Sample{t, j_, x_, out_.u, out_.e, out_.V});
    }
    if (k_ >= n_steps_ || stop_requested_) {
      finished_ = true;
      return;
    }

    const double t_next = time_at(k_ + 1);
    next_.resize(x_.size());
    for (std::size_t i = 0; i < x_.size(); ++i) {
      next_[i] = integrate_step(dyns_[i], x_[i], out_.u[i], dt_);
      if (!next_[i].allFinite())
        throw SimulationAbort(SimulationAbort::Kind::NonFinite,
                              "non-finite state for agent " + std::to_string(i) + " at t=" + std::to_string(t_next));
    }

    jumping_.clear();
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if (!enabled_[i]) continue;
      if (jump_due(spec_, x_[i](0), next_[i](0), armed_[i] != 0)) {
        jumping_.push_back(static_cast<int>(i));
      } else if (detail::beyond_threshold(spec_, next_[i](0))) {
        armed_[i] = 1;
      }
    }
    if (!jumping_.empty()) {
      evaluate(t_next, next_, scratch_);
      const PolicyOutput pre = scratch_;
      std::vector<Eigen::VectorXd> pre_states;
      for (int i : jumping_) {
        const auto ui = static_cast<std::size_t>(i);
        pre_states.push_back(next_[ui]);
        auto [post, rng] = apply_jump(spec_, next_[ui](0), rng_);
        rng_ = rng;
        next_[ui](0) = post;
        armed_[ui] = spec_.direction == TriggerDirection::LiteralBand ? 1 : 0;
      }
      evaluate(t_next, next_, scratch_);
      for (std::size_t k = 0; k < jumping_.size(); ++k) {
        const int i = jumping_[k];
        const auto ui = static_cast<std::size_t>(i);
        EventRecord ev{t_next, ++j_, i, EventKind::ThresholdJump, pre_states[k], next_[ui], pre.e[ui], scratch_.e[ui]};
        log_event(std::move(ev));
      }
    }
    x_.swap(next_);
    ++k_;
  }

  /// Runs to t_final (or a requested stop).
  void run() {
    while (!finished_) step();
  }

 private:
  double time_at(long k) const noexcept { return static_cast<double>(k) * dt_; }

  void evaluate(double t, const std::vector<Eigen::VectorXd>& x, PolicyOutput& out) {
    out.e.resize(x.size());
    out.u.resize(x.size());
    out.V.resize(x.size());
    policy_(t, std::span<const Eigen::VectorXd>(x), links_, out);
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (links_.frozen[i]) out.u[i].setZero(dyns_[i].input_dim());
      if (!out.u[i].allFinite())
        throw SimulationAbort(SimulationAbort::Kind::NonFinite,
                              "non-finite control for agent " + std::to_string(i) + " at t=" + std::to_string(t));
    }
  }

  void log_event(EventRecord ev) {
    if (changes_state(ev.kind)) zeno_guard(ev.agent, ev.t);
    record_.events.push_back(std::move(ev));
    if (on_event_) on_event_(record_.events.back());
  }

  void zeno_guard(int agent, double t) {
    auto& times = jump_times_[static_cast<std::size_t>(agent)];
    times.push_back(t);
    while (!times.empty() && times.front() <= t - 1.0 + 1e-12) times.pop_front();
    if (static_cast<int>(times.size()) > spec_.zeno_limit)
      throw SimulationAbort(SimulationAbort::Kind::Zeno,
                            "Zeno guard: agent " + std::to_string(agent + 1) + " jumped " +
                                std::to_string(times.size()) + " times within 1 s ending at t=" +
                                std::to_string(t) + " (limit " + std::to_string(spec_.zeno_limit) + ")");
  }

  void expire_windows(double t) {
    const double eps = 1e-9 * dt_;
    for (std::size_t w = 0; w < windows_.size();) {
      if (windows_[w].end <= t + eps) {
        const auto& win = windows_[w];
        if (win.kind == EventKind::AgentFreeze) {
          links_.frozen[static_cast<std::size_t>(win.agent)] = 0;
        } else {
          auto it = std::find(links_.cut.begin(), links_.cut.end(), std::make_pair(win.agent, win.source));
          if (it != links_.cut.end()) links_.cut.erase(it);
        }
        windows_.erase(windows_.begin() + static_cast<std::ptrdiff_t>(w));
      } else {
        ++w;
      }
    }
    // a freeze can overlap another freeze on the same agent
    for (const auto& win : windows_)
      if (win.kind == EventKind::AgentFreeze) links_.frozen[static_cast<std::size_t>(win.agent)] = 1;
  }

  void fire_scheduled(double t) {
    const double eps = 1e-9 * dt_;
    while (next_scheduled_ < schedule_order_.size()) {
      const auto& ev = spec_.scheduled_events[schedule_order_[next_scheduled_]];
      if (ev.time > t + eps) break;
      ++next_scheduled_;
      const auto ai = static_cast<std::size_t>(ev.agent);
      EventRecord rec;
      rec.t = t;
      rec.agent = ev.agent;
      rec.kind = ev.kind;
      rec.pre_state = x_[ai];
      evaluate(t, x_, scratch_);
      rec.pre_error = scratch_.e[ai];
      switch (ev.kind) {
        case EventKind::StateSet:
          x_[ai].setConstant(ev.value);
          break;
        case EventKind::ThresholdReset: {
          auto [post, rng] = apply_jump(spec_, x_[ai](0), rng_);
          rng_ = rng;
          x_[ai].setConstant(post);
          break;
        }
        case EventKind::CommLoss:
          links_.cut.emplace_back(ev.agent, ev.source);
          windows_.push_back({t + ev.duration, ev.agent, ev.source, ev.kind});
          break;
        case EventKind::AgentFreeze:
          links_.frozen[ai] = 1;
          windows_.push_back({t + ev.duration, ev.agent, -1, ev.kind});
          break;
        case EventKind::ThresholdJump: break;
      }
      if (enabled_[ai] && changes_state(ev.kind))
        armed_[ai] = detail::beyond_threshold(spec_, x_[ai](0)) ? 1 : 0;
      rec.post_state = x_[ai];
      evaluate(t, x_, scratch_);
      rec.post_error = scratch_.e[ai];
      rec.j = ++j_;
      log_event(std::move(rec));
    }
  }

  struct Window {
    double end;
    int agent;
    int source;
    EventKind kind;
  };

  HybridSpec spec_;
  std::vector<LinearDynamics> dyns_;
  FeedbackPolicy policy_;
  std::vector<Eigen::VectorXd> x_;
  std::vector<Eigen::VectorXd> next_;
  double dt_;
  SplitMix64 rng_;
  long n_steps_ = 0;
  long k_ = 0;
  int j_ = 0;
  bool finished_ = false;
  bool stop_requested_ = false;
  bool record_samples_ = true;
  std::vector<char> enabled_;
  std::vector<char> armed_;
  std::vector<std::deque<double>> jump_times_;
  std::vector<std::size_t> schedule_order_;
  std::size_t next_scheduled_ = 0;
  std::vector<Window> windows_;
  std::vector<int> jumping_;
  LinkState links_;
  PolicyOutput out_;
  PolicyOutput scratch_;
  TrajectoryRecord record_;
  std::function<void(const EventRecord&)> on_event_;
};

/// Runs a full simulation; identical inputs and seed give identical records.
inline TrajectoryRecord simulate(const HybridSpec& spec, std::vector<LinearDynamics> dyns,
                                 FeedbackPolicy policy, std::vector<Eigen::VectorXd> x0, double t_final,
                                 double dt, std::uint64_t seed) {
  HybridSimulator sim(spec, std::move(dyns), std::move(policy), std::move(x0), t_final, dt, seed);
  sim.run();
  return sim.take_record();
}

struct JumpContraction {
  std::vector<double> ratios;  // one per state-changing event, in log order
  double max_ratio = 0.0;
};

/// ||post-jump error|| / ||pre-jump error|| of the jumping agent for every
/// state-changing event. 0/0 counts as 1 (no change); x/0 as +inf.
inline JumpContraction estimate_jump_contraction(const TrajectoryRecord& traj) {
  JumpContraction out;
  for (const auto& ev : traj.events) {
    if (!changes_state(ev.kind)) continue;
    const double pre = ev.pre_error.norm();
    const double post = ev.post_error.norm();
    double r;
    if (pre > 0.0) r = post / pre;
    else r = post > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
    out.ratios.push_back(r);
  }
  if (out.ratios.empty()) throw InvalidArgument("estimate_jump_contraction: no jumps recorded");
  out.max_ratio = *std::max_element(out.ratios.begin(), out.ratios.end());
  return out;
}

}  // namespace hanes
