#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hanes/errors.hpp"
#include "hanes/hanes_runtime.hpp"
#include "hanes/hybrid.hpp"
#include "hanes/nash_solver.hpp"
#include "hanes/scenarios.hpp"

namespace hanes {

inline constexpr const char* kScenarioSchema = "hanes-scenario/1";
inline constexpr const char* kSummarySchema = "hanes-summary/1";

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Scenario JSON

namespace detail {

inline json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

/// Reads typed fields and records every problem with its path instead of
/// stopping at the first one.
class FieldReader {
 public:
  std::vector<std::string> errors;

  const json* field(const json& obj, const std::string& key, const std::string& path, bool required = true) {
    if (!obj.is_object()) {
      errors.push_back(path + ": expected an object");
      return nullptr;
    }
    auto it = obj.find(key);
    if (it == obj.end() || (!required && it->is_null())) {
      if (required) errors.push_back(join(path, key) + ": missing");
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> number(const json& obj, const std::string& key, const std::string& path, bool required = true) {
    const json* v = field(obj, key, path, required);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      errors.push_back(join(path, key) + ": expected a number");
      return std::nullopt;
    }
    return v->get<double>();
  }

  std::optional<std::string> string(const json& obj, const std::string& key, const std::string& path,
                                    bool required = true) {
    const json* v = field(obj, key, path, required);
    if (!v) return std::nullopt;
    if (!v->is_string()) {
      errors.push_back(join(path, key) + ": expected a string");
      return std::nullopt;
    }
    return v->get<std::string>();
  }

  std::optional<long long> integer(const json& obj, const std::string& key, const std::string& path,
                                   bool required = true) {
    const json* v = field(obj, key, path, required);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
      errors.push_back(join(path, key) + ": expected an integer");
      return std::nullopt;
    }
    return v->get<long long>();
  }

  std::optional<Eigen::MatrixXd> matrix(const json& obj, const std::string& key, const std::string& path,
                                        bool required = true) {
    const json* v = field(obj, key, path, required);
    if (!v) return std::nullopt;
    return as_matrix(*v, join(path, key));
  }

  std::optional<Eigen::MatrixXd> as_matrix(const json& v, const std::string& path) {
    if (!v.is_array()) {
      errors.push_back(path + ": expected an array of rows");
      return std::nullopt;
    }
    const auto rows = static_cast<Eigen::Index>(v.size());
    const auto cols = rows ? static_cast<Eigen::Index>(v[0].is_array() ? v[0].size() : 0) : 0;
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const auto& row = v[static_cast<std::size_t>(i)];
      if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
        errors.push_back(path + "[" + std::to_string(i) + "]: rows must be arrays of equal length");
        return std::nullopt;
      }
      for (Eigen::Index j = 0; j < cols; ++j) {
        const auto& x = row[static_cast<std::size_t>(j)];
        if (!x.is_number()) {
          errors.push_back(path + "[" + std::to_string(i) + "][" + std::to_string(j) + "]: expected a number");
          return std::nullopt;
        }
        m(i, j) = x.get<double>();
      }
    }
    return m;
  }

  std::optional<std::vector<double>> numbers(const json& obj, const std::string& key, const std::string& path,
                                             bool required = true) {
    const json* v = field(obj, key, path, required);
    if (!v) return std::nullopt;
    if (!v->is_array()) {
      errors.push_back(join(path, key) + ": expected an array");
      return std::nullopt;
    }
    std::vector<double> out;
    for (std::size_t k = 0; k < v->size(); ++k) {
      if (!(*v)[k].is_number()) {
        errors.push_back(join(path, key) + "[" + std::to_string(k) + "]: expected a number");
        return std::nullopt;
      }
      out.push_back((*v)[k].get<double>());
    }
    return out;
  }

  std::optional<std::vector<int>> indices(const json& obj, const std::string& key, const std::string& path,
                                          bool required = true) {
    const json* v = field(obj, key, path, required);
    if (!v) return std::nullopt;
    if (!v->is_array()) {
      errors.push_back(join(path, key) + ": expected an array");
      return std::nullopt;
    }
    std::vector<int> out;
    for (std::size_t k = 0; k < v->size(); ++k) {
      if (!(*v)[k].is_number_integer()) {
        errors.push_back(join(path, key) + "[" + std::to_string(k) + "]: expected an integer");
        return std::nullopt;
      }
      out.push_back((*v)[k].get<int>());
    }
    return out;
  }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }
};

}  // namespace detail

inline json scenario_to_json(const ScenarioConfig& s) {
  json j;
  j["schema"] = kScenarioSchema;
  j["name"] = s.name;
  json agents = json::array();
  for (int i = 0; i < s.n_agents(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    json a;
    a["A"] = detail::matrix_to_json(s.dynamics[ui].A);
    a["B"] = detail::matrix_to_json(s.dynamics[ui].B);
    a["Q"] = detail::matrix_to_json(s.weights[ui].Q);
    a["R"] = detail::matrix_to_json(s.weights[ui].R);
    a["role"] = to_string(s.weights[ui].role);
    a["jump_penalty"] = s.weights[ui].jump_penalty;
    a["x0"] = detail::vector_to_json(s.x0[ui]);
    agents.push_back(std::move(a));
  }
  j["agents"] = std::move(agents);
  j["graph"] = {{"adjacency", detail::matrix_to_json(s.graph.adjacency())},
                {"leaders", s.graph.leaders()},
                {"leader_coupling", detail::matrix_to_json(s.graph.leader_coupling())}};
  j["reference"] = s.reference ? json{{"amplitude", s.reference->amplitude},
                                      {"decay_rate", s.reference->decay_rate},
                                      {"angular_frequency", s.reference->angular_frequency}}
                               : json(nullptr);
  j["fixed_gains"] = s.fixed_gains ? json{{"k_consensus", s.fixed_gains->k_consensus},
                                          {"k_tracking", s.fixed_gains->k_tracking}}
                                   : json(nullptr);
  json events = json::array();
  for (const auto& ev : s.hybrid.scheduled_events)
    events.push_back({{"time", ev.time},
                      {"agent", ev.agent},
                      {"kind", to_string(ev.kind)},
                      {"value", ev.value},
                      {"source", ev.source},
                      {"duration", ev.duration}});
  j["hybrid"] = {{"jump_threshold", s.hybrid.jump_threshold},
                 {"reset_interval", {s.hybrid.reset_lo, s.hybrid.reset_hi}},
                 {"direction", to_string(s.hybrid.direction)},
                 {"enabled_agents", s.hybrid.enabled_agents},
                 {"zeno_limit", s.hybrid.zeno_limit},
                 {"scheduled_events", std::move(events)}};
  j["dt"] = s.dt;
  j["t_final"] = s.t_final;
  j["seed"] = s.seed;
  j["controller"] = to_string(s.controller);
  j["diagnostics"] = {{"gamma", s.diagnostics.gamma},
                      {"beta", s.diagnostics.beta},
                      {"gamma_base", s.diagnostics.gamma_base},
                      {"q_joint", detail::matrix_to_json(s.diagnostics.q_joint)},
                      {"p_hybrid", s.diagnostics.p_hybrid}};
  return j;
}

inline std::string serialize_scenario(const ScenarioConfig& s) { return scenario_to_json(s).dump(2) + "\n"; }

/// Parsed scenario, or every violation found (syntax, schema, invariants).
struct ScenarioLoad {
  std::optional<ScenarioConfig> config;
  std::vector<std::string> violations;
  bool ok() const noexcept { return config.has_value() && violations.empty(); }
};

inline ScenarioLoad scenario_from_json(const json& j) {
  ScenarioLoad out;
  detail::FieldReader rd;
  ScenarioConfig s;
  if (!j.is_object()) {
    out.violations.push_back("document: expected a JSON object");
    return out;
  }
  if (auto schema = rd.string(j, "schema", ""); schema && *schema != kScenarioSchema)
    rd.errors.push_back("schema: unsupported version '" + *schema + "' (expected " + kScenarioSchema + ")");
  if (auto name = rd.string(j, "name", "")) s.name = *name;

  std::optional<Eigen::MatrixXd> adjacency, coupling;
  std::optional<std::vector<int>> leaders;
  if (const json* g = rd.field(j, "graph", "")) {
    adjacency = rd.matrix(*g, "adjacency", "graph");
    leaders = rd.indices(*g, "leaders", "graph", false);
    coupling = rd.matrix(*g, "leader_coupling", "graph", false);
  }

  if (const json* agents = rd.field(j, "agents", "")) {
    if (!agents->is_array()) {
      rd.errors.push_back("agents: expected an array");
    } else {
      for (std::size_t i = 0; i < agents->size(); ++i) {
        const std::string path = "agents[" + std::to_string(i) + "]";
        const json& a = (*agents)[i];
        auto A = rd.matrix(a, "A", path);
        auto B = rd.matrix(a, "B", path);
        auto Q = rd.matrix(a, "Q", path);
        auto R = rd.matrix(a, "R", path);
        auto role = rd.string(a, "role", path);
        auto p = rd.number(a, "jump_penalty", path);
        auto x0 = rd.numbers(a, "x0", path);
        if (A && B) {
          try {
            s.dynamics.emplace_back(*A, *B);
          } catch (const InvalidArgument& e) {
            rd.errors.push_back(path + ": " + e.what());
          }
        }
        CostWeights w;
        if (Q) w.Q = *Q;
        if (R) w.R = *R;
        if (p) w.jump_penalty = *p;
        if (role) {
          if (*role == "minimizer") w.role = Role::Minimizer;
          else if (*role == "maximizer") w.role = Role::Maximizer;
          else rd.errors.push_back(path + ".role: expected 'minimizer' or 'maximizer'");
        }
        if (Q && R) s.weights.push_back(std::move(w));
        if (x0) s.x0.push_back(Eigen::Map<const Eigen::VectorXd>(x0->data(), static_cast<Eigen::Index>(x0->size())));
      }
    }
  }

  if (adjacency) {
    try {
      s.graph = coupling ? CommGraph(*adjacency, leaders.value_or(std::vector<int>{}), *coupling)
                         : CommGraph(*adjacency, leaders.value_or(std::vector<int>{}));
    } catch (const InvalidArgument& e) {
      rd.errors.push_back(std::string("graph: ") + e.what());
    }
  }

  if (const json* r = rd.field(j, "reference", "", false)) {
    auto a = rd.number(*r, "amplitude", "reference");
    auto d = rd.number(*r, "decay_rate", "reference");
    auto w = rd.number(*r, "angular_frequency", "reference");
    if (a && d && w) s.reference = ReferenceSignal{*a, *d, *w};
  }
  if (const json* f = rd.field(j, "fixed_gains", "", false)) {
    auto kc = rd.number(*f, "k_consensus", "fixed_gains");
    auto kt = rd.number(*f, "k_tracking", "fixed_gains");
    if (kc && kt) s.fixed_gains = FixedGains{*kc, *kt};
  }

  if (const json* h = rd.field(j, "hybrid", "")) {
    if (auto mu = rd.number(*h, "jump_threshold", "hybrid")) s.hybrid.jump_threshold = *mu;
    if (auto iv = rd.numbers(*h, "reset_interval", "hybrid")) {
      if (iv->size() != 2) rd.errors.push_back("hybrid.reset_interval: expected [lo, hi]");
      else {
        s.hybrid.reset_lo = (*iv)[0];
        s.hybrid.reset_hi = (*iv)[1];
      }
    }
    if (auto d = rd.string(*h, "direction", "hybrid")) {
      if (auto dir = trigger_direction_from_string(*d)) s.hybrid.direction = *dir;
      else rd.errors.push_back("hybrid.direction: unknown direction '" + *d + "'");
    }
    if (auto en = rd.indices(*h, "enabled_agents", "hybrid", false)) s.hybrid.enabled_agents = *en;
    if (auto z = rd.integer(*h, "zeno_limit", "hybrid", false)) s.hybrid.zeno_limit = static_cast<int>(*z);
    if (const json* evs = rd.field(*h, "scheduled_events", "hybrid", false)) {
      if (!evs->is_array()) {
        rd.errors.push_back("hybrid.scheduled_events: expected an array");
      } else {
        for (std::size_t k = 0; k < evs->size(); ++k) {
          const std::string path = "hybrid.scheduled_events[" + std::to_string(k) + "]";
          const json& e = (*evs)[k];
          ScheduledEvent ev;
          if (auto t = rd.number(e, "time", path)) ev.time = *t;
          if (auto a = rd.integer(e, "agent", path)) ev.agent = static_cast<int>(*a);
          if (auto kind = rd.string(e, "kind", path)) {
            if (auto kk = event_kind_from_string(*kind)) ev.kind = *kk;
            else rd.errors.push_back(path + ".kind: unknown event kind '" + *kind + "'");
          }
          if (auto v = rd.number(e, "value", path, false)) ev.value = *v;
          if (auto src = rd.integer(e, "source", path, false)) ev.source = static_cast<int>(*src);
          if (auto d = rd.number(e, "duration", path, false)) ev.duration = *d;
          s.hybrid.scheduled_events.push_back(ev);
        }
      }
    }
  }

  if (auto dt = rd.number(j, "dt", "")) s.dt = *dt;
  if (auto tf = rd.number(j, "t_final", "")) s.t_final = *tf;
  if (const json* seed = rd.field(j, "seed", "")) {
    if (seed->is_number_unsigned()) s.seed = seed->get<std::uint64_t>();
    else rd.errors.push_back("seed: expected a nonnegative integer");
  }
  if (auto c = rd.string(j, "controller", "", false)) {
    if (auto src = controller_source_from_string(*c)) s.controller = *src;
    else rd.errors.push_back("controller: unknown source '" + *c + "'");
  }
  if (const json* d = rd.field(j, "diagnostics", "", false)) {
    if (auto g = rd.numbers(*d, "gamma", "diagnostics", false)) s.diagnostics.gamma = *g;
    if (auto b = rd.number(*d, "beta", "diagnostics", false)) s.diagnostics.beta = *b;
    if (auto gb = rd.number(*d, "gamma_base", "diagnostics", false)) s.diagnostics.gamma_base = *gb;
    if (auto q = rd.matrix(*d, "q_joint", "diagnostics", false)) s.diagnostics.q_joint = *q;
    if (auto p = rd.number(*d, "p_hybrid", "diagnostics", false)) s.diagnostics.p_hybrid = *p;
  }

  out.violations = std::move(rd.errors);
  if (out.violations.empty()) {
    out.violations = s.violations();
    // 'weights[i]' and 'dynamics[i]' both live under agents[i] in the file
    for (auto& v : out.violations) {
      for (const char* field : {"weights[", "dynamics[", "x0["}) {
        if (v.rfind(field, 0) == 0) v = "agents[" + v.substr(std::string(field).size());
      }
    }
  }
  if (out.violations.empty()) out.config = std::move(s);
  return out;
}

inline ScenarioLoad parse_scenario(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    return {std::nullopt, {std::string("syntax: ") + e.what()}};
  }
  return scenario_from_json(j);
}

inline ScenarioLoad load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return {std::nullopt, {"file: cannot read '" + path.string() + "'"}};
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

/// Builtin name or path to a scenario file.
inline ScenarioConfig resolve_scenario(const std::string& name_or_path) {
  if (auto b = builtin_scenario(name_or_path)) return *b;
  auto load = load_scenario(name_or_path);
  if (!load.ok()) {
    std::string msg = "cannot load scenario '" + name_or_path + "':";
    for (const auto& v : load.violations) msg += "\n  " + v;
    throw InvalidArgument(msg);
  }
  return *load.config;
}

inline void save_scenario(const ScenarioConfig& s, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_scenario(s);
}

// ---------------------------------------------------------------------------
// Trajectory CSV

namespace detail {

inline std::string fmt12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::string fmt_vec(const Eigen::VectorXd& v) {
  std::string s;
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    if (k) s += ';';
    s += fmt12(v(k));
  }
  return s;
}

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << body;
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace detail

inline std::filesystem::path events_path(const std::filesystem::path& csv) {
  return std::filesystem::path(csv.string() + ".events.csv");
}

inline std::string trajectory_csv(const TrajectoryRecord& traj) {
  std::string s = "# agents labelled 1.." + std::to_string(traj.n_agents) +
                  " (internal index + 1); seed=" + std::to_string(traj.seed) + "; dt=" + detail::fmt12(traj.dt) + "\n";
  s += "t,j,agent,x,u,e,V\n";
  for (const auto& smp : traj.samples) {
    for (std::size_t i = 0; i < smp.x.size(); ++i) {
      s += detail::fmt12(smp.t) + ',' + std::to_string(smp.j) + ',' + std::to_string(i + 1) + ',' +
           detail::fmt_vec(smp.x[i]) + ',' + detail::fmt_vec(smp.u[i]) + ',' + detail::fmt_vec(smp.e[i]) + ',' +
           detail::fmt12(smp.V[i]) + '\n';
    }
  }
  return s;
}

inline std::string events_csv(const TrajectoryRecord& traj) {
  std::string s = "t,j,agent,kind,pre_state,post_state\n";
  for (const auto& ev : traj.events)
    s += detail::fmt12(ev.t) + ',' + std::to_string(ev.j) + ',' + std::to_string(ev.agent + 1) + ',' +
         to_string(ev.kind) + ',' + detail::fmt_vec(ev.pre_state) + ',' + detail::fmt_vec(ev.post_state) + '\n';
  return s;
}

/// Writes `path` and the sibling `<path>.events.csv`.
inline void export_csv(const TrajectoryRecord& traj, const std::filesystem::path& path) {
  detail::write_file(path, trajectory_csv(traj));
  detail::write_file(events_path(path), events_csv(traj));
}

// ---------------------------------------------------------------------------
// Run summary JSON

namespace detail {

inline json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double null_as_inf(const json& v) {
  return v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>();
}

inline std::vector<double> doubles_or_inf(const json& a) {
  std::vector<double> out;
  for (const auto& v : a) out.push_back(null_as_inf(v));
  return out;
}

}  // namespace detail

struct SummaryDocument {
  RunSummary summary;
  std::optional<NashSolution> solution;
  std::optional<ConditionReport> conditions;
};

inline json summary_to_json(const RunSummary& s, const std::optional<NashSolution>& sol,
                            const std::optional<ConditionReport>& cond = std::nullopt) {
  json j;
  j["schema"] = kSummarySchema;
  j["scenario"] = s.scenario;
  j["converged"] = s.converged;
  j["convergence_time"] = s.convergence_time ? json(*s.convergence_time) : json(nullptr);
  j["final_max_error"] = s.final_max_error;
  j["jump_counts"] = s.jump_counts;
  j["costs"] = s.costs;
  j["seed"] = s.seed;
  j["epsilon"] = s.epsilon;
  j["t_max"] = s.t_max;
  j["controller"] = s.controller;
  j["solver"] = {{"mode", s.solver_mode},
                 {"error", s.solver_error ? json(*s.solver_error) : json(nullptr)},
                 {"iterations", s.solver_iterations},
                 {"max_residual", s.max_residual},
                 {"resolves", s.resolves}};
  j["lyapunov_violations"] = s.lyapunov_violations;
  j["max_jump_contraction"] =
      s.max_jump_contraction ? detail::finite_or_null(*s.max_jump_contraction) : json("none");
  if (sol) {
    json p = json::array(), k = json::array();
    for (const auto& v : sol->P) p.push_back(detail::matrix_to_json(v.P));
    for (const auto& g : sol->K) k.push_back(detail::matrix_to_json(g));
    j["solution"] = {{"mode", to_string(sol->mode)},
                     {"P", std::move(p)},
                     {"K", std::move(k)},
                     {"coefficients", sol->coefficients},
                     {"iterations", sol->iterations},
                     {"residuals", sol->residuals},
                     {"sweep_deltas", sol->sweep_deltas},
                     {"contraction_ratios", sol->contraction_ratios}};
  } else {
    j["solution"] = nullptr;
  }
  if (cond) {
    json c;
    c["spanning_tree"] = cond->spanning_tree;
    c["stabilizable"] = json::array();
    c["observable"] = json::array();
    for (char b : cond->stabilizable) c["stabilizable"].push_back(static_cast<bool>(b));
    for (char b : cond->observable) c["observable"].push_back(static_cast<bool>(b));
    if (cond->coupling) {
      json sums = json::array(), alphas = json::array(), margins = json::array();
      for (double v : cond->coupling->sums) sums.push_back(v);
      for (double v : cond->coupling->alphas) alphas.push_back(detail::finite_or_null(v));
      for (double v : cond->coupling->margins) margins.push_back(detail::finite_or_null(v));
      c["coupling_bound"] = {{"sums", sums}, {"alphas", alphas}, {"margins", margins},
                             {"satisfied", cond->coupling->satisfied}};
    } else {
      c["coupling_bound"] = nullptr;
    }
    c["solver_error"] = cond->solver_error ? json(*cond->solver_error) : json(nullptr);
    j["conditions"] = std::move(c);
  }
  return j;
}

inline std::string serialize_summary(const RunSummary& s, const std::optional<NashSolution>& sol,
                                     const std::optional<ConditionReport>& cond = std::nullopt) {
  return summary_to_json(s, sol, cond).dump(2) + "\n";
}

inline void export_summary(const RunSummary& s, const std::optional<NashSolution>& sol,
                           const std::filesystem::path& path,
                           const std::optional<ConditionReport>& cond = std::nullopt) {
  detail::write_file(path, serialize_summary(s, sol, cond));
}

/// Inverse of serialize_summary.
inline SummaryDocument parse_summary(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("schema", "") != kSummarySchema) throw InvalidArgument("summary: unsupported schema");
  SummaryDocument doc;
  auto& s = doc.summary;
  s.scenario = j.at("scenario").get<std::string>();
  s.converged = j.at("converged").get<bool>();
  if (!j.at("convergence_time").is_null()) s.convergence_time = j.at("convergence_time").get<double>();
  s.final_max_error = j.at("final_max_error").get<double>();
  s.jump_counts = j.at("jump_counts").get<std::vector<int>>();
  s.costs = j.at("costs").get<std::vector<double>>();
  s.seed = j.at("seed").get<std::uint64_t>();
  s.epsilon = j.at("epsilon").get<double>();
  s.t_max = j.at("t_max").get<double>();
  s.controller = j.at("controller").get<std::string>();
  const auto& sv = j.at("solver");
  s.solver_mode = sv.at("mode").get<std::string>();
  if (!sv.at("error").is_null()) s.solver_error = sv.at("error").get<std::string>();
  s.solver_iterations = sv.at("iterations").get<int>();
  s.max_residual = sv.at("max_residual").get<double>();
  s.resolves = sv.at("resolves").get<int>();
  s.lyapunov_violations = j.at("lyapunov_violations").get<int>();
  const auto& mj = j.at("max_jump_contraction");
  if (!(mj.is_string() && mj.get<std::string>() == "none")) s.max_jump_contraction = detail::null_as_inf(mj);

  detail::FieldReader rd;
  if (const auto& sj = j.at("solution"); !sj.is_null()) {
    NashSolution sol;
    sol.mode = solver_mode_from_string(sj.at("mode").get<std::string>()).value_or(SolverMode::Decoupled);
    for (const auto& p : sj.at("P")) sol.P.push_back({*rd.as_matrix(p, "solution.P")});
    for (const auto& k : sj.at("K")) sol.K.push_back(*rd.as_matrix(k, "solution.K"));
    sol.coefficients = sj.at("coefficients").get<std::vector<double>>();
    sol.iterations = sj.at("iterations").get<int>();
    sol.residuals = sj.at("residuals").get<std::vector<double>>();
    sol.sweep_deltas = sj.at("sweep_deltas").get<std::vector<double>>();
    sol.contraction_ratios = sj.at("contraction_ratios").get<std::vector<double>>();
    doc.solution = std::move(sol);
  }
  if (j.contains("conditions")) {
    const auto& c = j.at("conditions");
    ConditionReport rep;
    rep.spanning_tree = c.at("spanning_tree").get<bool>();
    for (const auto& b : c.at("stabilizable")) rep.stabilizable.push_back(b.get<bool>());
    for (const auto& b : c.at("observable")) rep.observable.push_back(b.get<bool>());
    if (const auto& cb = c.at("coupling_bound"); !cb.is_null()) {
      CouplingBoundReport r;
      r.sums = cb.at("sums").get<std::vector<double>>();
      r.alphas = detail::doubles_or_inf(cb.at("alphas"));
      r.margins = detail::doubles_or_inf(cb.at("margins"));
      r.satisfied = cb.at("satisfied").get<bool>();
      rep.coupling = std::move(r);
    }
    if (!c.at("solver_error").is_null()) rep.solver_error = c.at("solver_error").get<std::string>();
    doc.conditions = std::move(rep);
  }
  if (!rd.errors.empty()) throw InvalidArgument("summary: " + rd.errors.front());
  return doc;
}

// ---------------------------------------------------------------------------
// SVG plots

struct PlotOptions {
  std::optional<std::vector<int>> agents;      // 0-based subset; all agents when unset
  std::optional<double> threshold;             // drawn as a dashed line on the state plot
};

namespace detail {

inline std::string fmt_coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

inline const char* palette(std::size_t k) {
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return colors[k % 8];
}

struct SeriesPlot {
  std::string title;
  std::vector<std::vector<std::pair<double, double>>> lines;  // per agent
  std::vector<std::string> labels;
  std::vector<std::pair<double, double>> markers;             // jump markers
  std::optional<double> hline;
};

inline std::string render_svg(const SeriesPlot& p) {
  constexpr double W = 720, H = 400, L = 60, R = 20, T = 36, B = 44;
  double tmin = std::numeric_limits<double>::infinity(), tmax = -tmin, ymin = tmin, ymax = -tmin;
  auto take = [&](double t, double y) {
    tmin = std::min(tmin, t);
    tmax = std::max(tmax, t);
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  };
  for (const auto& l : p.lines)
    for (const auto& [t, y] : l) take(t, y);
  for (const auto& [t, y] : p.markers) take(t, y);
  if (p.hline) {
    ymin = std::min(ymin, *p.hline);
    ymax = std::max(ymax, *p.hline);
  }
  if (!(tmax > tmin)) tmax = tmin + 1.0;
  if (!(ymax > ymin)) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  const double pad = 0.05 * (ymax - ymin);
  ymin -= pad;
  ymax += pad;
  auto sx = [&](double t) { return L + (t - tmin) / (tmax - tmin) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"400\" viewBox=\"0 0 720 400\">\n";
  s += "<rect width=\"720\" height=\"400\" fill=\"white\"/>\n";
  s += "<text x=\"360\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">" + p.title +
       "</text>\n";
  s += "<line x1=\"" + fmt_coord(L) + "\" y1=\"" + fmt_coord(H - B) + "\" x2=\"" + fmt_coord(W - R) + "\" y2=\"" +
       fmt_coord(H - B) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fmt_coord(L) + "\" y1=\"" + fmt_coord(T) + "\" x2=\"" + fmt_coord(L) + "\" y2=\"" +
       fmt_coord(H - B) + "\" stroke=\"black\"/>\n";
  auto label = [&](double x, double y, const std::string& text, const char* anchor) {
    s += "<text x=\"" + fmt_coord(x) + "\" y=\"" + fmt_coord(y) + "\" text-anchor=\"" + anchor +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + text + "</text>\n";
  };
  label(L, H - B + 16, fmt12(tmin), "middle");
  label(W - R, H - B + 16, fmt12(tmax), "middle");
  label((L + W - R) / 2, H - 8, "t [s]", "middle");
  label(L - 6, sy(ymin) + 4, fmt_coord(ymin), "end");
  label(L - 6, sy(ymax) + 4, fmt_coord(ymax), "end");
  if (ymin < 0.0 && ymax > 0.0)
    s += "<line x1=\"" + fmt_coord(L) + "\" y1=\"" + fmt_coord(sy(0.0)) + "\" x2=\"" + fmt_coord(W - R) + "\" y2=\"" +
         fmt_coord(sy(0.0)) + "\" stroke=\"#bbbbbb\"/>\n";
  if (p.hline)
    s += "<line class=\"threshold\" x1=\"" + fmt_coord(L) + "\" y1=\"" + fmt_coord(sy(*p.hline)) + "\" x2=\"" +
         fmt_coord(W - R) + "\" y2=\"" + fmt_coord(sy(*p.hline)) + "\" stroke=\"#888888\" stroke-dasharray=\"5,4\"/>\n";
  for (std::size_t k = 0; k < p.lines.size(); ++k) {
    s += "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" + std::string(palette(k)) + "\" points=\"";
    for (std::size_t q = 0; q < p.lines[k].size(); ++q) {
      if (q) s += ' ';
      s += fmt_coord(sx(p.lines[k][q].first)) + ',' + fmt_coord(sy(p.lines[k][q].second));
    }
    s += "\"/>\n";
    label(W - R - 4, T + 14 + 14 * static_cast<double>(k), p.labels[k], "end");
  }
  for (const auto& [t, y] : p.markers)
    s += "<circle class=\"jump\" cx=\"" + fmt_coord(sx(t)) + "\" cy=\"" + fmt_coord(sy(y)) +
         "\" r=\"4\" fill=\"none\" stroke=\"black\" data-t=\"" + fmt12(t) + "\" data-y=\"" + fmt12(y) + "\"/>\n";
  s += "</svg>\n";
  return s;
}

}  // namespace detail

/// Writes <prefix>_states.svg, _controls.svg, _errors.svg and _values.svg.
/// State-changing events are marked at their pre-jump state (time and value).
inline std::vector<std::filesystem::path> render_plots(const TrajectoryRecord& traj, const std::string& prefix,
                                                       const PlotOptions& opt = {}) {
  if (traj.samples.empty()) throw InvalidArgument("render_plots: empty trajectory");
  std::vector<int> agents;
  if (opt.agents) {
    if (opt.agents->empty()) throw InvalidArgument("render_plots: empty agent subset");
    for (int a : *opt.agents)
      detail::require(a >= 0 && a < traj.n_agents, "render_plots: agent " + std::to_string(a) + " out of range");
    agents = *opt.agents;
  } else {
    for (int i = 0; i < traj.n_agents; ++i) agents.push_back(i);
  }

  struct Panel {
    const char* suffix;
    const char* title;
    int which;  // 0 x, 1 u, 2 e, 3 V
  };
  const Panel panels[] = {{"_states.svg", "Agent states", 0},
                          {"_controls.svg", "Control inputs", 1},
                          {"_errors.svg", "Errors", 2},
                          {"_values.svg", "Value estimates", 3}};
  std::vector<std::filesystem::path> written;
  for (const auto& panel : panels) {
    detail::SeriesPlot plot;
    plot.title = panel.title;
    for (int a : agents) {
      const auto ua = static_cast<std::size_t>(a);
      std::vector<std::pair<double, double>> line;
      line.reserve(traj.samples.size());
      for (const auto& s : traj.samples) {
        double y = 0.0;
        switch (panel.which) {
          case 0: y = s.x[ua](0); break;
          case 1: y = s.u[ua](0); break;
          case 2: y = s.e[ua](0); break;
          default: y = s.V[ua]; break;
        }
        line.emplace_back(s.t, y);
      }
      plot.lines.push_back(std::move(line));
      plot.labels.push_back("agent " + std::to_string(a + 1));
    }
    if (panel.which == 0) {
      plot.hline = opt.threshold;
      for (const auto& ev : traj.events)
        if (changes_state(ev.kind) && std::find(agents.begin(), agents.end(), ev.agent) != agents.end())
          plot.markers.emplace_back(ev.t, ev.pre_state(0));
    }
    const std::filesystem::path path = prefix + panel.suffix;
    detail::write_file(path, detail::render_svg(plot));
    written.push_back(path);
  }
  return written;
}

}  // namespace hanes
