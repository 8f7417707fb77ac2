#pragma once

// JSON configs and scenarios, CSV trajectories and result tables.

#include <charconv>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "diffplan/bench.hpp"
#include "diffplan/common.hpp"
#include "diffplan/diffusion.hpp"
#include "diffplan/schedule.hpp"
#include "diffplan/world.hpp"

namespace diffplan::io {

using nlohmann::json;

/// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw Error(what + ": not a number '" + std::string(s) + "'");
  return v;
}

inline json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path + "'");
  out << text;
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(what + ": invalid JSON (" + e.what() + ")");
  }
}

namespace detail {

inline Error field_error(const std::string& field, const std::string& msg) {
  return Error("field '" + field + "': " + msg);
}

inline double get_number(const json& j, const std::string& field) {
  if (!j.is_number()) throw field_error(field, "expected a number");
  return j.get<double>();
}

inline int get_int(const json& j, const std::string& field) {
  if (!j.is_number_integer()) throw field_error(field, "expected an integer");
  return j.get<int>();
}

template <int N>
Eigen::Matrix<double, N, 1> get_vector(const json& j, const std::string& field) {
  if (!j.is_array() || j.size() != static_cast<std::size_t>(N))
    throw field_error(field, "expected an array of " + std::to_string(N) + " numbers");
  Eigen::Matrix<double, N, 1> v;
  for (int k = 0; k < N; ++k) v[k] = get_number(j[k], field + "[" + std::to_string(k) + "]");
  return v;
}

inline Mat3 get_rotation(const json& j, const std::string& field) {
  Mat3 r;
  if (j.is_array() && j.size() == 9) {
    const auto v = get_vector<9>(j, field);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) r(a, b) = v[3 * a + b];
  } else if (j.is_array() && j.size() == 3) {
    for (int a = 0; a < 3; ++a) r.row(a) = get_vector<3>(j[a], field + "[" + std::to_string(a) + "]");
  } else {
    throw field_error(field, "expected 3x3 nested or 9-element row-major array");
  }
  if (!is_rotation(r)) throw field_error(field, "not a rotation matrix");
  return r;
}

inline void reject_unknown(const json& j, std::initializer_list<std::string_view> known,
                           const std::string& prefix) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (auto k : known) ok = ok || it.key() == k;
    if (!ok) throw field_error(prefix + it.key(), "unknown field");
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Config

inline DiffusionConfig config_from_json(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw Error("config: expected a JSON object");
  reject_unknown(j,
                 {"N", "N_s", "T", "dt", "lambda", "kappa", "delta", "beta_0", "beta_N",
                  "sigma_min", "sigma_max", "N_p", "action_bounds", "seed", "w_s", "w_v",
                  "mass", "inertia", "gravity", "terminal_policy", "threads"},
                 "");
  DiffusionConfig c;
  auto int_field = [&](const char* key, int& dst, int min) {
    if (!j.contains(key)) return;
    dst = get_int(j[key], key);
    if (dst < min) throw field_error(key, "must be at least " + std::to_string(min));
  };
  auto num_field = [&](const char* key, double& dst) {
    if (j.contains(key)) dst = get_number(j[key], key);
  };
  int_field("N", c.diffusion_steps, 1);
  int_field("N_s", c.num_samples, 1);
  int_field("T", c.horizon, 2);
  int_field("N_p", c.num_action_samples, 1);
  int_field("threads", c.threads, 0);
  num_field("dt", c.dt);
  num_field("delta", c.delta);
  num_field("beta_0", c.beta_0);
  num_field("beta_N", c.beta_N);
  num_field("sigma_min", c.sigma_min);
  num_field("sigma_max", c.sigma_max);
  num_field("lambda", c.cost.temperature);
  num_field("kappa", c.cost.kappa);
  num_field("w_s", c.cost.smoothness_weight);
  num_field("w_v", c.cost.velocity_weight);
  num_field("mass", c.quad.mass);
  num_field("gravity", c.quad.gravity);
  if (j.contains("inertia")) c.quad.inertia = get_vector<3>(j["inertia"], "inertia");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw field_error("seed", "expected a non-negative integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("terminal_policy")) {
    const auto& p = j["terminal_policy"];
    if (p == "pin") c.terminal_policy = TerminalPolicy::kPin;
    else if (p == "project") c.terminal_policy = TerminalPolicy::kProject;
    else throw field_error("terminal_policy", "expected \"pin\" or \"project\"");
  }
  c.action_bounds = ActionBounds::for_params(c.quad);
  if (j.contains("action_bounds")) {
    const auto& b = j["action_bounds"];
    if (!b.is_object()) throw field_error("action_bounds", "expected an object");
    reject_unknown(b, {"lower", "upper"}, "action_bounds.");
    if (b.contains("lower")) c.action_bounds.lower = get_vector<4>(b["lower"], "action_bounds.lower");
    if (b.contains("upper")) c.action_bounds.upper = get_vector<4>(b["upper"], "action_bounds.upper");
  }
  // Map range errors back onto field names.
  auto check = [](bool ok, const char* field, const char* msg) {
    if (!ok) throw field_error(field, msg);
  };
  check(c.dt > 0.0, "dt", "must be positive");
  check(c.delta > 0.0 && c.delta < 1.0, "delta", "must lie in (0, 1)");
  check(c.beta_0 > 0.0 && c.beta_0 < 1.0, "beta_0", "must lie in (0, 1)");
  check(c.beta_N > 0.0 && c.beta_N < 1.0, "beta_N", "must lie in (0, 1)");
  check(c.sigma_min > 0.0, "sigma_min", "must be positive");
  check(c.sigma_min < c.sigma_max, "sigma_max", "must exceed sigma_min");
  check(c.cost.temperature > 0.0, "lambda", "must be positive");
  check(c.cost.kappa > 0.0, "kappa", "must be positive");
  check(c.cost.smoothness_weight >= 0.0, "w_s", "must be non-negative");
  check(c.cost.velocity_weight >= 0.0, "w_v", "must be non-negative");
  check(c.quad.mass > 0.0, "mass", "must be positive");
  check((c.quad.inertia.array() > 0.0).all(), "inertia", "must be positive");
  check((c.action_bounds.lower.array() <= c.action_bounds.upper.array()).all(), "action_bounds",
        "lower must not exceed upper");
  c.validate();
  return c;
}

inline json config_to_json(const DiffusionConfig& c) {
  json j;
  j["N"] = c.diffusion_steps;
  j["N_s"] = c.num_samples;
  j["T"] = c.horizon;
  j["dt"] = c.dt;
  j["lambda"] = c.cost.temperature;
  j["kappa"] = c.cost.kappa;
  j["delta"] = c.delta;
  j["beta_0"] = c.beta_0;
  j["beta_N"] = c.beta_N;
  j["sigma_min"] = c.sigma_min;
  j["sigma_max"] = c.sigma_max;
  j["N_p"] = c.num_action_samples;
  j["action_bounds"] = {
      {"lower", {c.action_bounds.lower[0], c.action_bounds.lower[1], c.action_bounds.lower[2],
                 c.action_bounds.lower[3]}},
      {"upper", {c.action_bounds.upper[0], c.action_bounds.upper[1], c.action_bounds.upper[2],
                 c.action_bounds.upper[3]}}};
  j["seed"] = c.seed;
  j["w_s"] = c.cost.smoothness_weight;
  j["w_v"] = c.cost.velocity_weight;
  j["mass"] = c.quad.mass;
  j["inertia"] = {c.quad.inertia[0], c.quad.inertia[1], c.quad.inertia[2]};
  j["gravity"] = c.quad.gravity;
  j["terminal_policy"] = c.terminal_policy == TerminalPolicy::kPin ? "pin" : "project";
  j["threads"] = c.threads;
  return j;
}

inline DiffusionConfig load_config(const std::string& path) {
  return config_from_json(parse_json(read_file(path), path));
}

// ---------------------------------------------------------------------------
// Scenario

inline Scenario scenario_from_json(const json& j) {
  using namespace detail;
  if (!j.is_object()) throw Error("scenario: expected a JSON object");
  reject_unknown(j, {"bounds", "obstacles", "start", "goal"}, "");
  for (const char* key : {"bounds", "obstacles", "start", "goal"})
    if (!j.contains(key)) throw field_error(key, "missing");

  Scenario s;
  const auto& b = j["bounds"];
  if (!b.is_object() || !b.contains("min") || !b.contains("max"))
    throw field_error("bounds", "expected {\"min\": [x,y,z], \"max\": [x,y,z]}");
  reject_unknown(b, {"min", "max"}, "bounds.");
  s.bounds.min = get_vector<3>(b["min"], "bounds.min");
  s.bounds.max = get_vector<3>(b["max"], "bounds.max");
  if (!(s.bounds.min.array() < s.bounds.max.array()).all())
    throw field_error("bounds", "min must be below max");

  if (!j["obstacles"].is_array()) throw field_error("obstacles", "expected an array");
  for (std::size_t k = 0; k < j["obstacles"].size(); ++k) {
    const auto& o = j["obstacles"][k];
    const std::string name = "obstacles[" + std::to_string(k) + "]";
    if (!o.is_object()) throw field_error(name, "expected an object");
    reject_unknown(o, {"center", "radius", "height"}, name + ".");
    for (const char* key : {"center", "radius", "height"})
      if (!o.contains(key)) throw field_error(name + "." + key, "missing");
    Cylinder c;
    c.center = get_vector<2>(o["center"], name + ".center");
    c.radius = get_number(o["radius"], name + ".radius");
    c.height = get_number(o["height"], name + ".height");
    if (!(c.radius > 0.0)) throw field_error(name + ".radius", "must be positive");
    if (!(c.height > 0.0)) throw field_error(name + ".height", "must be positive");
    s.obstacles.push_back(c);
  }

  const auto& st = j["start"];
  if (st.is_array()) {
    const auto f = get_vector<kStateDim>(st, "start");
    s.start = unflatten(f, false);
    if (!is_rotation(s.start.rotation)) throw field_error("start", "rotation block is not a rotation");
  } else if (st.is_object()) {
    reject_unknown(st, {"position", "velocity", "rotation", "angular_velocity"}, "start.");
    if (!st.contains("position")) throw field_error("start.position", "missing");
    s.start.position = get_vector<3>(st["position"], "start.position");
    if (st.contains("velocity")) s.start.velocity = get_vector<3>(st["velocity"], "start.velocity");
    if (st.contains("rotation")) s.start.rotation = get_rotation(st["rotation"], "start.rotation");
    if (st.contains("angular_velocity"))
      s.start.angular_velocity = get_vector<3>(st["angular_velocity"], "start.angular_velocity");
  } else {
    throw field_error("start", "expected an 18-vector or a structured state");
  }
  s.goal = get_vector<3>(j["goal"], "goal");
  if (!s.bounds.contains(s.start.position)) throw field_error("start.position", "outside bounds");
  if (!s.bounds.contains(s.goal)) throw field_error("goal", "outside bounds");
  return s;
}

inline json scenario_to_json(const Scenario& s) {
  auto v3 = [](const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); };
  json j;
  j["bounds"] = {{"min", v3(s.bounds.min)}, {"max", v3(s.bounds.max)}};
  j["obstacles"] = json::array();
  for (const auto& c : s.obstacles)
    j["obstacles"].push_back(
        {{"center", {c.center.x(), c.center.y()}}, {"radius", c.radius}, {"height", c.height}});
  json rot = json::array();
  for (int a = 0; a < 3; ++a)
    rot.push_back({s.start.rotation(a, 0), s.start.rotation(a, 1), s.start.rotation(a, 2)});
  j["start"] = {{"position", v3(s.start.position)},
                {"velocity", v3(s.start.velocity)},
                {"rotation", rot},
                {"angular_velocity", v3(s.start.angular_velocity)}};
  j["goal"] = v3(s.goal);
  return j;
}

inline Scenario load_scenario(const std::string& path) {
  return scenario_from_json(parse_json(read_file(path), path));
}

// ---------------------------------------------------------------------------
// Trajectory CSV: t, 18 state columns, 4 control columns (empty if absent).

inline constexpr std::string_view kTrajectoryHeader =
    "t,ox,oy,oz,vx,vy,vz,r00,r01,r02,r10,r11,r12,r20,r21,r22,wx,wy,wz,F,Mx,My,Mz";

inline std::string trajectory_csv(const Trajectory& traj) {
  std::string out(kTrajectoryHeader);
  out += '\n';
  for (int t = 0; t <= traj.horizon(); ++t) {
    out += std::to_string(t);
    for (int j = 0; j < kStateDim; ++j) {
      out += ',';
      out += format_double(traj.states(t, j));
    }
    const bool has = t < static_cast<int>(traj.controls.size()) && traj.controls[t].has_value();
    const Eigen::Vector4d u = has ? traj.controls[t]->as_vector() : Eigen::Vector4d::Zero();
    for (int j = 0; j < kControlDim; ++j) {
      out += ',';
      if (has) out += format_double(u[j]);
    }
    out += '\n';
  }
  return out;
}

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  for (;;) {
    const auto next = line.find(sep, pos);
    parts.push_back(line.substr(pos, next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return parts;
}

inline Trajectory trajectory_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error("trajectory csv: empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTrajectoryHeader) throw Error("trajectory csv: unexpected header");
  std::vector<FlatState> states;
  std::vector<std::optional<ControlInput>> controls;
  int row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cols = split(line, ',');
    const std::string where = "trajectory csv row " + std::to_string(row);
    if (cols.size() != 23) throw Error(where + ": expected 23 columns");
    if (parse_double(cols[0], where + " t") != row) throw Error(where + ": t out of sequence");
    FlatState f;
    for (int j = 0; j < kStateDim; ++j) f[j] = parse_double(cols[1 + j], where);
    states.push_back(f);
    bool any = false, all = true;
    for (int j = 0; j < kControlDim; ++j) {
      const bool empty = cols[19 + j].empty();
      any = any || !empty;
      all = all && !empty;
    }
    if (any && !all) throw Error(where + ": partially empty control columns");
    if (all) {
      Eigen::Vector4d u;
      for (int j = 0; j < kControlDim; ++j) u[j] = parse_double(cols[19 + j], where);
      controls.emplace_back(ControlInput::from_vector(u));
    } else {
      controls.emplace_back(std::nullopt);
    }
    ++row;
  }
  if (states.size() < 2) throw Error("trajectory csv: need at least two states");
  Trajectory traj;
  traj.states.resize(static_cast<Eigen::Index>(states.size()), kStateDim);
  for (std::size_t t = 0; t < states.size(); ++t)
    traj.states.row(static_cast<Eigen::Index>(t)) = states[t].transpose();
  // The final row never carries a control.
  if (controls.back().has_value()) throw Error("trajectory csv: control on the final row");
  controls.pop_back();
  const bool none = std::none_of(controls.begin(), controls.end(), [](const auto& u) { return u.has_value(); });
  if (!none) traj.controls = std::move(controls);
  return traj;
}

inline std::string diagnostics_csv(const std::vector<IterationLog>& logs) {
  std::string out = "iteration,mean_sigma,proj_fraction,best_log_target\n";
  for (const auto& l : logs) {
    out += std::to_string(l.iteration) + ',' + format_double(l.mean_sigma) + ',' +
           format_double(l.proj_fraction) + ',' + format_double(l.best_log_target) + '\n';
  }
  return out;
}

inline json metrics_to_json(const TrialMetrics& m) {
  return {{"success", m.success},
          {"dist_to_goal", number_or_string(m.dist_to_goal)},
          {"clearance", number_or_string(m.clearance)},
          {"length", number_or_string(m.length)},
          {"wall_time", number_or_string(m.wall_time)},
          {"err_f", number_or_string(m.err_f)}};
}

// ---------------------------------------------------------------------------
// Bench outputs

inline constexpr std::string_view kTrialsHeader =
    "trial,seed,success,dist_to_goal,clearance,length,wall_time,err_f";

inline std::string trials_csv(const AggregateReport& rep, bool with_timing = true) {
  std::string out(kTrialsHeader);
  out += '\n';
  for (const auto& r : rep.rows) {
    const auto& m = r.metrics;
    out += std::to_string(r.trial) + ',' + std::to_string(r.seed) + ',' + (m.success ? "1" : "0") +
           ',' + format_double(m.dist_to_goal) + ',' + format_double(m.clearance) + ',' +
           format_double(m.length) + ',' + format_double(with_timing ? m.wall_time : 0.0) + ',' +
           format_double(m.err_f) + '\n';
  }
  return out;
}

inline json report_to_json(const AggregateReport& rep, bool with_timing = true) {
  auto summary = [](const MetricSummary& s) {
    return json{{"mean", number_or_string(s.mean)}, {"std", number_or_string(s.std)}, {"count", s.count}};
  };
  json j;
  j["method"] = rep.method;
  j["trials"] = rep.trials;
  j["master_seed"] = rep.master_seed;
  j["success_rate"] = rep.success_rate;
  j["dist_to_goal"] = summary(rep.dist_to_goal);
  j["clearance"] = summary(rep.clearance);
  j["length"] = summary(rep.length);
  j["wall_time"] = with_timing ? summary(rep.wall_time) : summary(MetricSummary{});
  j["err_f"] = summary(rep.err_f);
  j["terminal_residual"] = summary(rep.terminal_residual);
  j["failures"] = json::array();
  for (const auto& r : rep.rows)
    if (!r.error.empty()) j["failures"].push_back({{"trial", r.trial}, {"error", r.error}});
  return j;
}

}  // namespace diffplan::io
