#pragma once

// Trajectory metrics and the randomized Monte Carlo evaluation harness.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "diffplan/baseline_mbd.hpp"
#include "diffplan/common.hpp"
#include "diffplan/diffusion.hpp"
#include "diffplan/dynamics.hpp"
#include "diffplan/world.hpp"

namespace diffplan {

struct TrialMetrics {
  bool success = false;
  double dist_to_goal = 0.0;
  double clearance = 0.0;   // signed, m; +inf without obstacles
  double length = 0.0;
  double wall_time = 0.0;
  double err_f = 0.0;       // NaN when the trajectory lacks a full control set
};

/// Mean squared one-step residual sum_t |f(x_t, u_t) - x_{t+1}|^2 / T.
inline double dynamic_feasibility_error(const Trajectory& traj, const QuadParams& quad,
                                        double dt) {
  if (!traj.has_complete_controls())
    throw Error("dynamic feasibility error needs a control for every transition");
  const int horizon = traj.horizon();
  double total = 0.0;
  for (int t = 0; t < horizon; ++t) {
    const FlatState x = traj.states.row(t).transpose();
    const FlatState next = traj.states.row(t + 1).transpose();
    total += (rk4_step(x, *traj.controls[t], quad, dt) - next).squaredNorm();
  }
  return total / horizon;
}

inline double path_length(const Trajectory& traj) {
  double total = 0.0;
  for (int t = 0; t < traj.horizon(); ++t) total += (traj.position(t + 1) - traj.position(t)).norm();
  return total;
}

inline TrialMetrics evaluate(const Trajectory& traj, const Scenario& scenario, double wall_time,
                             const QuadParams& quad, double dt) {
  TrialMetrics m;
  m.success = !in_collision(traj, scenario);
  m.dist_to_goal = (traj.position(traj.horizon()) - scenario.goal).norm();
  m.clearance = min_clearance(traj, scenario);
  m.length = path_length(traj);
  m.wall_time = wall_time;
  m.err_f = traj.has_complete_controls() ? dynamic_feasibility_error(traj, quad, dt)
                                         : std::numeric_limits<double>::quiet_NaN();
  return m;
}

/// Welford accumulator.
class RunningStats {
 public:
  void push(double x) {
    ++count_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(count_);
    m2_ += delta * (x - mean_);
  }
  std::size_t count() const { return count_; }
  double mean() const { return count_ == 0 ? std::numeric_limits<double>::quiet_NaN() : mean_; }
  /// Sample standard deviation (n - 1 denominator); 0 for a single value.
  double stddev() const {
    if (count_ == 0) return std::numeric_limits<double>::quiet_NaN();
    if (count_ == 1) return 0.0;
    return std::sqrt(m2_ / static_cast<double>(count_ - 1));
  }

 private:
  std::size_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

enum class Method { kOurs, kMbd };

inline const char* method_name(Method m) { return m == Method::kOurs ? "ours" : "mbd"; }

struct TrialRecord {
  int trial = 0;
  std::uint64_t seed = 0;
  TrialMetrics metrics;
  double terminal_residual = 0.0;
  std::string error;  // non-empty when the planner threw
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t count = 0;  // finite values aggregated
};

struct AggregateReport {
  std::string method;
  int trials = 0;
  std::uint64_t master_seed = 0;
  double success_rate = 0.0;  // percent
  MetricSummary dist_to_goal, clearance, length, wall_time, err_f, terminal_residual;
  std::vector<TrialRecord> rows;
};

struct BenchOptions {
  Method method = Method::kOurs;
  DiffusionConfig config;
  ScenarioSpec scenario_spec;
  int trials = 100;
  std::uint64_t master_seed = 0;
  /// Keep one obstacle layout (drawn from the master seed) across trials and
  /// randomize only start and goal.
  bool fixed_obstacles = false;
  int threads = 0;
};

inline std::uint64_t trial_seed(std::uint64_t master_seed, int trial) {
  return splitmix64(master_seed ^ splitmix64(stream::kTrial + static_cast<std::uint64_t>(trial)));
}

inline Scenario trial_scenario(const BenchOptions& opt, int trial) {
  Rng rng = derive_stream(trial_seed(opt.master_seed, trial), stream::kScenario);
  if (!opt.fixed_obstacles) return random_scenario(rng, opt.scenario_spec);
  Rng layout_rng = derive_stream(opt.master_seed, stream::kScenario);
  Scenario s;
  s.bounds = opt.scenario_spec.bounds;
  s.obstacles = random_obstacles(layout_rng, opt.scenario_spec);
  random_endpoints(rng, opt.scenario_spec, s);
  return s;
}

inline TrialRecord run_trial(const BenchOptions& opt, int trial, int inner_threads) {
  TrialRecord rec;
  rec.trial = trial;
  rec.seed = trial_seed(opt.master_seed, trial);
  try {
    const Scenario scenario = trial_scenario(opt, trial);
    DiffusionConfig cfg = opt.config;
    cfg.seed = rec.seed;
    cfg.threads = inner_threads;
    const PlanResult plan = opt.method == Method::kOurs ? optimize(scenario, cfg)
                                                        : mbd_optimize(scenario, cfg);
    rec.metrics = evaluate(plan.trajectory, scenario, plan.wall_time, cfg.quad, cfg.dt);
    rec.terminal_residual = plan.terminal_residual;
  } catch (const std::exception& e) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    rec.metrics = {false, nan, nan, nan, 0.0, nan};
    rec.terminal_residual = nan;
    rec.error = e.what();
  }
  return rec;
}

inline MetricSummary summarize(const std::vector<TrialRecord>& rows,
                               double (*field)(const TrialRecord&)) {
  RunningStats stats;
  for (const auto& r : rows) {
    const double v = field(r);
    if (std::isfinite(v)) stats.push(v);
  }
  return {stats.count() ? stats.mean() : 0.0, stats.count() ? stats.stddev() : 0.0, stats.count()};
}

inline AggregateReport aggregate(std::vector<TrialRecord> rows, Method method,
                                 std::uint64_t master_seed) {
  AggregateReport rep;
  rep.method = method_name(method);
  rep.trials = static_cast<int>(rows.size());
  rep.master_seed = master_seed;
  int successes = 0;
  for (const auto& r : rows) successes += r.metrics.success ? 1 : 0;
  rep.success_rate = rows.empty() ? 0.0 : 100.0 * successes / static_cast<double>(rows.size());
  rep.dist_to_goal = summarize(rows, [](const TrialRecord& r) { return r.metrics.dist_to_goal; });
  rep.clearance = summarize(rows, [](const TrialRecord& r) { return r.metrics.clearance; });
  rep.length = summarize(rows, [](const TrialRecord& r) { return r.metrics.length; });
  rep.wall_time = summarize(rows, [](const TrialRecord& r) { return r.metrics.wall_time; });
  rep.err_f = summarize(rows, [](const TrialRecord& r) { return r.metrics.err_f; });
  rep.terminal_residual = summarize(rows, [](const TrialRecord& r) { return r.terminal_residual; });
  rep.rows = std::move(rows);
  return rep;
}

/// Trials run in parallel, each single-threaded inside; every trial derives
/// its scenario and planner seed from (master_seed, trial index) alone.
inline AggregateReport monte_carlo(const BenchOptions& opt) {
  if (opt.trials < 1) throw Error("trials must be at least 1");
  opt.config.validate();
  const int threads = resolve_threads(opt.threads);
  std::vector<TrialRecord> rows(static_cast<std::size_t>(opt.trials));
  parallel_for(rows.size(), threads, [&](std::size_t k) {
    rows[k] = run_trial(opt, static_cast<int>(k), 1);
  });
  return aggregate(std::move(rows), opt.method, opt.master_seed);
}

}  // namespace diffplan
