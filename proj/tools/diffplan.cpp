// Command-line front end: plan, bench, scenario generation and validation.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "diffplan/baseline_mbd.hpp"
#include "diffplan/bench.hpp"
#include "diffplan/diffusion.hpp"
#include "diffplan/io.hpp"
#include "diffplan/world.hpp"

namespace {

using namespace diffplan;

std::optional<Vec3> parse_point(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto parts = io::split(text, ',');
  if (parts.size() != 3) throw Error("expected x,y,z but got '" + text + "'");
  Vec3 p;
  for (int k = 0; k < 3; ++k) p[k] = io::parse_double(parts[k], "point");
  return p;
}

DiffusionConfig config_or_default(const std::string& path) {
  return path.empty() ? DiffusionConfig{} : io::load_config(path);
}

Method parse_method(const std::string& name) {
  if (name == "ours") return Method::kOurs;
  if (name == "mbd") return Method::kMbd;
  throw Error("field 'method': expected ours or mbd");
}

int run_plan(const std::string& scenario_path, const std::string& config_path,
             const std::string& method_name, const std::string& prefix) {
  const Scenario scenario = io::load_scenario(scenario_path);
  const DiffusionConfig cfg = config_or_default(config_path);
  const Method method = parse_method(method_name);
  const PlanResult plan =
      method == Method::kOurs ? optimize(scenario, cfg) : mbd_optimize(scenario, cfg);
  const TrialMetrics metrics = evaluate(plan.trajectory, scenario, plan.wall_time, cfg.quad, cfg.dt);

  io::write_file(prefix + "_trajectory.csv", io::trajectory_csv(plan.trajectory));
  io::write_file(prefix + "_diagnostics.csv", io::diagnostics_csv(plan.diagnostics));
  io::json summary = io::metrics_to_json(metrics);
  summary["terminal_residual"] = io::number_or_string(plan.terminal_residual);
  summary["method"] = method_name;
  io::write_file(prefix + "_metrics.json", summary.dump(2) + "\n");

  std::printf("success=%d dist_to_goal=%.6g clearance=%.6g length=%.6g err_f=%.3g "
              "terminal_residual=%.6g wall_time=%.2fs\n",
              metrics.success ? 1 : 0, metrics.dist_to_goal, metrics.clearance, metrics.length,
              metrics.err_f, plan.terminal_residual, metrics.wall_time);
  return 0;
}

int run_bench(const std::string& method_name, int trials, std::uint64_t seed,
              const std::string& config_path, const std::string& prefix, bool fixed_obstacles,
              bool timing, int threads) {
  BenchOptions opt;
  opt.method = parse_method(method_name);
  opt.config = config_or_default(config_path);
  opt.trials = trials;
  opt.master_seed = seed;
  opt.fixed_obstacles = fixed_obstacles;
  opt.threads = threads;
  const AggregateReport rep = monte_carlo(opt);
  io::write_file(prefix + "_trials.csv", io::trials_csv(rep, timing));
  io::write_file(prefix + "_report.json", io::report_to_json(rep, timing).dump(2) + "\n");
  std::printf("%s: trials=%d success=%.1f%% dist_to_goal=%.4f+-%.4f clearance=%.4f+-%.4f "
              "length=%.4f+-%.4f err_f=%.3g+-%.3g\n",
              rep.method.c_str(), rep.trials, rep.success_rate, rep.dist_to_goal.mean,
              rep.dist_to_goal.std, rep.clearance.mean, rep.clearance.std, rep.length.mean,
              rep.length.std, rep.err_f.mean, rep.err_f.std);
  return 0;
}

int run_scenario_gen(std::uint64_t seed, const std::string& out, const std::string& start,
                     const std::string& goal) {
  ScenarioSpec spec;
  spec.start_position = parse_point(start);
  spec.goal_position = parse_point(goal);
  Rng rng = derive_stream(seed, stream::kScenario);
  const Scenario s = random_scenario(rng, spec);
  const std::string text = io::scenario_to_json(s).dump(2) + "\n";
  if (out.empty()) std::cout << text;
  else io::write_file(out, text);
  return 0;
}

int run_validate(const std::string& traj_path, const std::string& scenario_path,
                 const std::string& config_path) {
  const Trajectory traj = io::trajectory_from_csv(io::read_file(traj_path));
  const Scenario scenario = io::load_scenario(scenario_path);
  const DiffusionConfig cfg = config_or_default(config_path);
  const TrialMetrics m = evaluate(traj, scenario, 0.0, cfg.quad, cfg.dt);
  std::cout << io::metrics_to_json(m).dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Projection-augmented diffusion trajectory planner"};
  app.require_subcommand(1);

  std::string scenario_path, config_path, out_prefix = "plan", method = "ours";
  auto* plan = app.add_subcommand("plan", "Plan one scenario");
  plan->add_option("--scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  plan->add_option("--config", config_path, "Config JSON")->check(CLI::ExistingFile);
  plan->add_option("--method", method, "ours or mbd");
  plan->add_option("--out", out_prefix, "Output prefix");

  int trials = 100, threads = 0;
  std::uint64_t seed = 0;
  bool fixed_obstacles = false, no_timing = false;
  auto* bench = app.add_subcommand("bench", "Monte Carlo evaluation over random scenarios");
  bench->add_option("--method", method, "ours or mbd");
  bench->add_option("--trials", trials, "Number of trials")->check(CLI::PositiveNumber);
  bench->add_option("--seed", seed, "Master seed");
  bench->add_option("--config", config_path, "Config JSON")->check(CLI::ExistingFile);
  bench->add_option("--out", out_prefix, "Output prefix");
  bench->add_option("--threads", threads, "Worker threads (0: DIFFPLAN_THREADS or auto)");
  bench->add_flag("--fixed-obstacles", fixed_obstacles, "Reuse one obstacle layout");
  bench->add_flag("--no-timing", no_timing, "Write wall_time as 0 for byte-stable output");

  auto* scenario = app.add_subcommand("scenario", "Scenario utilities");
  scenario->require_subcommand(1);
  std::string scenario_out, start_point, goal_point;
  auto* gen = scenario->add_subcommand("gen", "Generate a random scenario");
  gen->add_option("--seed", seed, "Seed");
  gen->add_option("--out", scenario_out, "Output file (stdout if omitted)");
  gen->add_option("--start", start_point, "Fixed start position x,y,z");
  gen->add_option("--goal", goal_point, "Fixed goal position x,y,z");

  std::string traj_path;
  auto* validate = app.add_subcommand("validate", "Recompute metrics of a trajectory CSV");
  validate->add_option("--trajectory", traj_path, "Trajectory CSV")->required()->check(CLI::ExistingFile);
  validate->add_option("--scenario", scenario_path, "Scenario JSON")->required()->check(CLI::ExistingFile);
  validate->add_option("--config", config_path, "Config JSON (dynamics, dt)")->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*plan) return run_plan(scenario_path, config_path, method, out_prefix);
    if (*bench)
      return run_bench(method, trials, seed, config_path, out_prefix, fixed_obstacles, !no_timing,
                       threads);
    if (*gen) return run_scenario_gen(seed, scenario_out, start_point, goal_point);
    if (*validate) return run_validate(traj_path, scenario_path, config_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
