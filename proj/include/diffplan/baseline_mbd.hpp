#pragma once

// Single-shooting model-based diffusion baseline: the same reverse process run
// over control sequences, with states obtained by forward rollouts. Controls
// are diffused in normalized coordinates y in [-1, 1]^4 per step.

#include <chrono>
#include <cmath>
#include <limits>
#include <vector>

#include "diffplan/common.hpp"
#include "diffplan/diffusion.hpp"
#include "diffplan/dynamics.hpp"
#include "diffplan/schedule.hpp"
#include "diffplan/target_density.hpp"
#include "diffplan/world.hpp"

namespace diffplan {

using ControlMatrix = Eigen::Matrix<double, Eigen::Dynamic, kControlDim, Eigen::RowMajor>;

/// Normalized control sequence, one row per step t = 0..T-1.
struct ControlTrajectory {
  ControlMatrix normalized;

  int horizon() const { return static_cast<int>(normalized.rows()); }

  /// Maps rows to physical controls after clamping to [-1, 1].
  std::vector<ControlInput> decode(const ActionBounds& b) const {
    const Eigen::Vector4d mid = 0.5 * (b.upper + b.lower);
    const Eigen::Vector4d half = 0.5 * (b.upper - b.lower);
    std::vector<ControlInput> out;
    out.reserve(static_cast<std::size_t>(horizon()));
    for (int t = 0; t < horizon(); ++t) {
      const Eigen::Vector4d y = normalized.row(t).transpose().cwiseMax(-1.0).cwiseMin(1.0);
      out.push_back(ControlInput::from_vector(mid + half.cwiseProduct(y)));
    }
    return out;
  }
};

/// Goal incentive used in place of terminal pinning: -|o_T - goal|^2 / lambda.
inline double log_goal_attraction(const Trajectory& traj, const Vec3& goal, double temperature) {
  return -(traj.position(traj.horizon()) - goal).squaredNorm() / temperature;
}

template <class Density = TargetDensity>
PlanResult mbd_optimize(const Scenario& scenario, const DiffusionConfig& cfg,
                        const Density& density = {}) {
  cfg.validate();
  const auto clock_start = std::chrono::steady_clock::now();

  const NoiseSchedule sched = build_noise_schedule(cfg);
  const int horizon = cfg.horizon;
  const auto samples = static_cast<std::size_t>(cfg.num_samples);
  const int threads = resolve_threads(cfg.threads);

  ControlMatrix y(horizon, kControlDim);
  {
    Rng rng = derive_stream(cfg.seed, stream::kInit);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int t = 0; t < horizon; ++t)
      for (int j = 0; j < kControlDim; ++j) y(t, j) = normal(rng);
  }

  PlanResult result;
  std::vector<ControlMatrix> batch(samples);
  std::vector<double> log_weights(samples);

  for (int i = cfg.diffusion_steps; i >= 1; --i) {
    const double sigma = sched.base_sigma(i);
    const double scale = 1.0 / std::sqrt(sched.alpha_bar(i - 1));
    parallel_for(samples, threads, [&](std::size_t k) {
      Rng rng = derive_stream(cfg.seed, stream::kBatch, static_cast<std::uint64_t>(i), k);
      std::normal_distribution<double> normal(0.0, 1.0);
      ControlTrajectory sample{ControlMatrix(horizon, kControlDim)};
      for (int t = 0; t < horizon; ++t)
        for (int j = 0; j < kControlDim; ++j)
          sample.normalized(t, j) = std::clamp(y(t, j) * scale + sigma * normal(rng), -1.0, 1.0);
      try {
        const auto controls = sample.decode(cfg.action_bounds);
        const Trajectory traj = rollout(scenario.start, controls, cfg.quad, cfg.dt);
        log_weights[k] = density.log_pJ(traj.states, cfg.cost) +
                         density.log_pg(traj.states, scenario, cfg.cost) +
                         log_goal_attraction(traj, scenario.goal, cfg.cost.temperature);
      } catch (const Error&) {
        log_weights[k] = -std::numeric_limits<double>::infinity();
      }
      batch[k] = std::move(sample.normalized);
    });

    ControlMatrix mean;
    try {
      mean = weighted_mean(batch, log_weights);
    } catch (const Error& e) {
      throw Error("iteration " + std::to_string(i) + ": " + e.what());
    }
    const double alpha_bar = sched.alpha_bar(i);
    y = reverse_step(y, estimate_score(y, mean, alpha_bar), sched.alpha(i), alpha_bar);

    IterationLog log;
    log.iteration = i;
    log.mean_sigma = sigma;
    log.proj_fraction = 0.0;
    log.best_log_target = *std::max_element(log_weights.begin(), log_weights.end());
    result.diagnostics.push_back(log);
  }

  const ControlTrajectory final_controls{y};
  const auto controls = final_controls.decode(cfg.action_bounds);
  result.trajectory = rollout(scenario.start, controls, cfg.quad, cfg.dt);
  result.terminal_residual =
      (flatten(scenario.goal_state()) - result.trajectory.states.row(horizon).transpose()).norm();
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return result;
}

}  // namespace diffplan
