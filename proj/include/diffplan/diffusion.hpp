#pragma once

// Projection-augmented model-based diffusion over state trajectories.
//
// Each reverse step draws N_s noisy trajectories around the current iterate,
// projects them (partially, depending on the noise level) onto the sampled
// reachable sets, weights them by p_J * p_g, and moves the iterate along the
// Monte Carlo score estimate. Endpoints are pinned throughout and the last
// step projects every transition so the returned states are rollouts of the
// recorded controls.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "diffplan/common.hpp"
#include "diffplan/dynamics.hpp"
#include "diffplan/projection.hpp"
#include "diffplan/schedule.hpp"
#include "diffplan/state.hpp"
#include "diffplan/target_density.hpp"
#include "diffplan/world.hpp"

namespace diffplan {

struct IterationLog {
  int iteration = 0;
  double mean_sigma = 0.0;
  double proj_fraction = 0.0;
  double best_log_target = 0.0;
};

struct PlanResult {
  Trajectory trajectory;
  std::vector<IterationLog> diagnostics;
  double wall_time = 0.0;
  /// |f(x_{T-1}, u_{T-1}) - goal state|, the junction left open by pinning.
  double terminal_residual = 0.0;
};

/// Softmax-weighted average of the batch; weights are shifted by their max
/// before exponentiation.
template <class M>
M weighted_mean(const std::vector<M>& batch, std::span<const double> log_weights) {
  if (batch.empty()) throw Error("weighted mean of an empty batch");
  if (batch.size() != log_weights.size())
    throw Error("batch and weight counts differ");
  double top = -std::numeric_limits<double>::infinity();
  for (const double lw : log_weights) {
    if (std::isnan(lw)) throw Error("degenerate weights");
    top = std::max(top, lw);
  }
  if (!std::isfinite(top)) throw Error("degenerate weights");
  M acc = M::Zero(batch.front().rows(), batch.front().cols());
  double total = 0.0;
  for (std::size_t k = 0; k < batch.size(); ++k) {
    const double w = std::exp(log_weights[k] - top);
    if (w == 0.0) continue;
    acc += w * batch[k];
    total += w;
  }
  return acc / total;
}

/// Monte Carlo score: -(x - sqrt(abar) * xbar) / (1 - abar).
template <class A, class B>
typename A::PlainObject estimate_score(const Eigen::MatrixBase<A>& x,
                                       const Eigen::MatrixBase<B>& xbar, double alpha_bar) {
  return -(x - std::sqrt(alpha_bar) * xbar) / (1.0 - alpha_bar);
}

/// x^{i-1} = (x^i + (1 - abar_i) * score) / sqrt(alpha_i).
template <class A, class B>
typename A::PlainObject reverse_step(const Eigen::MatrixBase<A>& x,
                                     const Eigen::MatrixBase<B>& score, double alpha,
                                     double alpha_bar) {
  return (x + (1.0 - alpha_bar) * score) / std::sqrt(alpha);
}

inline void pin_boundary(StateMatrix& states, const QuadState& start, const QuadState& goal) {
  states.row(0) = flatten(start).transpose();
  states.row(states.rows() - 1) = flatten(goal).transpose();
}

/// One draw around x / sqrt(abar_{i-1}) with per-slot deviation sigma(i, t).
/// The pinned slots t = 0 and t = T are copied from x unchanged.
inline StateMatrix sample_trajectory(const StateMatrix& x, const NoiseSchedule& sched, int i,
                                     Rng& rng) {
  const double scale = 1.0 / std::sqrt(sched.alpha_bar(i - 1));
  const int horizon = static_cast<int>(x.rows()) - 1;
  std::normal_distribution<double> normal(0.0, 1.0);
  StateMatrix out = x;
  for (int t = 1; t < horizon; ++t) {
    const double sigma = sched.sigma(i, t);
    for (int j = 0; j < kStateDim; ++j) out(t, j) = x(t, j) * scale + sigma * normal(rng);
  }
  return out;
}

/// Sample k comes from its own stream derive_stream(seed, batch, i, k).
inline std::vector<StateMatrix> sample_batch(const StateMatrix& x, const NoiseSchedule& sched,
                                             int i, int num_samples, std::uint64_t seed) {
  std::vector<StateMatrix> batch;
  batch.reserve(static_cast<std::size_t>(num_samples));
  for (int k = 0; k < num_samples; ++k) {
    Rng rng = derive_stream(seed, stream::kBatch, static_cast<std::uint64_t>(i),
                            static_cast<std::uint64_t>(k));
    batch.push_back(sample_trajectory(x, sched, i, rng));
  }
  return batch;
}

inline StateMatrix initial_iterate(int horizon, std::uint64_t seed) {
  Rng rng = derive_stream(seed, stream::kInit);
  std::normal_distribution<double> normal(0.0, 1.0);
  StateMatrix x(horizon + 1, kStateDim);
  for (Eigen::Index t = 0; t < x.rows(); ++t)
    for (int j = 0; j < kStateDim; ++j) x(t, j) = normal(rng);
  return x;
}

template <class Density = TargetDensity>
PlanResult optimize(const Scenario& scenario, const DiffusionConfig& cfg,
                    const Density& density = {}) {
  cfg.validate();
  const auto clock_start = std::chrono::steady_clock::now();

  const NoiseSchedule sched = build_noise_schedule(cfg);
  const int horizon = cfg.horizon;
  const auto samples = static_cast<std::size_t>(cfg.num_samples);
  const ProjectionSettings settings = ProjectionSettings::from(cfg);
  const ProjectionThresholds thresholds{cfg.sigma_min, cfg.sigma_max};
  const QuadState start = scenario.start;
  const QuadState goal = scenario.goal_state();
  const int threads = resolve_threads(cfg.threads);

  StateMatrix x = initial_iterate(horizon, cfg.seed);
  pin_boundary(x, start, goal);

  PlanResult result;
  result.diagnostics.reserve(static_cast<std::size_t>(cfg.diffusion_steps));
  std::vector<StateMatrix> batch(samples);
  std::vector<double> log_weights(samples);
  std::vector<int> projected(samples);
  Trajectory current;

  for (int i = cfg.diffusion_steps; i >= 1; --i) {
    parallel_for(samples, threads, [&](std::size_t k) {
      Rng rng = derive_stream(cfg.seed, stream::kBatch, static_cast<std::uint64_t>(i), k);
      Trajectory sample;
      sample.states = sample_trajectory(x, sched, i, rng);
      const ProjectionMask mask = projection_mask(sched, i, thresholds, rng);
      projected[k] = static_cast<int>(std::count(mask.begin(), mask.end(), true));
      sample = project_trajectory(std::move(sample), mask, settings, rng);
      log_weights[k] = density.log_pJ(sample.states, cfg.cost) +
                       density.log_pg(sample.states, scenario, cfg.cost);
      batch[k] = std::move(sample.states);
    });

    StateMatrix mean;
    try {
      mean = weighted_mean(batch, log_weights);
    } catch (const Error& e) {
      throw Error("iteration " + std::to_string(i) + ": " + e.what());
    }
    const double alpha_bar = sched.alpha_bar(i);
    x = reverse_step(x, estimate_score(x, mean, alpha_bar), sched.alpha(i), alpha_bar);
    pin_boundary(x, start, goal);

    Rng rng = derive_stream(cfg.seed, stream::kSingle, static_cast<std::uint64_t>(i));
    const ProjectionMask mask = i == 1 ? ProjectionMask(horizon - 1, true)
                                       : projection_mask(sched, i, thresholds, rng);
    current.states = std::move(x);
    current = project_trajectory(std::move(current), mask, settings, rng);
    x = current.states;

    IterationLog log;
    log.iteration = i;
    log.mean_sigma = sched.mean_sigma(i);
    log.proj_fraction = static_cast<double>(std::accumulate(projected.begin(), projected.end(), 0)) /
                        (static_cast<double>(samples) * (horizon - 1));
    log.best_log_target = *std::max_element(log_weights.begin(), log_weights.end());
    result.diagnostics.push_back(log);
  }

  // Terminal transition: pick the sampled control closest to the goal state.
  Rng rng = derive_stream(cfg.seed, stream::kTerminal);
  const ProjectedState last = project_state(current.states.row(horizon - 1).transpose(),
                                            current.states.row(horizon).transpose(), settings, rng);
  current.controls[horizon - 1] = last.control;
  result.terminal_residual = std::sqrt(last.squared_residual);
  if (cfg.terminal_policy == TerminalPolicy::kProject)
    current.states.row(horizon) = last.state.transpose();

  result.trajectory = std::move(current);
  result.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - clock_start).count();
  return result;
}

}  // namespace diffplan
