#pragma once

// Sampling-based projection of predicted states onto one-step reachable sets,
// and the noise-conditioned schedule deciding which slots get projected.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "diffplan/common.hpp"
#include "diffplan/dynamics.hpp"
#include "diffplan/schedule.hpp"
#include "diffplan/state.hpp"

namespace diffplan {

struct ProjectionThresholds {
  double sigma_min = 0.1;
  double sigma_max = 0.3;
};

/// mask[t] selects the transition t -> t+1, t = 0..T-2.
using ProjectionMask = std::vector<bool>;

struct ProjectionSettings {
  int num_actions = 250;  // N_p
  ActionBounds bounds;
  QuadParams quad;
  double dt = 0.1;

  static ProjectionSettings from(const DiffusionConfig& cfg) {
    return {cfg.num_action_samples, cfg.action_bounds, cfg.quad, cfg.dt};
  }
};

struct ProjectedState {
  FlatState state;
  ControlInput control;
  double squared_residual = 0.0;  // |f(x_t, u*) - target|^2
  int index = -1;                 // position of u* in the candidate set
};

/// Closest reachable state among f(base, u) for the given candidates, under
/// the plain squared 2-norm over all 18 entries. Ties go to the lowest index.
/// The base rotation block is retracted first; the target is used as is.
inline ProjectedState project_state_among(const FlatState& base, const FlatState& target,
                                          std::span<const ControlInput> candidates,
                                          const QuadParams& quad, double dt) {
  if (candidates.empty()) throw Error("projection needs at least one candidate action");
  const FlatState x = orthonormalized(base);
  ProjectedState best;
  best.squared_residual = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    const FlatState next = rk4_step(x, candidates[k], quad, dt);
    const double r = (next - target).squaredNorm();
    if (!std::isfinite(r)) throw Error("rollout diverged during projection");
    if (r < best.squared_residual) {
      best.state = next;
      best.control = candidates[k];
      best.squared_residual = r;
      best.index = static_cast<int>(k);
    }
  }
  return best;
}

inline ProjectedState project_state(const FlatState& base, const FlatState& target,
                                    const ProjectionSettings& settings, Rng& rng) {
  const auto actions = sample_actions(settings.num_actions, settings.bounds, rng);
  return project_state_among(base, target, actions, settings.quad, settings.dt);
}

/// Linear ramp: 0 at sigma_max and above, 1 at sigma_min and below.
inline double projection_probability(double mean_sigma, const ProjectionThresholds& th) {
  const double p = (th.sigma_max - mean_sigma) / (th.sigma_max - th.sigma_min);
  return std::clamp(p, 0.0, 1.0);
}

inline ProjectionMask projection_mask(const NoiseSchedule& sched, int i,
                                      const ProjectionThresholds& th, Rng& rng) {
  const std::size_t slots = static_cast<std::size_t>(sched.horizon - 1);
  const double mean = sched.mean_sigma(i);
  if (mean > th.sigma_max) return ProjectionMask(slots, false);
  if (mean < th.sigma_min) return ProjectionMask(slots, true);
  const double p = projection_probability(mean, th);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  ProjectionMask mask(slots);
  for (std::size_t t = 0; t < slots; ++t) mask[t] = unit(rng) < p;
  return mask;
}

/// Sequentially projects slot t+1 onto the reachable set of slot t wherever
/// mask[t] holds, in chronological order so each projection starts from the
/// possibly replaced predecessor. Controls of projected transitions are
/// recorded; the others stay absent.
inline Trajectory project_trajectory(Trajectory traj, const ProjectionMask& mask,
                                     const ProjectionSettings& settings, Rng& rng) {
  const int horizon = traj.horizon();
  if (static_cast<int>(mask.size()) != horizon - 1)
    throw Error("projection mask must have T-1 entries");
  traj.controls.assign(horizon, std::nullopt);
  for (int t = 0; t + 1 < horizon; ++t) {
    if (!mask[t]) continue;
    const FlatState base = traj.states.row(t).transpose();
    const FlatState target = traj.states.row(t + 1).transpose();
    const ProjectedState p = project_state(base, target, settings, rng);
    traj.states.row(t + 1) = p.state.transpose();
    traj.controls[t] = p.control;
  }
  return traj;
}

}  // namespace diffplan
