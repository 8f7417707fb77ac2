#pragma once

// Planner configuration and the bi-level noise schedule
//   sigma(i, t) = sqrt((1 - abar_{i-1}) / abar_{i-1}) * delta^t.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "diffplan/common.hpp"
#include "diffplan/dynamics.hpp"
#include "diffplan/target_density.hpp"

namespace diffplan {

/// What the final projection does with the pinned terminal slot.
enum class TerminalPolicy {
  kPin,      // keep x_T at the goal; pick the closest sampled control into it
  kProject,  // replace x_T by its projection from x_{T-1}
};

struct DiffusionConfig {
  int diffusion_steps = 200;      // N
  int num_samples = 256;          // N_s
  int horizon = 50;               // T
  double dt = 0.1;
  double delta = 0.8;
  double beta_0 = 1e-4;
  double beta_N = 1e-2;
  double sigma_min = 0.1;
  double sigma_max = 0.3;
  int num_action_samples = 250;   // N_p
  QuadParams quad;
  ActionBounds action_bounds = ActionBounds::for_params(QuadParams{});
  CostConfig cost;
  TerminalPolicy terminal_policy = TerminalPolicy::kPin;
  std::uint64_t seed = 0;
  int threads = 0;                // 0: DIFFPLAN_THREADS or hardware

  void validate() const {
    if (diffusion_steps < 1) throw Error("N must be at least 1");
    if (num_samples < 1) throw Error("N_s must be at least 1");
    if (horizon < 2) throw Error("T must be at least 2");
    if (num_action_samples < 1) throw Error("N_p must be at least 1");
    if (!(dt > 0.0)) throw Error("dt must be positive");
    if (!(delta > 0.0 && delta < 1.0)) throw Error("delta must lie in (0, 1)");
    if (!(beta_0 > 0.0 && beta_0 < 1.0)) throw Error("beta_0 must lie in (0, 1)");
    if (!(beta_N > 0.0 && beta_N < 1.0)) throw Error("beta_N must lie in (0, 1)");
    if (!(sigma_min > 0.0 && sigma_min < sigma_max))
      throw Error("sigma_min must satisfy 0 < sigma_min < sigma_max");
    quad.validate();
    action_bounds.validate();
    cost.validate();
  }
};

struct NoiseSchedule {
  int steps = 0;    // N
  int horizon = 0;  // T
  double delta = 0.8;
  std::vector<double> betas;       // [1..N], index 0 unused
  std::vector<double> alphas;      // [1..N], index 0 unused
  std::vector<double> alpha_bars;  // [0..N], alpha_bars[0] = 1

  double alpha(int i) const { return alphas.at(i); }
  double alpha_bar(int i) const { return alpha_bars.at(i); }

  /// sqrt((1 - abar_{i-1}) / abar_{i-1}); the single-level schedule.
  double base_sigma(int i) const {
    const double ab = alpha_bars.at(i - 1);
    return std::sqrt((1.0 - ab) / ab);
  }

  /// Zero on the pinned slots t = 0 and t = T.
  double sigma(int i, int t) const {
    if (t <= 0 || t >= horizon) return 0.0;
    return base_sigma(i) * std::pow(delta, t);
  }

  /// Average of sigma(i, k) over k = 1..T, terminal zero included.
  double mean_sigma(int i) const {
    double total = 0.0;
    for (int k = 1; k <= horizon; ++k) total += sigma(i, k);
    return total / horizon;
  }
};

inline NoiseSchedule build_noise_schedule(int steps, int horizon, double beta_0,
                                          double beta_N, double delta) {
  NoiseSchedule s;
  s.steps = steps;
  s.horizon = horizon;
  s.delta = delta;
  s.betas.assign(steps + 1, 0.0);
  s.alphas.assign(steps + 1, 1.0);
  s.alpha_bars.assign(steps + 1, 1.0);
  for (int i = 1; i <= steps; ++i) {
    const double frac = steps == 1 ? 0.0 : static_cast<double>(i - 1) / (steps - 1);
    s.betas[i] = beta_0 + (beta_N - beta_0) * frac;
    s.alphas[i] = 1.0 - s.betas[i];
    s.alpha_bars[i] = s.alpha_bars[i - 1] * s.alphas[i];
  }
  return s;
}

inline NoiseSchedule build_noise_schedule(const DiffusionConfig& cfg) {
  return build_noise_schedule(cfg.diffusion_steps, cfg.horizon, cfg.beta_0, cfg.beta_N,
                              cfg.delta);
}

}  // namespace diffplan
