#pragma once

// Unnormalized log densities that weight diffusion samples:
//   log p_J = -J / lambda,   log p_g = -sum_t g(o_t).
// Dynamic feasibility never appears here; it is enforced by projection.

#include "diffplan/common.hpp"
#include "diffplan/state.hpp"
#include "diffplan/world.hpp"

namespace diffplan {

struct CostConfig {
  double temperature = 0.1;  // lambda
  double kappa = 5.0;
  double smoothness_weight = 1.0;
  double velocity_weight = 0.1;

  void validate() const {
    if (!(temperature > 0.0)) throw Error("lambda must be positive");
    if (!(kappa > 0.0)) throw Error("kappa must be positive");
    if (!(smoothness_weight >= 0.0) || !(velocity_weight >= 0.0))
      throw Error("cost weights must be non-negative");
  }
};

/// J = w_s sum_t |o_{t+1} - o_t|^2 + w_v sum_t |v_t|^2.
template <class Derived>
double stage_cost(const Eigen::MatrixBase<Derived>& states, const CostConfig& cfg) {
  const Eigen::Index rows = states.rows();
  double smooth = 0.0, speed = 0.0;
  for (Eigen::Index t = 0; t < rows; ++t) {
    speed += states.row(t).template segment<3>(slot::kVelocity).squaredNorm();
    if (t + 1 < rows) {
      smooth += (states.row(t + 1).template segment<3>(slot::kPosition) -
                 states.row(t).template segment<3>(slot::kPosition))
                    .squaredNorm();
    }
  }
  return cfg.smoothness_weight * smooth + cfg.velocity_weight * speed;
}

inline double log_pJ_from_cost(double cost, double temperature) { return -cost / temperature; }

template <class Derived>
double log_pJ(const Eigen::MatrixBase<Derived>& states, const CostConfig& cfg) {
  return log_pJ_from_cost(stage_cost(states, cfg), cfg.temperature);
}

template <class Derived>
double log_pg(const Eigen::MatrixBase<Derived>& states, const Scenario& scenario,
              double kappa) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < states.rows(); ++t) {
    const Vec3 o = states.row(t).template segment<3>(slot::kPosition).transpose();
    total += collision_cost(o, scenario, kappa);
  }
  return -total;
}

template <class Derived>
double log_target(const Eigen::MatrixBase<Derived>& states, const Scenario& scenario,
                  const CostConfig& cfg) {
  return log_pJ(states, cfg) + log_pg(states, scenario, cfg.kappa);
}

/// Density policy consumed by the optimizers. Custom policies must expose the
/// same two members; nothing else is ever queried.
struct TargetDensity {
  double log_pJ(const StateMatrix& states, const CostConfig& cfg) const {
    return diffplan::log_pJ(states, cfg);
  }
  double log_pg(const StateMatrix& states, const Scenario& scenario,
                const CostConfig& cfg) const {
    return diffplan::log_pg(states, scenario, cfg.kappa);
  }
};

}  // namespace diffplan
