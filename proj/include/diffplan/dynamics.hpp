#pragma once

// Rigid-body quadrotor model on SE(3):
//   o' = v,  m v' = m g e3 - F R e3,  R' = R hat(w),  G w' + w x G w = M
// discretized with classical RK4 on the flat state.

#include <cmath>
#include <span>
#include <vector>

#include "diffplan/common.hpp"
#include "diffplan/state.hpp"

namespace diffplan {

struct QuadParams {
  double mass = 1.0;
  Vec3 inertia = Vec3(0.01, 0.01, 0.02);  // diagonal of the inertia matrix
  double gravity = 9.81;
  Vec3 e3 = Vec3::UnitZ();

  void validate() const {
    if (!(mass > 0.0)) throw Error("mass must be positive");
    if (!(inertia.array() > 0.0).all()) throw Error("inertia must be positive");
  }
};

/// Box of admissible actions, ordered [F, Mx, My, Mz]. The default is a
/// thrust band of +-25% around hover and +-0.01 N m of torque: with N_p = 250
/// uniform candidates a wider box leaves the per-step argmin too coarse and
/// projected rollouts drift.
struct ActionBounds {
  Eigen::Vector4d lower = Eigen::Vector4d(0.75 * 9.81, -0.01, -0.01, -0.01);
  Eigen::Vector4d upper = Eigen::Vector4d(1.25 * 9.81, 0.01, 0.01, 0.01);

  static ActionBounds for_params(const QuadParams& p, double max_torque = 0.01,
                                 double thrust_margin = 0.25) {
    const double hover = p.mass * p.gravity;
    ActionBounds b;
    b.lower = Eigen::Vector4d((1.0 - thrust_margin) * hover, -max_torque, -max_torque, -max_torque);
    b.upper = Eigen::Vector4d((1.0 + thrust_margin) * hover, max_torque, max_torque, max_torque);
    return b;
  }

  void validate() const {
    if (!(lower.array() <= upper.array()).all())
      throw Error("action bounds require lower <= upper");
  }

  ControlInput clamp(const ControlInput& u) const {
    return ControlInput::from_vector(
        u.as_vector().cwiseMax(lower).cwiseMin(upper));
  }

  bool contains(const ControlInput& u) const {
    const Eigen::Vector4d v = u.as_vector();
    return (v.array() >= lower.array()).all() && (v.array() <= upper.array()).all();
  }
};

struct StateDerivative {
  Vec3 position;
  Vec3 velocity;
  Mat3 rotation;
  Vec3 angular_velocity;
};

namespace detail {

// Time derivative of a flat state. The rotation block is used as a plain
// matrix, so intermediate RK4 stages need not be orthonormal.
inline void flat_derivative(const FlatState& s, const ControlInput& u,
                            const QuadParams& p, FlatState& d) {
  const double* r = s.data() + slot::kRotation;
  const double wx = s[slot::kAngularVelocity];
  const double wy = s[slot::kAngularVelocity + 1];
  const double wz = s[slot::kAngularVelocity + 2];

  d[0] = s[3];
  d[1] = s[4];
  d[2] = s[5];

  const double thrust_per_mass = u.thrust / p.mass;
  for (int i = 0; i < 3; ++i) {
    const double re3 = r[3 * i] * p.e3[0] + r[3 * i + 1] * p.e3[1] + r[3 * i + 2] * p.e3[2];
    d[3 + i] = p.gravity * p.e3[i] - thrust_per_mass * re3;
  }

  // R hat(w), row by row.
  for (int i = 0; i < 3; ++i) {
    const double r0 = r[3 * i], r1 = r[3 * i + 1], r2 = r[3 * i + 2];
    d[slot::kRotation + 3 * i] = r1 * wz - r2 * wy;
    d[slot::kRotation + 3 * i + 1] = r2 * wx - r0 * wz;
    d[slot::kRotation + 3 * i + 2] = r0 * wy - r1 * wx;
  }

  const double jx = p.inertia[0], jy = p.inertia[1], jz = p.inertia[2];
  // w x (G w)
  const double cx = wy * (jz * wz) - wz * (jy * wy);
  const double cy = wz * (jx * wx) - wx * (jz * wz);
  const double cz = wx * (jy * wy) - wy * (jx * wx);
  d[slot::kAngularVelocity] = (u.torque.x() - cx) / jx;
  d[slot::kAngularVelocity + 1] = (u.torque.y() - cy) / jy;
  d[slot::kAngularVelocity + 2] = (u.torque.z() - cz) / jz;
}

}  // namespace detail

inline StateDerivative continuous_dynamics(const QuadState& s, const ControlInput& u,
                                           const QuadParams& p) {
  FlatState d;
  detail::flat_derivative(flatten(s), u, p, d);
  StateDerivative out;
  out.position = d.segment<3>(slot::kPosition);
  out.velocity = d.segment<3>(slot::kVelocity);
  out.rotation = rotation_block(d);
  out.angular_velocity = d.segment<3>(slot::kAngularVelocity);
  return out;
}

/// Integrates the flat state by one step without touching the rotation
/// block afterwards.
inline FlatState rk4_raw_step(const FlatState& s, const ControlInput& u,
                              const QuadParams& p, double dt) {
  FlatState k1, k2, k3, k4;
  detail::flat_derivative(s, u, p, k1);
  detail::flat_derivative(s + 0.5 * dt * k1, u, p, k2);
  detail::flat_derivative(s + 0.5 * dt * k2, u, p, k3);
  detail::flat_derivative(s + dt * k3, u, p, k4);
  return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// One RK4 step followed by retraction of the rotation block onto SO(3).
inline FlatState rk4_step(const FlatState& s, const ControlInput& u,
                          const QuadParams& p, double dt) {
  return orthonormalized(rk4_raw_step(s, u, p, dt));
}

inline QuadState rk4_step(const QuadState& s, const ControlInput& u,
                          const QuadParams& p, double dt) {
  return unflatten(rk4_step(flatten(s), u, p, dt), false);
}

/// Draws `count` actions with every degree of freedom i.i.d. uniform on its
/// bound interval.
inline std::vector<ControlInput> sample_actions(int count, const ActionBounds& b,
                                                Rng& rng) {
  std::vector<ControlInput> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int k = 0; k < count; ++k) {
    Eigen::Vector4d v;
    for (int j = 0; j < kControlDim; ++j) {
      const double lo = b.lower[j], hi = b.upper[j];
      v[j] = lo == hi ? lo : lo + (hi - lo) * unit(rng);
    }
    out.push_back(ControlInput::from_vector(v));
  }
  return out;
}

inline Trajectory rollout(const QuadState& x0, std::span<const ControlInput> controls,
                          const QuadParams& p, double dt) {
  const int horizon = static_cast<int>(controls.size());
  Trajectory traj;
  traj.states.resize(horizon + 1, kStateDim);
  traj.controls.reserve(controls.size());
  FlatState x = flatten(x0);
  traj.states.row(0) = x.transpose();
  for (int t = 0; t < horizon; ++t) {
    x = rk4_step(x, controls[t], p, dt);
    if (!x.allFinite()) throw Error("diverged rollout");
    traj.states.row(t + 1) = x.transpose();
    traj.controls.emplace_back(controls[t]);
  }
  return traj;
}

}  // namespace diffplan
