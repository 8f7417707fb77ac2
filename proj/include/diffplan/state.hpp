#pragma once

// Quadrotor state representations, SO(3) helpers and the flat 18-vector codec
// used by the diffusion process.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "diffplan/common.hpp"

namespace diffplan {

inline constexpr int kStateDim = 18;
inline constexpr int kControlDim = 4;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Raw diffused state [o(3), v(3), R row-major(9), w(3)]. Need not hold a
/// valid rotation.
using FlatState = Eigen::Matrix<double, kStateDim, 1>;

/// One flat state per row, rows t = 0..T.
using StateMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, kStateDim, Eigen::RowMajor>;

namespace slot {
inline constexpr int kPosition = 0;
inline constexpr int kVelocity = 3;
inline constexpr int kRotation = 6;
inline constexpr int kAngularVelocity = 15;
}  // namespace slot

struct QuadState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Mat3 rotation = Mat3::Identity();
  Vec3 angular_velocity = Vec3::Zero();

  static QuadState hover_at(const Vec3& p) {
    QuadState s;
    s.position = p;
    return s;
  }
};

/// Thrust along the body vertical axis (N) and body torques (N m).
struct ControlInput {
  double thrust = 0.0;
  Vec3 torque = Vec3::Zero();

  Eigen::Vector4d as_vector() const {
    return {thrust, torque.x(), torque.y(), torque.z()};
  }
  static ControlInput from_vector(const Eigen::Vector4d& u) {
    return {u[0], Vec3(u[1], u[2], u[3])};
  }
  friend bool operator==(const ControlInput& a, const ControlInput& b) {
    return a.thrust == b.thrust && a.torque == b.torque;
  }
};

/// States at t = 0..T; controls empty or of length T, with absent entries
/// for transitions that were never projected.
struct Trajectory {
  StateMatrix states;
  std::vector<std::optional<ControlInput>> controls;

  int horizon() const { return static_cast<int>(states.rows()) - 1; }

  Vec3 position(int t) const {
    return states.row(t).segment<3>(slot::kPosition).transpose();
  }

  bool has_complete_controls() const {
    if (static_cast<int>(controls.size()) != horizon()) return false;
    return std::all_of(controls.begin(), controls.end(),
                       [](const auto& u) { return u.has_value(); });
  }
};

inline Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
       -w.y(), w.x(), 0.0;
  return m;
}

inline bool is_rotation(const Mat3& r, double tol = 1e-9) {
  return (r.transpose() * r - Mat3::Identity()).norm() <= tol &&
         std::abs(r.determinant() - 1.0) <= tol;
}

/// Nearest rotation in Frobenius norm (polar factor with det fixed to +1).
///
/// Matrices already orthonormal to round-off are returned untouched, near
/// orthonormal ones go through Newton-Schulz polar iterations, and anything
/// else through an SVD.
inline Mat3 project_to_so3(const Mat3& m) {
  const Mat3 id = Mat3::Identity();
  const double det = m.determinant();
  double err = (m.transpose() * m - id).norm();
  if (det > 0.0 && err <= 1e-14) return m;

  if (det > 0.0 && err < 0.5) {
    Mat3 x = m;
    for (int iter = 0; iter < 32; ++iter) {
      const Mat3 e = x.transpose() * x - id;
      err = e.norm();
      x = x * (id - 0.5 * e);
      if (err < 1e-9) break;
    }
    return x;
  }

  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  if (!std::isfinite(s[0]) || s[0] == 0.0 || s[2] <= 1e-12 * s[0]) {
    throw Error("degenerate rotation block");
  }
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Mat3 d = id;
  d(2, 2) = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return u * d * v.transpose();
}

inline FlatState flatten(const QuadState& s) {
  FlatState f;
  f.segment<3>(slot::kPosition) = s.position;
  f.segment<3>(slot::kVelocity) = s.velocity;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) f[slot::kRotation + 3 * r + c] = s.rotation(r, c);
  f.segment<3>(slot::kAngularVelocity) = s.angular_velocity;
  return f;
}

inline Mat3 rotation_block(const FlatState& f) {
  Mat3 r;
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) r(i, c) = f[slot::kRotation + 3 * i + c];
  return r;
}

inline QuadState unflatten(const FlatState& f, bool orthonormalize) {
  QuadState s;
  s.position = f.segment<3>(slot::kPosition);
  s.velocity = f.segment<3>(slot::kVelocity);
  s.rotation = rotation_block(f);
  if (orthonormalize) s.rotation = project_to_so3(s.rotation);
  s.angular_velocity = f.segment<3>(slot::kAngularVelocity);
  return s;
}

inline QuadState unflatten(std::span<const double> values, bool orthonormalize) {
  if (values.size() != static_cast<std::size_t>(kStateDim)) {
    throw Error("flat state must have exactly 18 entries, got " +
                std::to_string(values.size()));
  }
  return unflatten(FlatState(Eigen::Map<const FlatState>(values.data())),
                   orthonormalize);
}

/// Retracts only the rotation block; the remaining 15 entries are kept.
inline FlatState orthonormalized(const FlatState& f) {
  FlatState out = f;
  const Mat3 r = project_to_so3(rotation_block(f));
  for (int i = 0; i < 3; ++i)
    for (int c = 0; c < 3; ++c) out[slot::kRotation + 3 * i + c] = r(i, c);
  return out;
}

}  // namespace diffplan
