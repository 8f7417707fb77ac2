#pragma once

// Workspace geometry: cylindrical obstacles inside an axis-aligned box, the
// exponential safety cost, clearance and collision checks, and randomized
// scenario generation.

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "diffplan/common.hpp"
#include "diffplan/state.hpp"

namespace diffplan {

struct Cylinder {
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.1;
  double height = 3.0;

  double horizontal_distance(const Vec3& o) const {
    return (o.head<2>() - center).norm();
  }
};

struct Box {
  Vec3 min = Vec3(-3.0, -3.0, 0.0);
  Vec3 max = Vec3(3.0, 3.0, 3.0);

  bool contains(const Vec3& o) const {
    return (o.array() >= min.array()).all() && (o.array() <= max.array()).all();
  }
  Vec3 center() const { return 0.5 * (min + max); }
};

struct Scenario {
  Box bounds;
  std::vector<Cylinder> obstacles;
  QuadState start;
  Vec3 goal = Vec3::Zero();

  /// Hover at the goal position.
  QuadState goal_state() const { return QuadState::hover_at(goal); }

  /// Throws when start or goal lies outside the box or closer than `margin`
  /// (horizontally) to a cylinder surface.
  void validate(double margin = 0.1) const {
    if (!(bounds.min.array() < bounds.max.array()).all())
      throw Error("bounds: min must be below max");
    for (const auto& c : obstacles) {
      if (!(c.radius > 0.0)) throw Error("obstacles: radius must be positive");
      if (!(c.height > 0.0)) throw Error("obstacles: height must be positive");
    }
    auto check = [&](const Vec3& p, const char* name) {
      if (!bounds.contains(p)) throw Error(std::string(name) + ": outside bounds");
      for (const auto& c : obstacles) {
        if (c.horizontal_distance(p) - c.radius < margin)
          throw Error(std::string(name) + ": closer than " + std::to_string(margin) +
                      " m to an obstacle");
      }
    };
    check(start.position, "start");
    check(goal, "goal");
  }
};

/// Sum over the six faces of exp(-kappa * d), d the signed distance to the
/// face (positive inside the box).
inline double boundary_penalty(const Vec3& o, const Box& box, double kappa) {
  double total = 0.0;
  for (int k = 0; k < 3; ++k) {
    total += std::exp(-kappa * (o[k] - box.min[k]));
    total += std::exp(-kappa * (box.max[k] - o[k]));
  }
  return total;
}

inline double obstacle_cost(const Vec3& o, const Scenario& s, double kappa) {
  double total = 0.0;
  for (const auto& c : s.obstacles) {
    const double d2 = (o.head<2>() - c.center).squaredNorm();
    total += std::exp(-kappa * (d2 - c.radius * c.radius));
  }
  return total;
}

/// Per-state safety cost: horizontal obstacle terms plus workspace faces.
inline double collision_cost(const Vec3& o, const Scenario& s, double kappa) {
  return obstacle_cost(o, s, kappa) + boundary_penalty(o, s.bounds, kappa);
}

/// Minimum over states and obstacles of (horizontal distance - radius).
/// +inf when there are no obstacles.
inline double min_clearance(const Trajectory& traj, const Scenario& s) {
  double best = std::numeric_limits<double>::infinity();
  for (int t = 0; t <= traj.horizon(); ++t) {
    const Vec3 o = traj.position(t);
    for (const auto& c : s.obstacles) best = std::min(best, c.horizontal_distance(o) - c.radius);
  }
  return best;
}

inline bool state_in_collision(const Vec3& o, const Scenario& s) {
  if (!s.bounds.contains(o)) return true;
  for (const auto& c : s.obstacles) {
    if (c.horizontal_distance(o) < c.radius && o.z() >= 0.0 && o.z() <= c.height)
      return true;
  }
  return false;
}

inline bool in_collision(const Trajectory& traj, const Scenario& s) {
  for (int t = 0; t <= traj.horizon(); ++t)
    if (state_in_collision(traj.position(t), s)) return true;
  return false;
}

/// Counts and ranges for randomized scenarios. Fixed endpoints, when set,
/// are kept and obstacles are resampled around them instead.
struct ScenarioSpec {
  Box bounds;
  int num_obstacles = 16;
  double min_radius = 0.1;
  double max_radius = 0.2;
  double height = 3.0;
  double margin = 0.1;
  int max_attempts = 100000;
  std::optional<Vec3> start_position;
  std::optional<Vec3> goal_position;
};

namespace detail {

inline bool clear_of(const Vec3& p, const std::vector<Cylinder>& obstacles, double margin) {
  for (const auto& c : obstacles)
    if (c.horizontal_distance(p) - c.radius < margin) return false;
  return true;
}

inline Vec3 uniform_in(const Box& b, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec3 p;
  for (int k = 0; k < 3; ++k) p[k] = b.min[k] + (b.max[k] - b.min[k]) * unit(rng);
  return p;
}

}  // namespace detail

inline std::vector<Cylinder> random_obstacles(Rng& rng, const ScenarioSpec& spec) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Cylinder> out;
  int attempts = 0;
  while (static_cast<int>(out.size()) < spec.num_obstacles) {
    if (++attempts > spec.max_attempts) throw Error("infeasible scenario spec");
    Cylinder c;
    c.center.x() = spec.bounds.min.x() + (spec.bounds.max.x() - spec.bounds.min.x()) * unit(rng);
    c.center.y() = spec.bounds.min.y() + (spec.bounds.max.y() - spec.bounds.min.y()) * unit(rng);
    c.radius = spec.min_radius + (spec.max_radius - spec.min_radius) * unit(rng);
    c.height = spec.height;
    bool ok = true;
    for (const auto& fixed : {spec.start_position, spec.goal_position}) {
      if (fixed && c.horizontal_distance(*fixed) - c.radius < spec.margin) ok = false;
    }
    if (ok) out.push_back(c);
  }
  return out;
}

/// Samples start and goal positions for a given obstacle layout.
inline void random_endpoints(Rng& rng, const ScenarioSpec& spec, Scenario& s) {
  int attempts = 0;
  auto draw = [&]() {
    for (;;) {
      if (++attempts > spec.max_attempts) throw Error("infeasible scenario spec");
      const Vec3 p = detail::uniform_in(spec.bounds, rng);
      if (detail::clear_of(p, s.obstacles, spec.margin)) return p;
    }
  };
  s.start = QuadState::hover_at(spec.start_position ? *spec.start_position : draw());
  s.goal = spec.goal_position ? *spec.goal_position : draw();
}

inline Scenario random_scenario(Rng& rng, const ScenarioSpec& spec = {}) {
  Scenario s;
  s.bounds = spec.bounds;
  s.obstacles = random_obstacles(rng, spec);
  random_endpoints(rng, spec, s);
  return s;
}

}  // namespace diffplan
