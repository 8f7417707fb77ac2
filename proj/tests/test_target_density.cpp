#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "diffplan/target_density.hpp"

namespace diffplan {
namespace {

StateMatrix random_states(Rng& rng, int rows) {
  std::normal_distribution<double> n(0.0, 1.0);
  StateMatrix s(rows, kStateDim);
  for (int t = 0; t < rows; ++t)
    for (int j = 0; j < kStateDim; ++j) s(t, j) = n(rng);
  return s;
}

TEST(StageCost, HoverIsZero) {
  StateMatrix s = StateMatrix::Zero(51, kStateDim);
  for (int t = 0; t <= 50; ++t) s.row(t).head<3>() << 0.5, 0.5, 1.0;
  EXPECT_EQ(stage_cost(s, CostConfig{}), 0.0);
}

TEST(StageCost, ConstantVelocityTerm) {
  StateMatrix s = StateMatrix::Zero(51, kStateDim);
  for (int t = 0; t <= 50; ++t) s.row(t).segment<3>(slot::kVelocity) << 0.3, 0.0, -0.4;
  EXPECT_NEAR(stage_cost(s, CostConfig{}), 0.1 * 51 * 0.25, 1e-12);
}

TEST(StageCost, StraightLine) {
  const double d = 0.08;
  StateMatrix s = StateMatrix::Zero(51, kStateDim);
  for (int t = 0; t <= 50; ++t) s(t, 0) = d * t;
  EXPECT_NEAR(stage_cost(s, CostConfig{}), 50 * d * d, 1e-14);
}

TEST(StageCost, MatchesExtendedPrecisionSum) {
  Rng rng(5);
  CostConfig cfg;
  cfg.smoothness_weight = 1.3;
  cfg.velocity_weight = 0.7;
  for (int k = 0; k < 20; ++k) {
    const StateMatrix s = random_states(rng, 51);
    long double smooth = 0, speed = 0;
    for (int t = 0; t <= 50; ++t) {
      for (int j = 0; j < 3; ++j) {
        speed += static_cast<long double>(s(t, 3 + j)) * s(t, 3 + j);
        if (t < 50) {
          const long double dj = static_cast<long double>(s(t + 1, j)) - s(t, j);
          smooth += dj * dj;
        }
      }
    }
    const long double oracle = 1.3L * smooth + 0.7L * speed;
    EXPECT_NEAR(stage_cost(s, cfg), static_cast<double>(oracle), 1e-12 * static_cast<double>(oracle));
  }
}

TEST(LogPJ, Arithmetic) {
  EXPECT_EQ(log_pJ_from_cost(0.0, 0.1), 0.0);
  EXPECT_NEAR(log_pJ_from_cost(1.0, 0.1), -10.0, 1e-14);
}

TEST(LogPJ, MonotoneInCost) {
  Rng rng(8);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  for (int k = 0; k < 100; ++k) {
    const double a = u(rng), b = u(rng);
    if (a == b) continue;
    EXPECT_EQ(a < b, log_pJ_from_cost(a, 0.1) > log_pJ_from_cost(b, 0.1));
  }
}

TEST(LogPJ, JointScalingInvariant) {
  Rng rng(9);
  const StateMatrix s = random_states(rng, 11);
  CostConfig cfg, scaled;
  scaled.smoothness_weight = 4.0 * cfg.smoothness_weight;
  scaled.velocity_weight = 4.0 * cfg.velocity_weight;
  scaled.temperature = 4.0 * cfg.temperature;
  EXPECT_EQ(log_pJ(s, cfg), log_pJ(s, scaled));
}

TEST(LogPg, BoundaryOnlyAtBoxCenter) {
  Scenario scene;
  StateMatrix s = StateMatrix::Zero(51, kStateDim);
  for (int t = 0; t <= 50; ++t) s.row(t).head<3>() = scene.bounds.center().transpose();
  const double per_state = 4 * std::exp(-15.0) + 2 * std::exp(-7.5);
  EXPECT_NEAR(log_pg(s, scene, 5.0), -51 * per_state, 1e-15);
  EXPECT_NEAR(log_pg(s, scene, 5.0), -51 * 1.110e-3, 51 * 5e-6);
}

TEST(LogPg, SurfaceStateAddsMinusOne) {
  Scenario scene;
  scene.obstacles.push_back({Eigen::Vector2d(1.0, 1.0), 0.2, 3.0});
  StateMatrix s = StateMatrix::Zero(3, kStateDim);
  for (int t = 0; t < 3; ++t) s.row(t).head<3>() << -2.0, -2.0, 1.5;
  const double base = log_pg(s, scene, 5.0);
  s.row(1).head<3>() << 1.2, 1.0, 1.5;
  const double moved_boundary = boundary_penalty(Vec3(1.2, 1.0, 1.5), scene.bounds, 5.0) -
                                boundary_penalty(Vec3(-2.0, -2.0, 1.5), scene.bounds, 5.0);
  const double before_obstacle = obstacle_cost(Vec3(-2.0, -2.0, 1.5), scene, 5.0);
  EXPECT_NEAR(log_pg(s, scene, 5.0) - base, -(1.0 - before_obstacle) - moved_boundary, 1e-12);
}

TEST(LogPg, ThroughObstacleIsLessLikely) {
  Scenario scene;
  scene.obstacles.push_back({Eigen::Vector2d(0.0, 0.0), 0.2, 3.0});
  StateMatrix through = StateMatrix::Zero(21, kStateDim), beside = through;
  for (int t = 0; t <= 20; ++t) {
    through.row(t).head<3>() << -1.0 + 0.1 * t, 0.0, 1.5;
    beside.row(t).head<3>() << -1.0 + 0.1 * t, 1.0, 1.5;
  }
  EXPECT_LT(log_pg(through, scene, 5.0), log_pg(beside, scene, 5.0));
}

TEST(LogTarget, Additive) {
  Rng rng(12);
  Scenario scene;
  scene.obstacles.push_back({Eigen::Vector2d(0.3, -0.2), 0.15, 3.0});
  const CostConfig cfg;
  const StateMatrix s = random_states(rng, 21);
  EXPECT_NEAR(log_target(s, scene, cfg), log_pJ(s, cfg) + log_pg(s, scene, cfg.kappa), 1e-15);
}

TEST(LogTarget, DensityRatio) {
  Rng rng(13);
  Scenario scene;
  const CostConfig cfg;
  StateMatrix a = 0.1 * random_states(rng, 6), b = 0.1 * random_states(rng, 6);
  for (int t = 0; t < 6; ++t) {
    a.row(t).head<3>().array() += 1.5;
    b.row(t).head<3>().array() += 1.5;
  }
  auto density = [&](const StateMatrix& s) {
    double p = std::exp(-stage_cost(s, cfg) / cfg.temperature);
    for (int t = 0; t < s.rows(); ++t)
      p *= std::exp(-collision_cost(s.row(t).head<3>().transpose(), scene, cfg.kappa));
    return p;
  };
  const double ratio = std::exp(log_target(a, scene, cfg) - log_target(b, scene, cfg));
  EXPECT_NEAR(ratio, density(a) / density(b), 1e-12 * ratio);
}

TEST(LogTarget, FiniteForFiniteStates) {
  Rng rng(14);
  Scenario scene;
  const StateMatrix s = 10.0 * random_states(rng, 51);
  EXPECT_TRUE(std::isfinite(log_target(s, scene, CostConfig{})));
}

TEST(CostConfig, Validation) {
  CostConfig c;
  c.temperature = 0.0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.velocity_weight = -1.0;
  EXPECT_THROW(c.validate(), Error);
}

}  // namespace
}  // namespace diffplan
