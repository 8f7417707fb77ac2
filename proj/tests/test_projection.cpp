#include <cmath>
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "diffplan/bench.hpp"
#include "diffplan/projection.hpp"

namespace diffplan {
namespace {

QuadState random_state(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  QuadState s;
  s.position = Vec3(n(rng), n(rng), 1.5 + 0.3 * n(rng));
  s.velocity = 0.5 * Vec3(n(rng), n(rng), n(rng));
  s.rotation = Eigen::AngleAxisd(0.3 * n(rng), Vec3(n(rng), n(rng), n(rng)).normalized())
                   .toRotationMatrix();
  s.angular_velocity = 0.3 * Vec3(n(rng), n(rng), n(rng));
  return s;
}

ProjectionSettings default_settings() { return ProjectionSettings::from(DiffusionConfig{}); }

TEST(ProjectState, ReachableTargetIsRecovered) {
  Rng rng(1);
  const ProjectionSettings ps = default_settings();
  const FlatState base = flatten(random_state(rng));
  auto candidates = sample_actions(ps.num_actions, ps.bounds, rng);
  const FlatState target = rk4_step(base, candidates[117], ps.quad, ps.dt);
  const ProjectedState p = project_state_among(base, target, candidates, ps.quad, ps.dt);
  EXPECT_EQ(p.index, 117);
  EXPECT_EQ(p.squared_residual, 0.0);
  EXPECT_TRUE(p.control == candidates[117]);
  EXPECT_EQ(p.state, target);
}

TEST(ProjectState, ResidualNoWorseThanAnyCandidate) {
  Rng rng(2);
  const ProjectionSettings ps = default_settings();
  std::normal_distribution<double> n(0.0, 0.3);
  for (int k = 0; k < 50; ++k) {
    const FlatState base = flatten(random_state(rng));
    FlatState target = base;
    for (int j = 0; j < kStateDim; ++j) target[j] += n(rng);
    const auto candidates = sample_actions(ps.num_actions, ps.bounds, rng);
    const ProjectedState p = project_state_among(base, target, candidates, ps.quad, ps.dt);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      const double r = (rk4_step(base, candidates[c], ps.quad, ps.dt) - target).squaredNorm();
      EXPECT_LE(p.squared_residual, r);
      if (r == p.squared_residual) EXPECT_LE(p.index, static_cast<int>(c));
    }
    EXPECT_EQ(p.state, rk4_step(base, p.control, ps.quad, ps.dt));
  }
}

TEST(ProjectState, TiesGoToLowestIndex) {
  const ProjectionSettings ps = default_settings();
  const FlatState base = flatten(QuadState::hover_at(Vec3(0, 0, 1)));
  const ControlInput u{9.81, Vec3::Zero()};
  const std::vector<ControlInput> candidates = {ControlInput{3.0, Vec3::Zero()}, u, u};
  const ProjectedState p = project_state_among(base, base, candidates, ps.quad, ps.dt);
  EXPECT_EQ(p.index, 1);
}

TEST(ProjectState, EmptyCandidateSetRejected) {
  const ProjectionSettings ps = default_settings();
  const FlatState base = flatten(QuadState{});
  EXPECT_THROW(project_state_among(base, base, {}, ps.quad, ps.dt), Error);
}

// Exhaustive 10x10x10x10 grid over the action box: the sampled argmin at
// N_p = 250 stays within a factor 2 of the grid's best residual.
TEST(ProjectState, WithinFactorTwoOfGridOracle) {
  Rng rng(3);
  const ProjectionSettings ps = default_settings();
  const ActionBounds& b = ps.bounds;
  for (int k = 0; k < 50; ++k) {
    const FlatState base = flatten(random_state(rng));
    // Target: a reachable state from an off-grid action, plus a small offset.
    const ControlInput hidden = sample_actions(1, b, rng).front();
    FlatState target = rk4_step(base, hidden, ps.quad, ps.dt);
    std::normal_distribution<double> n(0.0, 0.05);
    for (int j = 0; j < kStateDim; ++j) target[j] += n(rng);

    double grid_best = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 10; ++a)
      for (int c = 0; c < 10; ++c)
        for (int d = 0; d < 10; ++d)
          for (int e = 0; e < 10; ++e) {
            const Eigen::Vector4d frac((a + 0.5) / 10, (c + 0.5) / 10, (d + 0.5) / 10, (e + 0.5) / 10);
            const Eigen::Vector4d u = b.lower + (b.upper - b.lower).cwiseProduct(frac);
            const double r = (rk4_step(base, ControlInput::from_vector(u), ps.quad, ps.dt) - target).squaredNorm();
            grid_best = std::min(grid_best, r);
          }
    const ProjectedState p = project_state(base, target, ps, rng);
    EXPECT_LE(p.squared_residual, 2.0 * grid_best) << "instance " << k;
  }
}

TEST(ProjectionProbability, RampEndpoints) {
  const ProjectionThresholds th{0.1, 0.3};
  EXPECT_EQ(projection_probability(0.3, th), 0.0);
  EXPECT_EQ(projection_probability(0.1, th), 1.0);
  EXPECT_NEAR(projection_probability(0.2, th), 0.5, 1e-15);
  EXPECT_EQ(projection_probability(0.9, th), 0.0);
  EXPECT_EQ(projection_probability(0.0, th), 1.0);
}

TEST(ProjectionMask, HighNoiseProjectsNothing) {
  DiffusionConfig cfg;
  cfg.delta = 0.99;
  cfg.beta_N = 0.05;
  const NoiseSchedule sched = build_noise_schedule(cfg);
  ASSERT_GT(sched.mean_sigma(cfg.diffusion_steps), 0.3);
  Rng rng(4);
  const ProjectionMask m = projection_mask(sched, cfg.diffusion_steps, {0.1, 0.3}, rng);
  ASSERT_EQ(m.size(), 49u);
  for (bool v : m) EXPECT_FALSE(v);
}

TEST(ProjectionMask, LastStepProjectsEverything) {
  const NoiseSchedule sched = build_noise_schedule(DiffusionConfig{});
  Rng rng(5);
  for (bool v : projection_mask(sched, 1, {0.1, 0.3}, rng)) EXPECT_TRUE(v);
}

TEST(ProjectionMask, BernoulliDensityInRamp) {
  DiffusionConfig cfg;
  cfg.horizon = 2;  // one slot per mask
  const NoiseSchedule sched = build_noise_schedule(cfg);
  // Pick thresholds so that the mean noise at step i sits inside the ramp.
  const int i = 120;
  const double m = sched.mean_sigma(i);
  for (double p_target : {0.2, 0.5, 0.85}) {
    const ProjectionThresholds th{m - (1 - p_target) * 0.1, m + p_target * 0.1};
    const double p = projection_probability(m, th);
    ASSERT_NEAR(p, p_target, 1e-9);
    Rng rng(6);
    int hits = 0;
    for (int k = 0; k < 10000; ++k) hits += projection_mask(sched, i, th, rng)[0] ? 1 : 0;
    EXPECT_NEAR(hits / 10000.0, p, 0.02);
  }
}

Trajectory noisy_line(Rng& rng, int horizon) {
  Trajectory traj;
  traj.states.resize(horizon + 1, kStateDim);
  std::normal_distribution<double> n(0.0, 0.05);
  for (int t = 0; t <= horizon; ++t) {
    FlatState f = flatten(QuadState::hover_at(Vec3(0.05 * t, 0.0, 1.0)));
    for (int j = 0; j < kStateDim; ++j) f[j] += t == 0 ? 0.0 : n(rng);
    traj.states.row(t) = f.transpose();
  }
  return traj;
}

TEST(ProjectTrajectory, AllFalseKeepsStates) {
  Rng rng(7);
  const Trajectory in = noisy_line(rng, 10);
  const Trajectory out = project_trajectory(in, ProjectionMask(9, false), default_settings(), rng);
  EXPECT_EQ(out.states, in.states);
  ASSERT_EQ(out.controls.size(), 10u);
  for (const auto& u : out.controls) EXPECT_FALSE(u.has_value());
}

TEST(ProjectTrajectory, FirstSlotOnlyIsLocal) {
  Rng rng(8);
  const Trajectory in = noisy_line(rng, 10);
  ProjectionMask mask(9, false);
  mask[0] = true;
  const Trajectory out = project_trajectory(in, mask, default_settings(), rng);
  EXPECT_EQ(out.states.row(0), in.states.row(0));
  EXPECT_NE(out.states.row(1), in.states.row(1));
  EXPECT_EQ(out.states.bottomRows(9), in.states.bottomRows(9));
  EXPECT_TRUE(out.controls[0].has_value());
}

TEST(ProjectTrajectory, AllTrueIsRollout) {
  Rng rng(9);
  const ProjectionSettings ps = default_settings();
  const Trajectory out = project_trajectory(noisy_line(rng, 10), ProjectionMask(9, true), ps, rng);
  for (int t = 0; t < 9; ++t) {
    ASSERT_TRUE(out.controls[t].has_value());
    const FlatState next = rk4_step(FlatState(out.states.row(t).transpose()), *out.controls[t], ps.quad, ps.dt);
    EXPECT_LE((next - out.states.row(t + 1).transpose()).norm(), 1e-12);
  }
  // With the terminal transition filled by a rollout, the error vanishes.
  Trajectory closed = out;
  closed.controls[9] = ControlInput{9.81, Vec3::Zero()};
  closed.states.row(10) =
      rk4_step(FlatState(closed.states.row(9).transpose()), *closed.controls[9], ps.quad, ps.dt).transpose();
  EXPECT_LE(dynamic_feasibility_error(closed, ps.quad, ps.dt), 1e-20);
}

TEST(ProjectTrajectory, MaskLengthChecked) {
  Rng rng(10);
  EXPECT_THROW(project_trajectory(noisy_line(rng, 10), ProjectionMask(10, true), default_settings(), rng),
               Error);
}

}  // namespace
}  // namespace diffplan
