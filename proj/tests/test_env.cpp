#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "sope/env.hpp"
#include "sope/rng.hpp"

using namespace sope;
using namespace sope::env;

namespace {

std::vector<double> random_action(std::mt19937_64& gen, double scale) {
  std::normal_distribution<double> n(0.0, scale);
  std::vector<double> a(16);
  for (double& v : a) v = n(gen);
  return a;
}

}  // namespace

TEST(Schedule, PhaseBoundaries) {
  const PhaseSchedule s;
  EXPECT_EQ(phase_of(0, s), 1);
  EXPECT_EQ(phase_of(44, s), 1);
  EXPECT_EQ(phase_of(45, s), 2);
  EXPECT_EQ(phase_of(69, s), 2);
  EXPECT_EQ(phase_of(70, s), 3);
  EXPECT_EQ(phase_of(119, s), 3);
}

TEST(Schedule, PhasesAreMonotoneAndEachVisitedOnce) {
  const PhaseSchedule s;
  int prev = 1, changes = 0;
  for (int t = 0; t < s.total_steps; ++t) {
    const int ph = phase_of(t, s);
    EXPECT_GE(ph, prev);
    changes += ph != prev;
    prev = ph;
  }
  EXPECT_EQ(changes, 2);
}

TEST(Waypoints, HoverDescendLift) {
  const PhaseSchedule s;
  const Waypoints w;
  obs::CenteringRef ref{{0.12, 0.0, 0.15}};
  const double hover_z = 0.15 + w.hover + physics::kEeDrop;
  for (int t : {0, 20, 44}) EXPECT_DOUBLE_EQ(ee_waypoint(1, t, ref, s, w).position.z, hover_z);
  EXPECT_DOUBLE_EQ(ee_waypoint(2, 45, ref, s, w).position.z, hover_z);
  EXPECT_NEAR(ee_waypoint(2, 69, ref, s, w).position.z, 0.15 + w.descend + physics::kEeDrop, 1e-15);
  EXPECT_NEAR(ee_waypoint(3, 119, ref, s, w).position.z, hover_z + 0.25, 1e-15);
  EXPECT_EQ(ee_waypoint(3, 119, ref, s, w).position.x, 0.12);
}

TEST(Reset, IsDeterministic) {
  EnvConfig c;
  const ResetResult a = reset(42, c);
  const ResetResult b = reset(42, c);
  ASSERT_EQ(a.world.blocks.size(), b.world.blocks.size());
  EXPECT_EQ(a.target_idx, b.target_idx);
  for (std::size_t i = 0; i < a.world.blocks.size(); ++i) {
    EXPECT_EQ(std::memcmp(&a.world.blocks[i].center, &b.world.blocks[i].center, sizeof(physics::Vec3)), 0);
  }
  EXPECT_EQ(a.world.hand.base, b.world.hand.base);
}

TEST(Reset, SingleBlockSitsBetweenWalls) {
  EnvConfig c;
  c.n_blocks = 1;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const ResetResult r = reset(s, c);
    EXPECT_EQ(r.target_idx, 0);
    const auto nb = obs::neighbour_keypoints(r.world, 0);
    EXPECT_EQ(nb.left.first.x, r.world.container.left_wall_x);
    EXPECT_EQ(nb.right.first.x, r.world.container.right_wall_x);
  }
}

TEST(Reset, GapsStayInRange) {
  EnvConfig c;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const ResetResult r = reset(s, c);
    for (std::size_t i = 1; i < r.world.blocks.size(); ++i) {
      const double gap = (r.world.blocks[i].center.x - 0.015) - (r.world.blocks[i - 1].center.x + 0.015);
      EXPECT_GE(gap, c.gap_min - 5e-4);
      EXPECT_LE(gap, c.gap_max + 5e-4);
    }
  }
}

TEST(Reset, RandomisedBoxKeepsClearance) {
  EnvConfig c;
  c.container_length = 0.20;
  c.container_length_max = 0.40;
  c.row_shift_max = 0.06;
  double shortest = 1.0, longest = 0.0;
  for (std::uint64_t s = 0; s < 200; ++s) {
    const ResetResult r = reset(s, c);
    const auto& box = r.world.container;
    shortest = std::min(shortest, box.interior_length);
    longest = std::max(longest, box.interior_length);
    const double left = r.world.blocks.front().center.x - 0.015 - box.left_wall_x;
    const double right = box.right_wall_x - (r.world.blocks.back().center.x + 0.015);
    EXPECT_GE(std::min(left, right), kMinClearance - 5e-4);
  }
  EXPECT_GE(shortest, 0.20);
  EXPECT_LE(longest, 0.40);
  EXPECT_GT(longest - shortest, 0.15);
}

TEST(Reset, TenBlocksAtMaxGapsDoNotFit) {
  EnvConfig c;
  c.n_blocks = 10;
  c.gap_min = c.gap_max = 0.01;
  EXPECT_THROW(reset(0, c), InfeasibleLayout);
  c.grow_container = true;
  EXPECT_NO_THROW(reset(0, c));
}

TEST(Reset, ConstrainedBoxIsSnug) {
  EnvConfig c;
  c.variant = EnvVariant::kConstrained;
  const ResetResult r = reset(3, c);
  ASSERT_TRUE(r.world.container.inserts.has_value());
  const auto& b = r.world.blocks;
  const double free_left = (b.front().center.x - 0.015) - (r.world.container.left_wall_x + c.insert_depth);
  const double free_right = (r.world.container.right_wall_x - c.insert_depth) - (b.back().center.x + 0.015);
  EXPECT_LT(std::abs(free_left), 1e-3);
  EXPECT_LT(std::abs(free_right), 1e-3);
}

TEST(Episode, PhaseThreeActionsAreMasked) {
  EnvConfig c;
  Episode ep(c);
  ep.reset(5);
  std::mt19937_64 gen(1);
  while (!ep.done()) {
    const StepResult r = ep.step(random_action(gen, 1.0));
    if (r.record->phase == 3) {
      for (double a : r.record->applied_action) EXPECT_EQ(a, 0.0);
    }
  }
}

TEST(Episode, ActionsAreClamped) {
  EnvConfig c;
  Episode ep(c);
  ep.reset(6);
  std::vector<double> a(16, 0.0);
  a[2] = 10.0;
  a[5] = -10.0;
  const StepResult r = ep.step(a);
  EXPECT_EQ(r.record->applied_action[2], 0.1);
  EXPECT_EQ(r.record->applied_action[5], -0.1);
}

TEST(Episode, EmaFirstStepScalesTheRawAction) {
  EnvConfig c;
  c.ema = true;
  c.action_clamp = 10.0;
  Episode ep(c);
  ep.reset(7);
  std::vector<double> a(16, 1.0);
  const StepResult r = ep.step(a);
  for (double v : r.record->applied_action) EXPECT_DOUBLE_EQ(v, 0.2);
}

TEST(Episode, BetaOneIsTheIdentity) {
  EnvConfig c;
  c.ema = true;
  c.ema_beta = 1.0;
  c.mask_phase3 = false;
  Episode ep(c);
  ep.reset(8);
  std::mt19937_64 gen(2);
  while (!ep.done()) {
    const auto a = random_action(gen, 0.03);
    const StepResult r = ep.step(a);
    for (int j = 0; j < 16; ++j) EXPECT_EQ(r.record->applied_action[j], a[j]);
  }
}

TEST(Episode, TerminatesWithinTheHorizon) {
  EnvConfig c;
  Episode ep(c);
  ep.reset(9);
  int steps = 0;
  std::vector<double> zero(16, 0.0);
  while (!ep.done()) {
    ep.step(zero);
    ++steps;
  }
  EXPECT_LE(steps, 120);
  EXPECT_EQ(ep.outcome().steps, steps);
  EXPECT_THROW(ep.step(zero), Error);
}

TEST(Success, HoldWindow) {
  EnvConfig c;
  std::vector<double> h(120, 0.0);
  std::vector<std::vector<double>> others(120, std::vector<double>{0.0, 0.0, 0.0});
  for (int t = 80; t < 116; ++t) h[t] = 0.25;
  EXPECT_TRUE(is_success(h, others, 1, c));

  std::vector<double> short_run(120, 0.0);
  for (int t = 80; t < 109; ++t) short_run[t] = 0.25;
  EXPECT_FALSE(is_success(short_run, others, 1, c));

  std::vector<double> window(120, 0.0);
  for (int t = 80; t < 110; ++t) window[t] = 0.25;
  others[95][2] = 0.06;
  EXPECT_FALSE(is_success(window, others, 1, c));
}

TEST(Failure, Classes) {
  const reward::RewardParams p;
  EXPECT_EQ(classify_failure({false, false, 0.01}, p), FailureClass::kIsolating);
  EXPECT_EQ(classify_failure({false, false, 0.06}, p), FailureClass::kGraspRetrieve);
  EXPECT_EQ(classify_failure({true, false, 0.06}, p), FailureClass::kNone);
  EXPECT_EQ(classify_failure({false, true, 0.0}, p), FailureClass::kBlowup);
}

TEST(Episode, TeleportedTargetSucceeds) {
  EnvConfig c;
  Episode ep(c);
  ep.reset(10);
  const int t = ep.target();
  const double z0 = ep.world().blocks[t].center.z;
  std::vector<double> zero(16, 0.0);
  while (!ep.done()) {
    auto& b = ep.mutable_world().blocks[t];
    b.center.z = z0 + 0.3;
    b.vel_x = b.vel_z = b.ang_vel = 0.0;
    ep.step(zero);
  }
  EXPECT_TRUE(ep.outcome().success);
  EXPECT_EQ(ep.outcome().failure, FailureClass::kNone);
}

TEST(Config, ValidationRejectsBadValues) {
  EnvConfig c;
  c.n_blocks = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = EnvConfig{};
  c.gap_min = 0.02;
  EXPECT_THROW(c.validate(), ConfigError);
  c = EnvConfig{};
  c.schedule.total_steps = 60;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Strings, RoundTrip) {
  for (auto v : {EnvVariant::kNormal, EnvVariant::kConstrained}) {
    EXPECT_EQ(env_variant_from_string(to_string(v)), v);
  }
  for (auto p : {InitPose::kOpen, InitPose::kPregrasp}) {
    EXPECT_EQ(init_pose_from_string(to_string(p)), p);
  }
  EXPECT_THROW(env_variant_from_string("tight"), ConfigError);
}
