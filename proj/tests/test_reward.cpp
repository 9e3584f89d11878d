#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sope/reward.hpp"
#include "test_support.hpp"

using namespace sope;
using namespace sope::reward;

namespace {
constexpr double kTol = 1e-6;
const RewardParams kP;
}  // namespace

TEST(Constants, PinnedValues) {
  EXPECT_EQ(kP.alpha_h, 0.2);
  EXPECT_EQ(kP.lambda_h, 0.1);
  EXPECT_EQ(kP.lambda_p, 15.0);
  EXPECT_EQ(kP.alpha_p, 0.07);
  EXPECT_EQ(kP.alpha_c, 2.0);
  EXPECT_EQ(kP.alpha_s, 0.04);
  EXPECT_EQ(kP.alpha_o, 0.05);
}

TEST(Constants, PhaseWeightRows) {
  const PhaseWeights w;
  EXPECT_EQ(w.at(1), (Weights{0.0, 0.2, 0.0, -10.0, -11.0, -0.001}));
  EXPECT_EQ(w.at(2), (Weights{0.0, 0.2, 0.1, -5.0, -11.0, -0.001}));
  EXPECT_EQ(w.at(3), (Weights{10.0, 0.2, 0.0, 0.0, -11.0, 0.0}));
  EXPECT_THROW(w.at(4), ConfigError);
}

TEST(Height, Examples) {
  EXPECT_NEAR(height_reward(0.25, kP), 0.2, kTol);
  EXPECT_NEAR(height_reward(-0.1, kP), -0.01, kTol);
  EXPECT_NEAR(height_reward(0.0, kP), 0.0, kTol);
}

TEST(Proximity, Examples) {
  EXPECT_NEAR(proximity_reward(0.07, kP), 0.349938, kTol);
  EXPECT_EQ(proximity_reward(0.02, kP), proximity_reward(0.07, kP));
  EXPECT_NEAR(proximity_reward(0.2, kP), 0.049787, kTol);
}

TEST(Grasp, Examples) {
  EXPECT_NEAR(grasp_reward(0, kP), 0.0, kTol);
  EXPECT_NEAR(grasp_reward(3, kP), 2.0, kTol);
  EXPECT_NEAR(grasp_reward(2, kP), 2.0, kTol);
}

TEST(Split, Examples) {
  EXPECT_NEAR(split_penalty(0.04, kP), 0.0, kTol);
  EXPECT_NEAR(split_penalty(0.01, kP), 0.03, kTol);
  EXPECT_NEAR(split_penalty(0.10, kP), 0.0, kTol);
}

TEST(Others, Examples) {
  const std::vector<double> calm{0.0, 0.01, 0.05};
  EXPECT_NEAR(other_blocks_penalty(calm, 0, kP), 0.0, kTol);
  const std::vector<double> one{0.0, 0.08, 0.0};
  EXPECT_NEAR(other_blocks_penalty(one, 0, kP), 0.08, kTol);
  const std::vector<double> two{0.3, 0.06, 0.07};
  EXPECT_NEAR(other_blocks_penalty(two, 0, kP), 0.13, kTol);
}

TEST(Action, Examples) {
  std::vector<double> a(16, 0.0);
  EXPECT_NEAR(action_penalty(a), 0.0, kTol);
  a[3] = 1.0;
  EXPECT_NEAR(action_penalty(a), 1.0, kTol);
  std::fill(a.begin(), a.end(), 0.1);
  EXPECT_NEAR(action_penalty(a), 0.16, kTol);
}

TEST(Total, PhaseOneExample) {
  RewardFeatures f;
  f.sum_d = 0.07;
  f.d_s = 0.01;
  f.other_heights = {0.0, 0.0};
  EXPECT_NEAR(total_reward(f, 1, kP, PhaseWeights{}).total, -0.230012, kTol);
}

TEST(Total, PhaseThreeExample) {
  RewardFeatures f;
  f.h_target = 0.25;
  f.sum_d = 0.07;
  f.sum_c = 2;
  f.d_s = 0.1;
  f.other_heights = {0.25, 0.0};
  f.action.fill(0.1);
  EXPECT_NEAR(total_reward(f, 3, kP, PhaseWeights{}).total, 2.069988, kTol);
}

TEST(Total, OnlyProximityWithZeroFeatures) {
  RewardFeatures f;
  f.d_s = 0.04;  // zero split penalty
  f.other_heights = {0.0};
  for (int ph : {1, 2, 3}) {
    EXPECT_NEAR(total_reward(f, ph, kP, PhaseWeights{}).total, 0.2 * std::exp(-1.05), kTol);
  }
}

TEST(Properties, MonotoneAndBounded) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(-0.3, 0.5);
  for (int i = 0; i < 2000; ++i) {
    const double a = u(gen), b = u(gen);
    const double lo = std::min(a, b), hi = std::max(a, b);
    EXPECT_LE(height_reward(lo, kP), height_reward(hi, kP));
    EXPECT_LE(height_reward(hi, kP), kP.alpha_h);
    const double da = std::abs(a), db = std::abs(b);
    EXPECT_GE(proximity_reward(std::min(da, db), kP), proximity_reward(std::max(da, db), kP));
    EXPECT_GT(proximity_reward(da, kP), 0.0);
    EXPECT_LE(proximity_reward(da, kP), std::exp(-kP.lambda_p * kP.alpha_p) + 1e-15);
    EXPECT_GE(split_penalty(std::min(da, db), kP), split_penalty(std::max(da, db), kP));
    EXPECT_GE(split_penalty(da, kP), 0.0);
    EXPECT_LE(split_penalty(da, kP), kP.alpha_s);
  }
  for (int c = 0; c <= 4; ++c) {
    EXPECT_GE(grasp_reward(c, kP), 0.0);
    EXPECT_LE(grasp_reward(c, kP), kP.alpha_c);
  }
}

TEST(Properties, RecompositionMatches) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.0, 0.3);
  const PhaseWeights w;
  for (int i = 0; i < 500; ++i) {
    RewardFeatures f;
    f.h_target = u(gen) - 0.1;
    f.sum_d = u(gen);
    f.sum_c = static_cast<int>(u(gen) * 15) % 5;
    f.d_s = u(gen) * 0.2;
    f.other_heights = {f.h_target, u(gen) * 0.2, u(gen) * 0.2};
    for (double& a : f.action) a = u(gen) - 0.15;
    const int ph = 1 + i % 3;
    const RewardBreakdown b = total_reward(f, ph, kP, w);
    EXPECT_NEAR(recompose(b, w.at(ph)), b.total, 1e-12);
  }
}

TEST(Measure, SplitDistanceToWallsAndNeighbours) {
  physics::WorldState w = fixture::row_world(3, 0.005);
  // Middle block: nearest corners are 5 mm apart on both sides.
  EXPECT_NEAR(split_distance(w, 1), 0.005, 1e-12);
  // End block: the wall's virtual point sits 2.5 cm above the top edge.
  const double edge = w.blocks[0].center.x - 0.015 - w.container.left_wall_x;
  const double to_wall = std::hypot(edge, 0.175 - 0.15);
  EXPECT_NEAR(split_distance(w, 0), std::min(to_wall, 0.005), 1e-12);
}

TEST(Params, RejectNonPositive) {
  RewardParams p;
  p.alpha_s = 0.0;
  EXPECT_THROW(p.validate(), ConfigError);
}
