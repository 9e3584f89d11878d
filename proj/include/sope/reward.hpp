#pragma once

// Six shaping terms and their phase-weighted sum.

#include <array>
#include <span>
#include <vector>

#include "sope/physics.hpp"

namespace sope::reward {

struct RewardParams {
  double alpha_h = 0.2;    // height cap
  double lambda_h = 0.1;   // slope below the initial height
  double lambda_p = 15.0;  // proximity decay
  double alpha_p = 0.07;   // proximity saturation distance
  double alpha_c = 2.0;    // grasp cap
  double alpha_s = 0.04;   // split distance that zeroes the penalty
  double alpha_o = 0.05;   // lift tolerance for other blocks

  void validate() const;
};

struct Weights {
  double w_h = 0.0;
  double w_p = 0.0;
  double w_g = 0.0;
  double w_s = 0.0;
  double w_o = 0.0;
  double w_a = 0.0;
  bool operator==(const Weights&) const = default;
};

// One row per phase; index 0 is phase 1.
struct PhaseWeights {
  std::array<Weights, 3> rows{{
      {0.0, 0.2, 0.0, -10.0, -11.0, -0.001},
      {0.0, 0.2, 0.1, -5.0, -11.0, -0.001},
      {10.0, 0.2, 0.0, 0.0, -11.0, 0.0},
  }};

  const Weights& at(int phase) const;
  void validate() const;
};

struct RewardFeatures {
  double h_target = 0.0;
  double sum_d = 0.0;
  int sum_c = 0;
  double d_s = 0.0;
  std::vector<double> other_heights;  // every block, indexed like the world
  int target_idx = 0;
  physics::JointVector action{};
};

struct RewardBreakdown {
  double r_h = 0.0;
  double r_p = 0.0;
  double r_g = 0.0;
  double p_s = 0.0;
  double p_o = 0.0;
  double p_a = 0.0;
  double total = 0.0;
  int phase = 1;
};

double height_reward(double h, const RewardParams& p);
double proximity_reward(double sum_d, const RewardParams& p);
double grasp_reward(int sum_c, const RewardParams& p);
double split_penalty(double d_s, const RewardParams& p);
double other_blocks_penalty(std::span<const double> heights, int target_idx,
                            const RewardParams& p);
double action_penalty(std::span<const double> action);

RewardBreakdown total_reward(const RewardFeatures& f, int phase, const RewardParams& p,
                             const PhaseWeights& w);

// Weighted sum of an existing breakdown, for replay checks.
double recompose(const RewardBreakdown& b, const Weights& w);

// Min corner-to-corner distance between the target and either neighbour.
double split_distance(const physics::WorldState& world, int target_idx);

// Everything except the action, measured on `world`.
RewardFeatures measure(const physics::WorldState& world, int target_idx,
                       std::span<const double> initial_heights,
                       const physics::PhysicsParams& params);

}  // namespace sope::reward
