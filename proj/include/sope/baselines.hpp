#pragma once

// Scripted swipe-and-pinch controller and the ablation presets.

#include <array>
#include <optional>
#include <string>

#include "sope/env.hpp"
#include "sope/physics.hpp"

namespace sope::baselines {

struct S2SSPConfig {
  std::array<int, 2> push_fingers{0, 3};   // left stroke, right stroke
  std::array<int, 2> pinch_fingers{1, 2};  // left and right of the target
  double push_depth = 0.004;   // how far the push tip sits below the neighbour's top
  double push_stroke = 0.02;
  double pinch_depth = 0.03;   // pinch height below the target's top edge
  double pinch_squeeze = 0.006;
  double hover = 0.05;         // end-effector height over the top edge while pushing
  double grasp_height = -0.01;
  double lift_end = 0.30;
  std::array<int, 5> budgets{20, 20, 15, 15, 50};
  double tolerance = 0.003;    // tip error that ends a stage early

  void validate() const;
};

enum class Stage { kPushLeft, kPushRight, kDescend, kClose, kLift, kDone };

struct ScriptCommand {
  physics::JointVector delta{};
  physics::BaseTarget base;
};

// Finite-state script. One instance drives one episode.
class S2SSP {
 public:
  S2SSP(S2SSPConfig config, physics::PhysicsParams params);

  void reset(const physics::WorldState& world, int target_idx);
  ScriptCommand act(const physics::WorldState& world);
  Stage stage() const { return stage_; }
  int stage_clock() const { return clock_; }

 private:
  void advance();

  S2SSPConfig config_;
  physics::PhysicsParams params_;
  Stage stage_ = Stage::kPushLeft;
  int clock_ = 0;
  int target_ = 0;
  physics::Vec3 top_;  // target's initial top-edge midpoint
  // Tip goals held from earlier stages; unset means "keep current joints".
  std::array<std::optional<physics::Vec3>, physics::kNumFingers> goals_;
  bool left_wall_ = false;
  bool right_wall_ = false;
  physics::Vec3 left_corner_;
  physics::Vec3 right_corner_;
  double lift_from_ = 0.0;
};

// Joint deltas moving the tips toward `goals` (damped least squares per
// finger), scaled so no entry exceeds `max_step`.
physics::JointVector tip_ik_step(
    const physics::HandState& hand, const physics::PhysicsParams& params,
    const std::array<std::optional<physics::Vec3>, physics::kNumFingers>& goals,
    double max_step);

struct TwoPhase {
  env::PhaseSchedule schedule;
  reward::PhaseWeights weights;
  env::Waypoints waypoints;
};

TwoPhase two_phase_schedule();

enum class Ablation { kNone, kTactile, kNaiveBlock, kTwoPhase };
std::string to_string(Ablation a);
Ablation ablation_from_string(const std::string& s);

// Applies the ablation's documented changes to an env config; idempotent.
void apply_ablation(Ablation a, env::EnvConfig& config);

}  // namespace sope::baselines
