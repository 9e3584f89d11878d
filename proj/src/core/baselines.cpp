#include "sope/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "sope/encoder.hpp"

namespace sope::baselines {

using physics::JointVector;
using physics::kJointsPerFinger;
using physics::kNumFingers;
using physics::Vec3;

void S2SSPConfig::validate() const {
  int sum = 0;
  for (int b : budgets) {
    if (b < 0) throw ConfigError("stage budgets must be non-negative");
    sum += b;
  }
  if (sum > 120) throw ConfigError("stage budgets must sum to at most 120");
  for (int f : push_fingers) {
    if (f < 0 || f >= kNumFingers) throw ConfigError("push finger out of range");
  }
  for (int f : pinch_fingers) {
    if (f < 0 || f >= kNumFingers) throw ConfigError("pinch finger out of range");
  }
  if (pinch_fingers[0] == pinch_fingers[1]) throw ConfigError("pinch fingers must differ");
  if (!(tolerance > 0.0) || push_stroke < 0.0) throw ConfigError("bad script geometry");
}

JointVector tip_ik_step(const physics::HandState& hand, const physics::PhysicsParams& params,
                        const std::array<std::optional<Vec3>, kNumFingers>& goals,
                        double max_step) {
  constexpr double kDamping2 = 1e-4;
  JointVector delta{};
  const physics::Fingertips tips = physics::fk_fingertips(hand, params);
  double biggest = 0.0;
  for (int f = 0; f < kNumFingers; ++f) {
    if (!goals[f]) continue;
    const auto jac = physics::fingertip_jacobian(hand, params, f);
    const double ex = goals[f]->x - tips[f].x;
    const double ez = goals[f]->z - tips[f].z;
    // (J J^T + d I)^-1 e, 2x2.
    double a = kDamping2, b = 0.0, d = kDamping2;
    for (const auto& c : jac) {
      a += c[0] * c[0];
      b += c[0] * c[1];
      d += c[1] * c[1];
    }
    const double det = a * d - b * b;
    const double yx = (d * ex - b * ez) / det;
    const double yz = (a * ez - b * ex) / det;
    for (int k = 0; k < kJointsPerFinger; ++k) {
      const int j = kJointsPerFinger * f + k;
      const double want = hand.joints[j] + jac[k][0] * yx + jac[k][1] * yz;
      delta[j] = want - hand.joint_targets[j];
      biggest = std::max(biggest, std::abs(delta[j]));
    }
  }
  if (biggest > max_step) {
    for (double& v : delta) v *= max_step / biggest;
  }
  return delta;
}

S2SSP::S2SSP(S2SSPConfig config, physics::PhysicsParams params)
    : config_(config), params_(params) {
  config_.validate();
}

void S2SSP::reset(const physics::WorldState& world, int target_idx) {
  target_ = target_idx;
  stage_ = Stage::kPushLeft;
  clock_ = 0;
  goals_ = {};
  const auto& blocks = world.blocks;
  top_ = obs::top_edge_midpoint(blocks.at(target_idx));
  left_wall_ = target_idx == 0;
  right_wall_ = target_idx + 1 == static_cast<int>(blocks.size());
  if (!left_wall_) left_corner_ = physics::block_keypoints(blocks[target_idx - 1]).second;
  if (!right_wall_) right_corner_ = physics::block_keypoints(blocks[target_idx + 1]).first;
  lift_from_ = config_.grasp_height;
  while (stage_ == Stage::kPushLeft && left_wall_) advance();
}

void S2SSP::advance() {
  clock_ = 0;
  switch (stage_) {
    case Stage::kPushLeft:
      stage_ = Stage::kPushRight;
      if (right_wall_) advance();
      break;
    case Stage::kPushRight:
      stage_ = Stage::kDescend;
      break;
    case Stage::kDescend:
      stage_ = Stage::kClose;
      break;
    case Stage::kClose:
      stage_ = Stage::kLift;
      break;
    case Stage::kLift:
    case Stage::kDone:
      stage_ = Stage::kDone;
      break;
  }
}

ScriptCommand S2SSP::act(const physics::WorldState& world) {
  const double r = params_.tip_radius;
  const double hx = physics::RigidBlock{}.half_x;
  const int budget = stage_ == Stage::kDone ? 0 : config_.budgets[static_cast<int>(stage_)];
  if (stage_ != Stage::kDone && clock_ >= budget) advance();

  double ee = config_.hover;
  bool track = true;
  const int k = clock_;
  switch (stage_) {
    case Stage::kPushLeft:
    case Stage::kPushRight: {
      const bool left = stage_ == Stage::kPushLeft;
      const double dir = left ? -1.0 : 1.0;
      const Vec3 corner = left ? left_corner_ : right_corner_;
      const double along = std::min(1.0, std::max(0.0, (k - 4) / 8.0));
      Vec3 g{corner.x + dir * (r + 0.001) + dir * config_.push_stroke * along, 0.0,
             corner.z + r - config_.push_depth};
      // Come in from above the corner, then press and stroke.
      if (k < 4) g = {corner.x - dir * 0.006, 0.0, corner.z + r + 0.01};
      else if (along == 0.0) g.x = corner.x - dir * 0.006;
      goals_[config_.push_fingers[left ? 0 : 1]] = g;
      break;
    }
    case Stage::kDescend:
    case Stage::kClose: {
      const double frac = std::min(1.0, (k + 1) / 8.0);
      ee = stage_ == Stage::kDescend ? config_.hover + (config_.grasp_height - config_.hover) * frac
                                     : config_.grasp_height;
      const double gap = stage_ == Stage::kDescend ? r + 0.003 : r - config_.pinch_squeeze;
      const double z = top_.z - config_.pinch_depth;
      goals_[config_.pinch_fingers[0]] = Vec3{top_.x - hx - gap, 0.0, z};
      goals_[config_.pinch_fingers[1]] = Vec3{top_.x + hx + gap, 0.0, z};
      break;
    }
    case Stage::kLift:
    case Stage::kDone: {
      const double frac = stage_ == Stage::kDone ? 1.0 : std::min(1.0, (k + 1) / 15.0);
      ee = lift_from_ + (config_.lift_end - lift_from_) * frac;
      track = false;
      break;
    }
  }
  ++clock_;

  ScriptCommand cmd;
  cmd.base.position = {top_.x, 0.0, top_.z + ee + physics::kEeDrop};
  cmd.base.wrist = 0.0;
  if (track) cmd.delta = tip_ik_step(world.hand, params_, goals_, 0.1);
  return cmd;
}

TwoPhase two_phase_schedule() {
  TwoPhase tp;
  tp.schedule.phase1_steps = 70;
  tp.schedule.phase2_steps = 0;
  tp.schedule.total_steps = 120;
  tp.weights.rows[0] = {0.0, 0.2, 0.1, -10.0, -11.0, -0.001};
  tp.weights.rows[1] = tp.weights.rows[0];
  tp.waypoints.hover = 0.02;
  return tp;
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone:
      return "none";
    case Ablation::kTactile:
      return "tactile";
    case Ablation::kNaiveBlock:
      return "naive_block";
    case Ablation::kTwoPhase:
      return "two_phase";
  }
  return "none";
}

Ablation ablation_from_string(const std::string& s) {
  if (s == "none" || s.empty()) return Ablation::kNone;
  if (s == "tactile") return Ablation::kTactile;
  if (s == "naive_block") return Ablation::kNaiveBlock;
  if (s == "two_phase") return Ablation::kTwoPhase;
  throw ConfigError("unknown ablation: " + s);
}

void apply_ablation(Ablation a, env::EnvConfig& config) {
  switch (a) {
    case Ablation::kNone:
      break;
    case Ablation::kTactile:
      config.obs_variant = obs::Variant::kTactile;
      break;
    case Ablation::kNaiveBlock:
      config.obs_variant = obs::Variant::kNaiveBlock;
      break;
    case Ablation::kTwoPhase: {
      const TwoPhase tp = two_phase_schedule();
      config.schedule = tp.schedule;
      config.weights = tp.weights;
      config.waypoints.hover = tp.waypoints.hover;
      break;
    }
  }
}

}  // namespace sope::baselines
