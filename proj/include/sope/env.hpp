#pragma once

// Single singulation episode: randomized reset, three-phase schedule with
// scripted wrist waypoints, masked/smoothed delta-joint actions, success
// detection and failure classification.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sope/encoder.hpp"
#include "sope/physics.hpp"
#include "sope/reward.hpp"

namespace sope::env {

struct PhaseSchedule {
  int phase1_steps = 45;
  int phase2_steps = 25;
  int total_steps = 120;

  void validate() const;
};

int phase_of(int t, const PhaseSchedule& s);

// End-effector heights relative to the target's initial top edge.
struct Waypoints {
  double hover = 0.05;
  double descend = -0.01;
  double lift_end = 0.30;
  int descend_steps = 10;
  int lift_steps = 15;
};

enum class TargetPolicy { kUniform, kFixed };
enum class EnvVariant { kNormal, kConstrained };
enum class InitPose { kOpen, kPregrasp };

std::string to_string(EnvVariant v);
EnvVariant env_variant_from_string(const std::string& s);
std::string to_string(InitPose p);
InitPose init_pose_from_string(const std::string& s);

inline constexpr double kMinClearance = 0.01;

struct EnvConfig {
  int n_blocks = 4;
  TargetPolicy target_policy = TargetPolicy::kUniform;
  int fixed_target = 0;
  EnvVariant variant = EnvVariant::kNormal;
  obs::Variant obs_variant = obs::Variant::kStandard;
  InitPose init_pose = InitPose::kOpen;

  double container_length = 0.26;
  // Training randomisation of the box: when container_length_max exceeds
  // container_length the length is drawn from that range, and the row is
  // shifted by up to row_shift_max while keeping kMinClearance to each wall.
  double container_length_max = 0.0;
  double row_shift_max = 0.0;
  double wall_height = 0.175;
  bool grow_container = false;  // widen the box when n_blocks cannot fit
  double gap_min = 0.002;
  double gap_max = 0.010;
  double constrained_gap_min = 0.0;
  double constrained_gap_max = 0.001;
  double insert_depth = 0.015;
  double insert_stiffness = 2000.0;
  double hand_offset_x = 0.01;
  double hand_offset_z = 0.01;
  int settle_substeps = 240;

  PhaseSchedule schedule;
  Waypoints waypoints;
  double success_height = 0.2;
  int success_hold = 30;
  double other_cap = 0.05;
  double ema_beta = 0.2;
  bool ema = false;
  double action_clamp = 0.1;
  double max_target_lead = 0.3;  // |joint target - joint| bound
  bool mask_phase3 = true;
  bool early_termination = true;

  physics::PhysicsParams physics;
  reward::RewardParams reward;
  reward::PhaseWeights weights;

  int obs_dim() const { return obs::ObservationLayout::make(obs_variant).total_dim; }
  void validate() const;
};

// Joint pose the hand starts in.
physics::JointVector initial_joints(InitPose pose);

physics::BaseTarget ee_waypoint(int phase, int t, const obs::CenteringRef& ref,
                                const PhaseSchedule& s, const Waypoints& w);

// Container length needed for n blocks at the widest gaps.
double required_length(int n_blocks, double gap_max, double half_x);

struct ResetResult {
  physics::WorldState world;
  obs::CenteringRef ref;
  int target_idx = 0;
};

// Throws InfeasibleLayout when the sampled row does not fit.
ResetResult reset(std::uint64_t seed, const EnvConfig& config);

bool is_success(std::span<const double> target_heights,
                std::span<const std::vector<double>> other_heights, int target_idx,
                const EnvConfig& config);

enum class FailureClass { kNone, kIsolating, kGraspRetrieve, kBlowup };
std::string to_string(FailureClass f);

struct TrialHistory {
  bool success = false;
  bool blowup = false;
  double max_split_early = 0.0;  // max d_s over phases 1-2
};

FailureClass classify_failure(const TrialHistory& h, const reward::RewardParams& p);

struct TrialOutcome {
  bool success = false;
  FailureClass failure = FailureClass::kNone;
  int steps = 0;
  double reward_sum = 0.0;
  int target_idx = 0;
};

struct StepRecord {
  int step = 0;  // index of the step just taken
  int phase = 1;
  std::vector<double> observation;  // observation the action was chosen from
  physics::JointVector raw_action{};
  physics::JointVector applied_action{};
  reward::RewardFeatures features;
  reward::RewardBreakdown reward;
  std::vector<physics::RigidBlock> blocks;
  physics::HandState hand;
  int contact_count = 0;
};

struct StepResult {
  obs::Observation observation;
  double reward = 0.0;
  bool done = false;
  const StepRecord* record = nullptr;  // valid until the next step
};

class Episode {
 public:
  explicit Episode(EnvConfig config);

  obs::Observation reset(std::uint64_t seed);
  StepResult step(std::span<const double> raw_action);

  // Replaces the scheduled waypoint for the next steps (scripted control).
  void set_base_override(std::optional<physics::BaseTarget> target) { override_ = target; }
  // Skip the phase-3 mask for the coming steps.
  void set_mask_phase3(bool on) { mask_phase3_ = on; }

  const EnvConfig& config() const { return config_; }
  const physics::WorldState& world() const { return world_; }
  // Direct state access for test instrumentation only.
  physics::WorldState& mutable_world() { return world_; }
  const obs::CenteringRef& ref() const { return ref_; }
  int target() const { return target_; }
  int t() const { return t_; }
  int phase() const { return phase_of(t_, config_.schedule); }
  bool done() const { return done_; }
  const TrialOutcome& outcome() const { return outcome_; }
  std::span<const double> initial_heights() const { return initial_heights_; }
  obs::Observation observe() const;

 private:
  void finish(bool blowup);

  EnvConfig config_;
  physics::WorldState world_;
  obs::CenteringRef ref_;
  int target_ = 0;
  int t_ = 0;
  bool done_ = true;
  bool mask_phase3_ = true;
  std::vector<double> initial_heights_;
  physics::JointVector smoothed_{};
  std::optional<physics::BaseTarget> override_;
  int hold_ = 0;
  bool success_ = false;
  double max_split_early_ = 0.0;
  TrialOutcome outcome_;
  StepRecord record_;
};

}  // namespace sope::env
