#include "sope/env.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sope/rng.hpp"

namespace sope::env {

using physics::BaseTarget;
using physics::JointVector;
using physics::kJointsPerFinger;
using physics::kNumJoints;
using physics::Vec3;

namespace {

// Tip 8 cm under the finger mount; inner fingers clear a 3 cm block by 3 mm,
// outer fingers hang straight under their mounts.
constexpr std::array<double, 4> kOuterOpen{0.8707, -0.6573, -1.3435, -0.6474};
constexpr std::array<double, 4> kInnerOpen{-0.9563, 0.6107, 1.3633, 0.6644};
// Inner fingers 11 cm under the mount, commanded 8 mm into a centred block.
constexpr std::array<double, 4> kInnerPinch{-0.625, 0.4495, 0.89, 0.4771};

void put_finger(JointVector& q, int finger, const std::array<double, 4>& a, double sign) {
  for (int k = 0; k < kJointsPerFinger; ++k) q[kJointsPerFinger * finger + k] = sign * a[k];
}

}  // namespace

void PhaseSchedule::validate() const {
  if (phase1_steps < 0 || phase2_steps < 0 || total_steps <= 0 ||
      phase1_steps + phase2_steps >= total_steps) {
    throw ConfigError("phase schedule must satisfy phase1 + phase2 < total");
  }
}

int phase_of(int t, const PhaseSchedule& s) {
  if (t < s.phase1_steps) return 1;
  if (t < s.phase1_steps + s.phase2_steps) return 2;
  return 3;
}

std::string to_string(EnvVariant v) {
  return v == EnvVariant::kNormal ? "normal" : "constrained";
}

EnvVariant env_variant_from_string(const std::string& s) {
  if (s == "normal") return EnvVariant::kNormal;
  if (s == "constrained") return EnvVariant::kConstrained;
  throw ConfigError("unknown environment variant: " + s);
}

std::string to_string(InitPose p) { return p == InitPose::kOpen ? "open" : "pregrasp"; }

InitPose init_pose_from_string(const std::string& s) {
  if (s == "open") return InitPose::kOpen;
  if (s == "pregrasp") return InitPose::kPregrasp;
  throw ConfigError("unknown initial pose: " + s);
}

std::string to_string(FailureClass f) {
  switch (f) {
    case FailureClass::kNone:
      return "none";
    case FailureClass::kIsolating:
      return "isolating";
    case FailureClass::kGraspRetrieve:
      return "grasp_retrieve";
    case FailureClass::kBlowup:
      return "blowup";
  }
  return "none";
}

void EnvConfig::validate() const {
  if (n_blocks < 1) throw ConfigError("n_blocks must be at least 1");
  if (target_policy == TargetPolicy::kFixed && (fixed_target < 0 || fixed_target >= n_blocks)) {
    throw ConfigError("fixed target index out of range");
  }
  if (!(gap_min >= 0.0 && gap_min <= gap_max)) throw ConfigError("bad gap range");
  if (!(constrained_gap_min >= 0.0 && constrained_gap_min <= constrained_gap_max)) {
    throw ConfigError("bad constrained gap range");
  }
  if (!(container_length > 0.0 && wall_height > 0.0)) throw ConfigError("bad container");
  if (container_length_max != 0.0 && !(container_length_max >= container_length)) {
    throw ConfigError("container_length_max must be 0 or at least container_length");
  }
  if (!(row_shift_max >= 0.0)) throw ConfigError("row_shift_max must be >= 0");
  if (!(insert_depth >= 0.0 && insert_stiffness > 0.0)) throw ConfigError("bad inserts");
  if (!(hand_offset_x >= 0.0 && hand_offset_z >= 0.0)) throw ConfigError("bad hand offsets");
  if (settle_substeps < 0) throw ConfigError("settle_substeps must be >= 0");
  schedule.validate();
  if (waypoints.descend_steps < 1 || waypoints.lift_steps < 1) {
    throw ConfigError("waypoint step counts must be positive");
  }
  if (!(success_height > 0.0) || success_hold < 1 || !(other_cap > 0.0)) {
    throw ConfigError("bad success thresholds");
  }
  if (!(ema_beta > 0.0 && ema_beta <= 1.0)) throw ConfigError("ema_beta must be in (0, 1]");
  if (!(action_clamp > 0.0) || !(max_target_lead > 0.0)) throw ConfigError("bad action bounds");
  physics.validate();
  reward.validate();
  weights.validate();
}

JointVector initial_joints(InitPose pose) {
  JointVector q{};
  put_finger(q, 0, kOuterOpen, 1.0);
  put_finger(q, 3, kOuterOpen, -1.0);
  const auto& inner = pose == InitPose::kOpen ? kInnerOpen : kInnerPinch;
  put_finger(q, 1, inner, 1.0);
  put_finger(q, 2, inner, -1.0);
  return q;
}

BaseTarget ee_waypoint(int phase, int t, const obs::CenteringRef& ref, const PhaseSchedule& s,
                       const Waypoints& w) {
  double h = w.hover;
  if (phase == 2) {
    const double k = t - s.phase1_steps;
    const double frac = std::min(1.0, k / w.descend_steps);
    h = w.hover + (w.descend - w.hover) * frac;
  } else if (phase == 3) {
    const double start = s.phase2_steps > 0 ? w.descend : w.hover;
    const double k = t - s.phase1_steps - s.phase2_steps;
    const double frac = std::min(1.0, k / w.lift_steps);
    h = start + (w.lift_end - start) * frac;
  }
  BaseTarget b;
  b.position = {ref.origin.x, 0.0, ref.origin.z + h + physics::kEeDrop};
  b.wrist = 0.0;
  return b;
}

double required_length(int n_blocks, double gap_max, double half_x) {
  return n_blocks * 2.0 * half_x + (n_blocks - 1) * gap_max + 0.10;
}

ResetResult reset(std::uint64_t seed, const EnvConfig& config) {
  config.validate();
  std::mt19937_64 gen = rng::stream(seed, 0, 0, rng::Purpose::kReset);
  const bool constrained = config.variant == EnvVariant::kConstrained;
  const double gmin = constrained ? config.constrained_gap_min : config.gap_min;
  const double gmax = constrained ? config.constrained_gap_max : config.gap_max;
  std::uniform_real_distribution<double> gap_dist(gmin, gmax);

  const int n = config.n_blocks;
  const physics::RigidBlock proto;
  std::vector<double> gaps(n - 1);
  double row = n * 2.0 * proto.half_x;
  for (double& g : gaps) {
    g = gmin == gmax ? gmin : gap_dist(gen);
    row += g;
  }

  ResetResult out;
  physics::WorldState& w = out.world;
  double start = 0.0;
  if (constrained) {
    const double d = config.insert_depth;
    w.container = physics::Container::make(row + 2.0 * d, config.wall_height);
    w.container.inserts = physics::WallInserts{d, d, config.insert_stiffness};
    start = d;
  } else {
    double length = config.container_length;
    if (config.container_length_max > length) {
      length = std::uniform_real_distribution<double>(length, config.container_length_max)(gen);
    }
    if (config.grow_container) {
      length = std::max(length, required_length(n, gmax, proto.half_x));
    }
    if (row > length) {
      throw InfeasibleLayout("row of " + std::to_string(n) + " blocks needs " +
                             std::to_string(row) + " m, container is " + std::to_string(length) +
                             " m");
    }
    w.container = physics::Container::make(length, config.wall_height);
    start = 0.5 * (length - row);
    if (config.row_shift_max > 0.0) {
      const double slack = std::max(0.0, start - kMinClearance);
      const double shift =
          std::uniform_real_distribution<double>(-config.row_shift_max, config.row_shift_max)(gen);
      start += std::clamp(shift, -slack, slack);
    }
  }

  double x = w.container.left_wall_x + start;
  for (int i = 0; i < n; ++i) {
    physics::RigidBlock b;
    b.id = i;
    b.center = {x + b.half_x, 0.0, w.container.floor_z + b.half_z};
    w.blocks.push_back(b);
    x += 2.0 * b.half_x + (i + 1 < n ? gaps[i] : 0.0);
  }

  if (config.target_policy == TargetPolicy::kFixed) {
    out.target_idx = config.fixed_target;
  } else {
    std::uniform_int_distribution<int> pick(0, n - 1);
    out.target_idx = pick(gen);
  }

  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const double ox = config.hand_offset_x * unit(gen);
  const double oz = config.hand_offset_z * unit(gen);
  const obs::CenteringRef pre{obs::top_edge_midpoint(w.blocks[out.target_idx])};
  const BaseTarget hover = ee_waypoint(1, 0, pre, config.schedule, config.waypoints);
  w.hand.base = hover.position + Vec3{ox, 0.0, oz};
  w.hand.joints = initial_joints(config.init_pose);
  w.hand.joint_targets = w.hand.joints;

  physics::substep_n(w, BaseTarget{w.hand.base, 0.0}, config.physics, config.settle_substeps);
  w.time = 0.0;
  out.ref.origin = obs::top_edge_midpoint(w.blocks[out.target_idx]);
  return out;
}

bool is_success(std::span<const double> target_heights,
                std::span<const std::vector<double>> other_heights, int target_idx,
                const EnvConfig& config) {
  int run = 0;
  for (std::size_t t = 0; t < target_heights.size(); ++t) {
    bool ok = target_heights[t] >= config.success_height;
    if (ok && t < other_heights.size()) {
      const auto& row = other_heights[t];
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (static_cast<int>(i) != target_idx && row[i] >= config.other_cap) ok = false;
      }
    }
    run = ok ? run + 1 : 0;
    if (run >= config.success_hold) return true;
  }
  return false;
}

FailureClass classify_failure(const TrialHistory& h, const reward::RewardParams& p) {
  if (h.blowup) return FailureClass::kBlowup;
  if (h.success) return FailureClass::kNone;
  return h.max_split_early < p.alpha_s ? FailureClass::kIsolating
                                       : FailureClass::kGraspRetrieve;
}

Episode::Episode(EnvConfig config) : config_(std::move(config)) { config_.validate(); }

obs::Observation Episode::observe() const {
  const int ph = phase_of(t_, config_.schedule);
  return obs::encode(world_, target_, ph, ref_, obs::ObservationLayout::make(config_.obs_variant));
}

obs::Observation Episode::reset(std::uint64_t seed) {
  ResetResult r = env::reset(seed, config_);
  world_ = std::move(r.world);
  ref_ = r.ref;
  target_ = r.target_idx;
  t_ = 0;
  done_ = false;
  mask_phase3_ = config_.mask_phase3;
  override_.reset();
  smoothed_.fill(0.0);
  hold_ = 0;
  success_ = false;
  max_split_early_ = 0.0;
  initial_heights_.clear();
  for (const auto& b : world_.blocks) initial_heights_.push_back(b.center.z);
  outcome_ = TrialOutcome{};
  outcome_.target_idx = target_;
  return observe();
}

void Episode::finish(bool blowup) {
  done_ = true;
  TrialHistory h;
  h.success = success_;
  h.blowup = blowup;
  h.max_split_early = max_split_early_;
  outcome_.success = success_ && !blowup;
  outcome_.failure = classify_failure(h, config_.reward);
  outcome_.steps = t_;
}

StepResult Episode::step(std::span<const double> raw_action) {
  if (done_) throw Error("step called on a finished episode");
  if (raw_action.size() != static_cast<std::size_t>(kNumJoints)) {
    throw ConfigError("action must have 16 entries");
  }
  const int ph = phase_of(t_, config_.schedule);
  StepRecord& rec = record_;
  rec.step = t_;
  rec.phase = ph;
  rec.observation = observe().values;

  const double beta = config_.ema ? config_.ema_beta : 1.0;
  const bool masked = ph == 3 && mask_phase3_;
  const auto& hand = world_.hand;
  JointVector targets{};
  for (int j = 0; j < kNumJoints; ++j) {
    rec.raw_action[j] = raw_action[j];
    smoothed_[j] = beta * raw_action[j] + (1.0 - beta) * smoothed_[j];
    double a = std::clamp(smoothed_[j], -config_.action_clamp, config_.action_clamp);
    if (!std::isfinite(a)) a = 0.0;
    if (masked) a = 0.0;
    rec.applied_action[j] = a;
    const double lead = config_.max_target_lead;
    targets[j] = std::clamp(hand.joint_targets[j] + a, hand.joints[j] - lead, hand.joints[j] + lead);
  }
  const BaseTarget base = override_ ? *override_
                                    : ee_waypoint(ph, t_, ref_, config_.schedule, config_.waypoints);

  StepResult res;
  try {
    physics::WorldState next = world_;
    physics::step_in_place(next, targets, base, config_.physics);
    world_ = std::move(next);
  } catch (const NumericalBlowup&) {
    rec.features = reward::RewardFeatures{};
    rec.reward = reward::RewardBreakdown{};
    rec.reward.phase = ph;
    ++t_;
    finish(true);
    res.observation.values = rec.observation;
    res.observation.layout = obs::ObservationLayout::make(config_.obs_variant);
    res.done = true;
    res.record = &rec;
    return res;
  }

  rec.features = reward::measure(world_, target_, initial_heights_, config_.physics);
  std::copy(rec.applied_action.begin(), rec.applied_action.end(), rec.features.action.begin());
  rec.reward = reward::total_reward(rec.features, ph, config_.reward, config_.weights);
  rec.blocks = world_.blocks;
  rec.hand = world_.hand;
  rec.contact_count = static_cast<int>(world_.contacts.size());
  outcome_.reward_sum += rec.reward.total;

  if (ph < 3) max_split_early_ = std::max(max_split_early_, rec.features.d_s);
  bool held = rec.features.h_target >= config_.success_height;
  for (int i = 0; i < static_cast<int>(world_.blocks.size()); ++i) {
    if (i != target_ && rec.features.other_heights[i] >= config_.other_cap) held = false;
  }
  hold_ = held ? hold_ + 1 : 0;
  if (hold_ >= config_.success_hold) success_ = true;

  ++t_;
  if (t_ >= config_.schedule.total_steps || (success_ && config_.early_termination)) {
    finish(false);
  }
  res.observation = observe();
  res.reward = rec.reward.total;
  res.done = done_;
  res.record = &rec;
  return res;
}

}  // namespace sope::env
