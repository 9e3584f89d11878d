#include "sope/reward.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sope/encoder.hpp"

namespace sope::reward {

void RewardParams::validate() const {
  for (double v : {alpha_h, lambda_h, lambda_p, alpha_p, alpha_c, alpha_s, alpha_o}) {
    if (!(v > 0.0)) throw ConfigError("reward parameters must be positive");
  }
}

const Weights& PhaseWeights::at(int phase) const {
  if (phase < 1 || phase > 3) throw ConfigError("phase must be 1, 2 or 3");
  return rows[phase - 1];
}

void PhaseWeights::validate() const {
  for (const auto& r : rows) {
    if (r.w_s > 0.0 || r.w_o > 0.0 || r.w_a > 0.0) {
      throw ConfigError("penalty weights must be non-positive");
    }
  }
}

double height_reward(double h, const RewardParams& p) {
  return h >= 0.0 ? std::min(h, p.alpha_h) : p.lambda_h * h;
}

double proximity_reward(double sum_d, const RewardParams& p) {
  return std::exp(-p.lambda_p * std::max(sum_d, p.alpha_p));
}

double grasp_reward(int sum_c, const RewardParams& p) {
  return std::min(static_cast<double>(sum_c), p.alpha_c);
}

double split_penalty(double d_s, const RewardParams& p) { return std::max(p.alpha_s - d_s, 0.0); }

double other_blocks_penalty(std::span<const double> heights, int target_idx,
                            const RewardParams& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < heights.size(); ++i) {
    if (static_cast<int>(i) == target_idx) continue;
    if (heights[i] > p.alpha_o) s += heights[i];
  }
  return s;
}

double action_penalty(std::span<const double> action) {
  double s = 0.0;
  for (double a : action) s += a * a;
  return s;
}

double recompose(const RewardBreakdown& b, const Weights& w) {
  return w.w_h * b.r_h + w.w_p * b.r_p + w.w_g * b.r_g + w.w_s * b.p_s + w.w_o * b.p_o +
         w.w_a * b.p_a;
}

RewardBreakdown total_reward(const RewardFeatures& f, int phase, const RewardParams& p,
                             const PhaseWeights& w) {
  RewardBreakdown b;
  b.phase = phase;
  b.r_h = height_reward(f.h_target, p);
  b.r_p = proximity_reward(f.sum_d, p);
  b.r_g = grasp_reward(f.sum_c, p);
  b.p_s = split_penalty(f.d_s, p);
  b.p_o = other_blocks_penalty(f.other_heights, f.target_idx, p);
  b.p_a = action_penalty(f.action);
  b.total = recompose(b, w.at(phase));
  return b;
}

double split_distance(const physics::WorldState& world, int target_idx) {
  const physics::CornerPair t = physics::block_keypoints(world.blocks.at(target_idx));
  const obs::Neighbours nb = obs::neighbour_keypoints(world, target_idx);
  double best = std::numeric_limits<double>::infinity();
  for (const physics::CornerPair* side : {&nb.left, &nb.right}) {
    for (const physics::Vec3& a : {t.first, t.second}) {
      for (const physics::Vec3& b : {side->first, side->second}) {
        best = std::min(best, (a - b).norm());
      }
    }
  }
  return best;
}

RewardFeatures measure(const physics::WorldState& world, int target_idx,
                       std::span<const double> initial_heights,
                       const physics::PhysicsParams& params) {
  RewardFeatures f;
  f.target_idx = target_idx;
  f.other_heights.resize(world.blocks.size());
  for (std::size_t i = 0; i < world.blocks.size(); ++i) {
    f.other_heights[i] = world.blocks[i].center.z - initial_heights[i];
  }
  f.h_target = f.other_heights[target_idx];

  const physics::Vec3 c = world.blocks[target_idx].center;
  for (const auto& tip : physics::fk_fingertips(world.hand, params)) f.sum_d += (tip - c).norm();

  std::array<bool, physics::kNumFingers> touching{};
  for (const auto& ct : world.contacts) {
    using physics::BodyKind;
    if (ct.body_a.kind == BodyKind::kBlock && ct.body_a.index == target_idx &&
        ct.body_b.kind == BodyKind::kFingertip) {
      touching[ct.body_b.index] = true;
    }
    if (ct.body_b.kind == BodyKind::kBlock && ct.body_b.index == target_idx &&
        ct.body_a.kind == BodyKind::kFingertip) {
      touching[ct.body_a.index] = true;
    }
  }
  for (bool t : touching) f.sum_c += t ? 1 : 0;
  f.d_s = split_distance(world, target_idx);
  return f;
}

}  // namespace sope::reward
