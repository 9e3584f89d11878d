#include "sope/encoder.hpp"

#include <cmath>

namespace sope::obs {

using physics::CornerPair;
using physics::RigidBlock;
using physics::Vec3;
using physics::WorldState;

namespace {

constexpr int kStandardDim = 44;
constexpr int kNaiveDim = 47;
constexpr int kTactileDim = 48;

// Top corners expressed relative to `origin`. The centre is shifted first so
// that translating the scene and the origin together is exact whenever the
// translation itself is exact.
CornerPair centered_keypoints(const RigidBlock& b, const Vec3& origin) {
  RigidBlock shifted = b;
  shifted.center = b.center - origin;
  return physics::block_keypoints(shifted);
}

CornerPair centered_wall(double wall_x, const WorldState& w, const Vec3& origin) {
  const Vec3 p{wall_x - origin.x, 0.0 - origin.y,
               (w.container.floor_z - origin.z) + w.container.wall_height};
  return {p, p};
}

struct CenteredNeighbours {
  CornerPair target;
  CornerPair left;
  CornerPair right;
};

CenteredNeighbours centered_neighbours(const WorldState& w, int idx, const Vec3& origin) {
  const int n = static_cast<int>(w.blocks.size());
  CenteredNeighbours out;
  out.target = centered_keypoints(w.blocks[idx], origin);
  out.left = idx > 0 ? centered_keypoints(w.blocks[idx - 1], origin)
                     : centered_wall(w.container.left_wall_x, w, origin);
  out.right = idx + 1 < n ? centered_keypoints(w.blocks[idx + 1], origin)
                          : centered_wall(w.container.right_wall_x, w, origin);
  return out;
}

void push(std::vector<double>& v, const Vec3& p) {
  v.push_back(p.x);
  v.push_back(p.y);
  v.push_back(p.z);
}

void check_target(const WorldState& w, int idx) {
  if (idx < 0 || idx >= static_cast<int>(w.blocks.size())) {
    throw ConfigError("target index out of range");
  }
}

void push_hand(std::vector<double>& v, const WorldState& w) {
  v.insert(v.end(), w.hand.joints.begin(), w.hand.joints.end());
}

void push_ee(std::vector<double>& v, const WorldState& w, int idx, const Vec3& origin) {
  const CornerPair t = centered_keypoints(w.blocks[idx], origin);
  push(v, (t.first + t.second) * 0.5);
  Vec3 ee = w.hand.base - origin;
  ee.z -= physics::kEeDrop;
  push(v, ee);
  v.push_back(w.hand.wrist);
  v.push_back(0.0);
  v.push_back(0.0);
}

// Rotation by `angle` in the x-z plane expressed as a rotation about -y.
void push_quat(std::vector<double>& v, double angle) {
  v.push_back(std::cos(0.5 * angle));
  v.push_back(0.0);
  v.push_back(-std::sin(0.5 * angle));
  v.push_back(0.0);
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kStandard:
      return "standard";
    case Variant::kNaiveBlock:
      return "naive_block";
    case Variant::kTactile:
      return "tactile";
  }
  return "standard";
}

Variant variant_from_string(const std::string& s) {
  if (s == "standard") return Variant::kStandard;
  if (s == "naive_block") return Variant::kNaiveBlock;
  if (s == "tactile") return Variant::kTactile;
  throw ConfigError("unknown observation variant: " + s);
}

ObservationLayout ObservationLayout::make(Variant v) {
  ObservationLayout l;
  l.variant = v;
  l.hand_dofs = {0, 16};
  switch (v) {
    case Variant::kStandard:
      l.block_info = {16, 34};
      l.ee_info = {34, 43};
      l.phase = {43, 44};
      l.tactile = {44, 44};
      l.total_dim = kStandardDim;
      break;
    case Variant::kNaiveBlock:
      l.block_info = {16, 37};
      l.ee_info = {37, 46};
      l.phase = {46, 47};
      l.tactile = {47, 47};
      l.total_dim = kNaiveDim;
      break;
    case Variant::kTactile:
      l.block_info = {16, 34};
      l.ee_info = {34, 43};
      l.phase = {43, 44};
      l.tactile = {44, 48};
      l.total_dim = kTactileDim;
      break;
  }
  return l;
}

Vec3 top_edge_midpoint(const RigidBlock& block) {
  const CornerPair c = physics::block_keypoints(block);
  return (c.first + c.second) * 0.5;
}

Neighbours neighbour_keypoints(const WorldState& world, int target_idx) {
  check_target(world, target_idx);
  const CenteredNeighbours c = centered_neighbours(world, target_idx, Vec3{});
  return {c.left, c.right};
}

std::array<double, 12> displacement_features(const CornerPair& target, const CornerPair& left,
                                             const CornerPair& right) {
  const Vec3 d[4] = {left.first - target.first, left.second - target.second,
                     right.first - target.first, right.second - target.second};
  std::array<double, 12> out{};
  for (int i = 0; i < 4; ++i) {
    out[3 * i] = d[i].x;
    out[3 * i + 1] = d[i].y;
    out[3 * i + 2] = d[i].z;
  }
  return out;
}

std::array<bool, physics::kNumFingers> fingertip_block_contacts(
    std::span<const physics::ContactPoint> contacts) {
  using physics::BodyKind;
  std::array<bool, physics::kNumFingers> flags{};
  for (const auto& c : contacts) {
    const bool a_tip = c.body_a.kind == BodyKind::kFingertip;
    const bool b_tip = c.body_b.kind == BodyKind::kFingertip;
    if (a_tip && c.body_b.kind == BodyKind::kBlock) flags[c.body_a.index] = true;
    if (b_tip && c.body_a.kind == BodyKind::kBlock) flags[c.body_b.index] = true;
  }
  return flags;
}

Observation encode(const WorldState& world, int target_idx, int phase, const CenteringRef& ref,
                   const ObservationLayout& layout) {
  check_target(world, target_idx);
  if (layout.variant == Variant::kNaiveBlock) {
    return encode_naive(world, target_idx, phase, ref);
  }
  if (layout.variant == Variant::kTactile) {
    return encode_tactile(world, target_idx, phase, ref, world.contacts);
  }
  Observation o;
  o.layout = layout;
  o.values.reserve(layout.total_dim);
  push_hand(o.values, world);
  const CenteredNeighbours c = centered_neighbours(world, target_idx, ref.origin);
  push(o.values, c.target.first);
  push(o.values, c.target.second);
  const auto disp = displacement_features(c.target, c.left, c.right);
  o.values.insert(o.values.end(), disp.begin(), disp.end());
  push_ee(o.values, world, target_idx, ref.origin);
  o.values.push_back(static_cast<double>(phase));
  return o;
}

Observation encode_naive(const WorldState& world, int target_idx, int phase,
                         const CenteringRef& ref) {
  check_target(world, target_idx);
  const int n = static_cast<int>(world.blocks.size());
  Observation o;
  o.layout = ObservationLayout::make(Variant::kNaiveBlock);
  o.values.reserve(o.layout.total_dim);
  push_hand(o.values, world);

  auto push_block = [&](int i) {
    push(o.values, world.blocks[i].center - ref.origin);
    push_quat(o.values, world.blocks[i].angle);
  };
  auto push_wall = [&](double x) {
    push(o.values, centered_wall(x, world, ref.origin).first);
    for (int k = 0; k < 4; ++k) o.values.push_back(0.0);
  };

  push_block(target_idx);
  if (target_idx > 0) {
    push_block(target_idx - 1);
  } else {
    push_wall(world.container.left_wall_x);
  }
  if (target_idx + 1 < n) {
    push_block(target_idx + 1);
  } else {
    push_wall(world.container.right_wall_x);
  }
  push_ee(o.values, world, target_idx, ref.origin);
  o.values.push_back(static_cast<double>(phase));
  return o;
}

Observation encode_tactile(const WorldState& world, int target_idx, int phase,
                           const CenteringRef& ref,
                           std::span<const physics::ContactPoint> contacts) {
  Observation o = encode(world, target_idx, phase, ref, ObservationLayout::make(Variant::kStandard));
  o.layout = ObservationLayout::make(Variant::kTactile);
  for (bool f : fingertip_block_contacts(contacts)) o.values.push_back(f ? 1.0 : 0.0);
  return o;
}

}  // namespace sope::obs
