#pragma once

// Policy observations: hand joints, target keypoints with displacements to
// the neighbouring keypoints, end-effector information, and the phase index.
// Everything positional is expressed relative to a reference point fixed at
// reset (the target's initial top-edge midpoint).

#include <array>
#include <span>
#include <string>
#include <vector>

#include "sope/physics.hpp"

namespace sope::obs {

enum class Variant { kStandard, kNaiveBlock, kTactile };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);  // throws ConfigError

struct Segment {
  int begin = 0;
  int end = 0;
  int size() const { return end - begin; }
};

struct ObservationLayout {
  Variant variant = Variant::kStandard;
  int total_dim = 44;
  Segment hand_dofs;
  Segment block_info;
  Segment ee_info;
  Segment phase;
  Segment tactile;  // empty unless variant == kTactile

  static ObservationLayout make(Variant v);
};

struct Observation {
  std::vector<double> values;
  ObservationLayout layout;
};

struct CenteringRef {
  physics::Vec3 origin;
};

// Midpoint of the two top corners.
physics::Vec3 top_edge_midpoint(const physics::RigidBlock& block);

// Keypoints of the neighbour on each side of `target_idx` (a block or the
// virtual points above the wall), in world coordinates.
struct Neighbours {
  physics::CornerPair left;
  physics::CornerPair right;
};
Neighbours neighbour_keypoints(const physics::WorldState& world, int target_idx);

// [left1 - t1, left2 - t2, right1 - t1, right2 - t2]
std::array<double, 12> displacement_features(const physics::CornerPair& target,
                                             const physics::CornerPair& left,
                                             const physics::CornerPair& right);

// Fingertip i touches some block.
std::array<bool, physics::kNumFingers> fingertip_block_contacts(
    std::span<const physics::ContactPoint> contacts);

Observation encode(const physics::WorldState& world, int target_idx, int phase,
                   const CenteringRef& ref, const ObservationLayout& layout);

Observation encode_naive(const physics::WorldState& world, int target_idx, int phase,
                         const CenteringRef& ref);

Observation encode_tactile(const physics::WorldState& world, int target_idx, int phase,
                           const CenteringRef& ref,
                           std::span<const physics::ContactPoint> contacts);

}  // namespace sope::obs
