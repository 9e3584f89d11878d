#pragma once

// Planar rigid-body world: upright blocks in a box, a 16-DOF four-finger hand.
// Motion happens in the x (along the block row) / z (vertical) plane; every
// position is carried as a Vec3 with the depth coordinate y pinned to 0.

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "sope/errors.hpp"

namespace sope::physics {

inline constexpr int kNumFingers = 4;
inline constexpr int kJointsPerFinger = 4;
inline constexpr int kNumJoints = kNumFingers * kJointsPerFinger;

using JointVector = std::array<double, kNumJoints>;

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  constexpr Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  constexpr Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  constexpr Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
  constexpr Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  constexpr bool operator==(const Vec3&) const = default;

  double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  double norm() const { return std::sqrt(dot(*this)); }
};

// The hand's end-effector reference sits at a constant offset from the
// finger base, between the mounts and the resting fingertips.
inline constexpr double kEeDrop = 0.05;

struct RigidBlock {
  Vec3 center;
  double half_x = 0.015;  // half thickness along the row
  double half_z = 0.075;  // half height
  double angle = 0.0;     // counter-clockwise in the x-z plane, wrapped to (-pi, pi]
  double vel_x = 0.0;
  double vel_z = 0.0;
  double ang_vel = 0.0;
  double mass = 0.05;
  int id = 0;

  double inertia() const {
    const double w = 2.0 * half_x;
    const double h = 2.0 * half_z;
    return mass * (w * w + h * h) / 12.0;
  }
};

// Foam-like layer lining both end walls. The compliant face sits `offset`
// inside the rigid wall; anything pressing past the face feels `stiffness`.
struct WallInserts {
  double left_offset = 0.0;
  double right_offset = 0.0;
  double stiffness = 2000.0;
};

struct Container {
  double interior_length = 0.26;
  double wall_height = 0.175;
  double floor_z = 0.0;
  double left_wall_x = 0.0;
  double right_wall_x = 0.26;
  std::optional<WallInserts> inserts;

  static Container make(double length, double wall_height);
};

struct HandState {
  Vec3 base;                // wrist / palm reference point, finger mounts hang from it
  double wrist = 0.0;       // in-plane wrist rotation
  Vec3 base_vel;            // kinematic, set by the base controller
  double wrist_vel = 0.0;
  JointVector joints{};     // finger-major: joint j of finger f at 4 * f + j
  JointVector joint_vel{};
  JointVector joint_targets{};
};

enum class BodyKind : std::uint8_t {
  kBlock,
  kFloor,
  kLeftWall,
  kRightWall,
  kLeftInsert,
  kRightInsert,
  kFingertip,
};

struct BodyId {
  BodyKind kind = BodyKind::kFloor;
  int index = 0;
  constexpr bool operator==(const BodyId&) const = default;
};

// Force is exerted on body_b along +normal, on body_a along -normal.
struct ContactPoint {
  BodyId body_a;
  BodyId body_b;
  Vec3 point;
  Vec3 normal;
  double penetration = 0.0;
  double normal_force = 0.0;
  double tangent_force = 0.0;
};

struct PhysicsParams {
  double gravity = 9.81;
  int substeps = 60;
  double dt = 1.0 / 1200.0;
  int contact_iterations = 4;
  double contact_stiffness = 5000.0;
  double contact_damping = 50.0;
  double friction = 0.6;
  double tip_radius = 0.006;
  std::array<double, 4> link_lengths{0.05, 0.04, 0.03, 0.02};
  std::array<double, kNumFingers> mount_x{-0.045, -0.015, 0.015, 0.045};
  double joint_kp = 3.0;
  double joint_kd = 0.08;
  double joint_inertia = 5e-4;
  double joint_min = -2.0;
  double joint_max = 2.0;
  double base_max_speed = 0.6;   // m/s
  double base_max_accel = 8.0;   // m/s^2
  double wrist_max_speed = 2.0;  // rad/s
  double blowup_position = 10.0;
  double blowup_velocity = 100.0;

  double control_period() const { return substeps * dt; }
  // Throws ConfigError when the params cannot describe a 20 Hz controller.
  void validate() const;
};

struct WorldState {
  std::vector<RigidBlock> blocks;
  Container container;
  HandState hand;
  std::vector<ContactPoint> contacts;  // from the last substep
  double time = 0.0;
};

struct BaseTarget {
  Vec3 position;
  double wrist = 0.0;
};

using Fingertips = std::array<Vec3, kNumFingers>;
using CornerPair = std::pair<Vec3, Vec3>;

// Tip centres of the four planar chains. Joint angles are measured from
// straight down, positive toward +x, and accumulate along the chain.
Fingertips fk_fingertips(const HandState& hand, const PhysicsParams& params);

// d tip / d joint for one finger, columns in chain order, in world x/z.
std::array<std::array<double, 2>, kJointsPerFinger> fingertip_jacobian(
    const HandState& hand, const PhysicsParams& params, int finger);

// The two corners with the largest body-frame z, ordered by world x
// (near-ties go to the lower corner first).
CornerPair block_keypoints(const RigidBlock& block);

// Virtual keypoint above a wall: both entries identical.
CornerPair wall_keypoints(double wall_x, double virtual_height);

// Contact detection plus the explicit penalty law
// normal = max(0, k * penetration + c * closing speed); the tangent entry is
// the Coulomb-limited force that would stop sliding within one substep.
std::vector<ContactPoint> resolve_contacts(const WorldState& world,
                                           const PhysicsParams& params);

// One control period. Joints follow a PD law toward `joint_targets`
// (clamped into limits), the base tracks `base_target` under speed and
// acceleration caps,
// blocks integrate with semi-implicit Euler. Throws NumericalBlowup.
WorldState step(const WorldState& world, const JointVector& joint_targets,
                const BaseTarget& base_target, const PhysicsParams& params);

// Same, in place. Useful for settling loops.
void step_in_place(WorldState& world, const JointVector& joint_targets,
                   const BaseTarget& base_target, const PhysicsParams& params);

// Runs `count` raw substeps with the current targets; used to settle blocks.
void substep_n(WorldState& world, const BaseTarget& base_target,
               const PhysicsParams& params, int count);

double wrap_angle(double a);

}  // namespace sope::physics
