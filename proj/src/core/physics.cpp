#include "sope/physics.hpp"

#include <algorithm>
#include <numbers>
#include <string>

namespace sope::physics {
namespace {

struct Vec2 {
  double x = 0.0;
  double z = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.z + b.z}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.z - b.z}; }
inline Vec2 operator*(Vec2 a, double s) { return {a.x * s, a.z * s}; }
inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.z * b.z; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.z - a.z * b.x; }
inline Vec2 flat(const Vec3& v) { return {v.x, v.z}; }
inline Vec3 lift(Vec2 v) { return {v.x, 0.0, v.z}; }

// Counter-clockwise rotation in the x-z plane.
inline Vec2 rotate(Vec2 v, double c, double s) {
  return {v.x * c - v.z * s, v.x * s + v.z * c};
}

struct Box {
  Vec2 p;
  Vec2 u;  // body x axis in world
  Vec2 v;  // body z axis in world
  double hx = 0.0;
  double hz = 0.0;
};

Box make_box(const RigidBlock& b) {
  const double c = std::cos(b.angle);
  const double s = std::sin(b.angle);
  return {{b.center.x, b.center.z}, {c, s}, {-s, c}, b.half_x, b.half_z};
}

Vec2 box_corner(const Box& b, double sx, double sz) {
  return b.p + b.u * (sx * b.hx) + b.v * (sz * b.hz);
}

// Detected overlap before any force law is applied.
struct RawContact {
  BodyId a;
  BodyId b;
  Vec2 point;
  Vec2 normal;  // from a toward b
  double penetration = 0.0;
  double stiffness = 0.0;
};

struct FingerCache {
  Vec2 tip;
  std::array<Vec2, kJointsPerFinger> jac;
};

void finger_chain(const HandState& hand, const PhysicsParams& params,
                  int finger, FingerCache& out) {
  const double cw = std::cos(hand.wrist);
  const double sw = std::sin(hand.wrist);
  const Vec2 mount = flat(hand.base) + rotate({params.mount_x[finger], 0.0}, cw, sw);
  std::array<Vec2, kJointsPerFinger> seg{};
  double psi = hand.wrist;
  Vec2 tip = mount;
  for (int k = 0; k < kJointsPerFinger; ++k) {
    psi += hand.joints[kJointsPerFinger * finger + k];
    const double len = params.link_lengths[k];
    const double sp = std::sin(psi);
    const double cp = std::cos(psi);
    tip = tip + Vec2{len * sp, -len * cp};
    seg[k] = {len * cp, len * sp};  // d(link end)/d(psi)
  }
  Vec2 acc{};
  for (int k = kJointsPerFinger - 1; k >= 0; --k) {
    acc = acc + seg[k];
    out.jac[k] = acc;
  }
  out.tip = tip;
}

void box_vs_box(const Box& a, const Box& b, int ia, int ib,
                const PhysicsParams& params, std::vector<RawContact>& out) {
  const Vec2 d = b.p - a.p;
  // Cheap bounding-circle reject.
  const double ra = a.hx + a.hz;
  const double rb = b.hx + b.hz;
  if (dot(d, d) > (ra + rb) * (ra + rb)) return;

  const Vec2 da{dot(d, a.u), dot(d, a.v)};
  const Vec2 db{dot(d, b.u), dot(d, b.v)};
  const double c00 = std::abs(dot(a.u, b.u));
  const double c01 = std::abs(dot(a.u, b.v));
  const double c10 = std::abs(dot(a.v, b.u));
  const double c11 = std::abs(dot(a.v, b.v));

  const double face_ax = std::abs(da.x) - a.hx - (c00 * b.hx + c01 * b.hz);
  const double face_az = std::abs(da.z) - a.hz - (c10 * b.hx + c11 * b.hz);
  if (face_ax > 0.0 || face_az > 0.0) return;
  const double face_bx = std::abs(db.x) - (c00 * a.hx + c10 * a.hz) - b.hx;
  const double face_bz = std::abs(db.z) - (c01 * a.hx + c11 * a.hz) - b.hz;
  if (face_bx > 0.0 || face_bz > 0.0) return;

  // Least-penetration axis, biased toward faces of `a` for coherence.
  constexpr double kRelTol = 0.95;
  constexpr double kAbsTol = 0.01;
  enum Axis { kAx, kAz, kBx, kBz } axis = kAx;
  double sep = face_ax;
  Vec2 n = da.x > 0.0 ? a.u : a.u * -1.0;
  if (face_az > kRelTol * sep + kAbsTol * a.hz) {
    axis = kAz;
    sep = face_az;
    n = da.z > 0.0 ? a.v : a.v * -1.0;
  }
  if (face_bx > kRelTol * sep + kAbsTol * b.hx) {
    axis = kBx;
    sep = face_bx;
    n = db.x > 0.0 ? b.u : b.u * -1.0;
  }
  if (face_bz > kRelTol * sep + kAbsTol * b.hz) {
    axis = kBz;
    sep = face_bz;
    n = db.z > 0.0 ? b.v : b.v * -1.0;
  }

  // n points from a to b. Reference face belongs to the box owning the axis.
  const bool ref_is_a = axis == kAx || axis == kAz;
  const Box& ref = ref_is_a ? a : b;
  const Box& inc = ref_is_a ? b : a;
  const Vec2 nr = ref_is_a ? n : n * -1.0;  // outward from the reference box
  const bool ref_x = axis == kAx || axis == kBx;
  const double h_normal = ref_x ? ref.hx : ref.hz;
  const double h_side = ref_x ? ref.hz : ref.hx;
  const Vec2 side = ref_x ? ref.v : ref.u;
  const double front = dot(nr, ref.p) + h_normal;
  const double side_center = dot(side, ref.p);

  // Incident face: the face of `inc` most anti-parallel to nr.
  const double cx = dot(nr, inc.u);
  const double cz = dot(nr, inc.v);
  Vec2 v1, v2;
  if (std::abs(cx) > std::abs(cz)) {
    const double sx = cx > 0.0 ? -1.0 : 1.0;
    v1 = box_corner(inc, sx, -1.0);
    v2 = box_corner(inc, sx, 1.0);
  } else {
    const double sz = cz > 0.0 ? -1.0 : 1.0;
    v1 = box_corner(inc, -1.0, sz);
    v2 = box_corner(inc, 1.0, sz);
  }

  // Clip the incident segment against both side planes of the reference face.
  auto clip = [](Vec2& p, Vec2& q, Vec2 normal, double offset) -> bool {
    const double dp = dot(normal, p) - offset;
    const double dq = dot(normal, q) - offset;
    if (dp > 0.0 && dq > 0.0) return false;
    if (dp > 0.0) {
      p = p + (q - p) * (dp / (dp - dq));
    } else if (dq > 0.0) {
      q = q + (p - q) * (dq / (dq - dp));
    }
    return true;
  };
  if (!clip(v1, v2, side, side_center + h_side)) return;
  if (!clip(v1, v2, side * -1.0, -side_center + h_side)) return;

  for (const Vec2& v : {v1, v2}) {
    const double s = dot(nr, v) - front;
    if (s > 0.0) continue;
    RawContact c;
    c.a = {BodyKind::kBlock, ia};
    c.b = {BodyKind::kBlock, ib};
    c.point = v + nr * (-0.5 * s);
    c.normal = n;
    c.penetration = -s;
    c.stiffness = params.contact_stiffness;
    out.push_back(c);
  }
}

void box_vs_container(const Box& box, int index, const Container& cont,
                      const PhysicsParams& params, std::vector<RawContact>& out) {
  const BodyId self{BodyKind::kBlock, index};
  for (double sx : {-1.0, 1.0}) {
    for (double sz : {-1.0, 1.0}) {
      const Vec2 c = box_corner(box, sx, sz);
      if (c.z < cont.floor_z) {
        out.push_back({{BodyKind::kFloor, 0}, self, c, {0.0, 1.0}, cont.floor_z - c.z,
                       params.contact_stiffness});
      }
      if (c.z > cont.floor_z + cont.wall_height) continue;
      if (c.x < cont.left_wall_x) {
        out.push_back({{BodyKind::kLeftWall, 0}, self, c, {1.0, 0.0}, cont.left_wall_x - c.x,
                       params.contact_stiffness});
      }
      if (c.x > cont.right_wall_x) {
        out.push_back({{BodyKind::kRightWall, 0}, self, c, {-1.0, 0.0},
                       c.x - cont.right_wall_x, params.contact_stiffness});
      }
      if (cont.inserts) {
        const double lf = cont.left_wall_x + cont.inserts->left_offset;
        const double rf = cont.right_wall_x - cont.inserts->right_offset;
        if (c.x < lf) {
          out.push_back({{BodyKind::kLeftInsert, 0}, self, c, {1.0, 0.0}, lf - c.x,
                         cont.inserts->stiffness});
        }
        if (c.x > rf) {
          out.push_back({{BodyKind::kRightInsert, 0}, self, c, {-1.0, 0.0}, c.x - rf,
                         cont.inserts->stiffness});
        }
      }
    }
  }
}

void tip_vs_box(Vec2 tip, int finger, const Box& box, int index,
                const PhysicsParams& params, std::vector<RawContact>& out) {
  const double r = params.tip_radius;
  const Vec2 d = tip - box.p;
  const double reach = box.hx + box.hz + r;
  if (dot(d, d) > reach * reach) return;
  const Vec2 local{dot(d, box.u), dot(d, box.v)};
  const Vec2 closest{std::clamp(local.x, -box.hx, box.hx), std::clamp(local.z, -box.hz, box.hz)};
  const Vec2 off = local - closest;
  const double dist2 = dot(off, off);
  Vec2 n_local;
  Vec2 p_local;
  double pen = 0.0;
  if (dist2 > 1e-24) {
    if (dist2 >= r * r) return;
    const double dist = std::sqrt(dist2);
    n_local = off * (1.0 / dist);
    p_local = closest;
    pen = r - dist;
  } else {
    // Centre inside the box: push out through the nearest face.
    const double dx = box.hx - std::abs(local.x);
    const double dz = box.hz - std::abs(local.z);
    if (dx < dz) {
      const double sx = local.x >= 0.0 ? 1.0 : -1.0;
      n_local = {sx, 0.0};
      p_local = {sx * box.hx, local.z};
      pen = r + dx;
    } else {
      const double sz = local.z >= 0.0 ? 1.0 : -1.0;
      n_local = {0.0, sz};
      p_local = {local.x, sz * box.hz};
      pen = r + dz;
    }
  }
  RawContact c;
  c.a = {BodyKind::kBlock, index};
  c.b = {BodyKind::kFingertip, finger};
  c.normal = box.u * n_local.x + box.v * n_local.z;
  c.point = box.p + box.u * p_local.x + box.v * p_local.z;
  c.penetration = pen;
  c.stiffness = params.contact_stiffness;
  out.push_back(c);
}

void tip_vs_container(Vec2 tip, int finger, const Container& cont,
                      const PhysicsParams& params, std::vector<RawContact>& out) {
  const double r = params.tip_radius;
  const BodyId self{BodyKind::kFingertip, finger};
  if (tip.z - r < cont.floor_z) {
    out.push_back({{BodyKind::kFloor, 0}, self, {tip.x, cont.floor_z}, {0.0, 1.0},
                   cont.floor_z - (tip.z - r), params.contact_stiffness});
  }
  if (tip.z > cont.floor_z + cont.wall_height) return;
  if (tip.x - r < cont.left_wall_x) {
    out.push_back({{BodyKind::kLeftWall, 0}, self, {cont.left_wall_x, tip.z}, {1.0, 0.0},
                   cont.left_wall_x - (tip.x - r), params.contact_stiffness});
  }
  if (tip.x + r > cont.right_wall_x) {
    out.push_back({{BodyKind::kRightWall, 0}, self, {cont.right_wall_x, tip.z}, {-1.0, 0.0},
                   tip.x + r - cont.right_wall_x, params.contact_stiffness});
  }
  if (cont.inserts) {
    const double lf = cont.left_wall_x + cont.inserts->left_offset;
    const double rf = cont.right_wall_x - cont.inserts->right_offset;
    if (tip.x - r < lf) {
      out.push_back({{BodyKind::kLeftInsert, 0}, self, {lf, tip.z}, {1.0, 0.0},
                     lf - (tip.x - r), cont.inserts->stiffness});
    }
    if (tip.x + r > rf) {
      out.push_back({{BodyKind::kRightInsert, 0}, self, {rf, tip.z}, {-1.0, 0.0},
                     tip.x + r - rf, cont.inserts->stiffness});
    }
  }
}

void detect(const WorldState& w, const PhysicsParams& params,
            const std::array<FingerCache, kNumFingers>& fingers,
            std::vector<Box>& boxes, std::vector<RawContact>& out) {
  out.clear();
  boxes.clear();
  for (const auto& b : w.blocks) boxes.push_back(make_box(b));
  const int n = static_cast<int>(boxes.size());
  for (int i = 0; i < n; ++i) box_vs_container(boxes[i], i, w.container, params, out);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) box_vs_box(boxes[i], boxes[j], i, j, params, out);
  }
  for (int f = 0; f < kNumFingers; ++f) {
    for (int i = 0; i < n; ++i) tip_vs_box(fingers[f].tip, f, boxes[i], i, params, out);
    tip_vs_container(fingers[f].tip, f, w.container, params, out);
  }
}

// Velocity bookkeeping over the participants of a contact.
class Dynamics {
 public:
  Dynamics(WorldState& w, const PhysicsParams& params,
           const std::array<FingerCache, kNumFingers>& fingers)
      : w_(w), params_(params), fingers_(fingers) {}

  Vec2 velocity(BodyId id, Vec2 point) const {
    switch (id.kind) {
      case BodyKind::kBlock: {
        const RigidBlock& b = w_.blocks[id.index];
        const Vec2 r = point - Vec2{b.center.x, b.center.z};
        return {b.vel_x - b.ang_vel * r.z, b.vel_z + b.ang_vel * r.x};
      }
      case BodyKind::kFingertip: {
        const HandState& h = w_.hand;
        const Vec2 r = point - flat(h.base);
        Vec2 v{h.base_vel.x - h.wrist_vel * r.z, h.base_vel.z + h.wrist_vel * r.x};
        const auto& jac = fingers_[id.index].jac;
        for (int k = 0; k < kJointsPerFinger; ++k) {
          v = v + jac[k] * h.joint_vel[kJointsPerFinger * id.index + k];
        }
        return v;
      }
      default:
        return {};
    }
  }

  double inverse_mass(BodyId id, Vec2 point, Vec2 dir) const {
    switch (id.kind) {
      case BodyKind::kBlock: {
        const RigidBlock& b = w_.blocks[id.index];
        const Vec2 r = point - Vec2{b.center.x, b.center.z};
        const double rn = cross(r, dir);
        return 1.0 / b.mass + rn * rn / b.inertia();
      }
      case BodyKind::kFingertip: {
        double acc = 0.0;
        for (const Vec2& col : fingers_[id.index].jac) {
          const double p = dot(col, dir);
          acc += p * p;
        }
        return acc / params_.joint_inertia;
      }
      default:
        return 0.0;
    }
  }

  void apply(BodyId id, Vec2 point, Vec2 impulse) {
    switch (id.kind) {
      case BodyKind::kBlock: {
        RigidBlock& b = w_.blocks[id.index];
        const Vec2 r = point - Vec2{b.center.x, b.center.z};
        b.vel_x += impulse.x / b.mass;
        b.vel_z += impulse.z / b.mass;
        b.ang_vel += cross(r, impulse) / b.inertia();
        break;
      }
      case BodyKind::kFingertip: {
        const auto& jac = fingers_[id.index].jac;
        for (int k = 0; k < kJointsPerFinger; ++k) {
          w_.hand.joint_vel[kJointsPerFinger * id.index + k] +=
              dot(jac[k], impulse) / params_.joint_inertia;
        }
        break;
      }
      default:
        break;
    }
  }

 private:
  WorldState& w_;
  const PhysicsParams& params_;
  const std::array<FingerCache, kNumFingers>& fingers_;
};

struct SolverRow {
  double w_n = 0.0;
  double w_t = 0.0;
  double jn = 0.0;
  double jt = 0.0;
};

struct Scratch {
  std::vector<Box> boxes;
  std::vector<RawContact> raw;
  std::vector<SolverRow> solve;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

void check_finite(const WorldState& w, const PhysicsParams& p) {
  auto bad_pos = [&](double v) { return !std::isfinite(v) || std::abs(v) > p.blowup_position; };
  auto bad_vel = [&](double v) { return !std::isfinite(v) || std::abs(v) > p.blowup_velocity; };
  for (const auto& b : w.blocks) {
    if (bad_pos(b.center.x) || bad_pos(b.center.z) || bad_vel(b.vel_x) || bad_vel(b.vel_z) ||
        bad_vel(b.ang_vel)) {
      throw NumericalBlowup("block " + std::to_string(b.id) + " left the stable envelope");
    }
  }
  const HandState& h = w.hand;
  if (bad_pos(h.base.x) || bad_pos(h.base.z)) throw NumericalBlowup("hand base diverged");
  for (int j = 0; j < kNumJoints; ++j) {
    if (!std::isfinite(h.joints[j]) || bad_vel(h.joint_vel[j])) {
      throw NumericalBlowup("joint " + std::to_string(j) + " diverged");
    }
  }
}

void substep(WorldState& w, const BaseTarget& target, const PhysicsParams& params,
             double time_left) {
  const double dt = params.dt;
  HandState& hand = w.hand;

  // Kinematic base: spread the remaining travel over the rest of the control
  // period, under speed, stopping-distance and acceleration limits.
  {
    const Vec2 d = flat(target.position) - flat(hand.base);
    const double dist = std::sqrt(dot(d, d));
    Vec2 want{};
    if (dist > 0.0) {
      const double speed = std::min({dist / std::max(time_left, dt), params.base_max_speed,
                                     std::sqrt(2.0 * params.base_max_accel * dist)});
      want = d * (speed / dist);
    }
    const Vec2 dv = want - flat(hand.base_vel);
    const double dv_len = std::sqrt(dot(dv, dv));
    const double dv_max = params.base_max_accel * dt;
    const Vec2 v = dv_len > dv_max ? flat(hand.base_vel) + dv * (dv_max / dv_len) : want;
    hand.base_vel = lift(v);
    hand.wrist_vel = std::clamp((target.wrist - hand.wrist) / std::max(time_left, dt),
                                -params.wrist_max_speed, params.wrist_max_speed);
  }

  // Joint PD, implicit in both gains.
  {
    const double inv_i = 1.0 / params.joint_inertia;
    const double denom = 1.0 + dt * params.joint_kd * inv_i + dt * dt * params.joint_kp * inv_i;
    for (int j = 0; j < kNumJoints; ++j) {
      const double tau = params.joint_kp * (hand.joint_targets[j] - hand.joints[j]);
      hand.joint_vel[j] = (hand.joint_vel[j] + dt * inv_i * tau) / denom;
    }
  }

  for (auto& b : w.blocks) b.vel_z -= params.gravity * dt;

  std::array<FingerCache, kNumFingers> fingers;
  for (int f = 0; f < kNumFingers; ++f) finger_chain(hand, params, f, fingers[f]);

  Scratch& s = scratch();
  detect(w, params, fingers, s.boxes, s.raw);

  // Penalty impulses with damping treated implicitly along the normal,
  // solved as accumulated impulses so that every contact satisfies
  // j = dt (k pen - c v_n+) against its final velocity v_n+, with
  // Coulomb-clamped friction on top.
  Dynamics dyn(w, params, fingers);
  const double c_n = params.contact_damping;
  s.solve.resize(s.raw.size());
  for (std::size_t i = 0; i < s.raw.size(); ++i) {
    const RawContact& rc = s.raw[i];
    const Vec2 n = rc.normal;
    const Vec2 t{-n.z, n.x};
    SolverRow& row = s.solve[i];
    row.w_n = dyn.inverse_mass(rc.a, rc.point, n) + dyn.inverse_mass(rc.b, rc.point, n);
    row.w_t = dyn.inverse_mass(rc.a, rc.point, t) + dyn.inverse_mass(rc.b, rc.point, t);
    row.jn = 0.0;
    row.jt = 0.0;
  }
  for (int it = 0; it < params.contact_iterations; ++it) {
    for (std::size_t i = 0; i < s.raw.size(); ++i) {
      const RawContact& rc = s.raw[i];
      SolverRow& row = s.solve[i];
      if (row.w_n <= 0.0) continue;
      const Vec2 n = rc.normal;
      const double v_n = dot(dyn.velocity(rc.b, rc.point) - dyn.velocity(rc.a, rc.point), n);
      const double cdw = c_n * dt * row.w_n;
      double jn = (dt * (rc.stiffness * rc.penetration - c_n * v_n) + cdw * row.jn) / (1.0 + cdw);
      jn = std::max(jn, 0.0);
      const double dn = jn - row.jn;
      row.jn = jn;
      dyn.apply(rc.b, rc.point, n * dn);
      dyn.apply(rc.a, rc.point, n * -dn);

      if (row.w_t <= 0.0) continue;
      const Vec2 t{-n.z, n.x};
      const double v_t = dot(dyn.velocity(rc.b, rc.point) - dyn.velocity(rc.a, rc.point), t);
      const double limit = params.friction * row.jn;
      const double jt = std::clamp(row.jt - v_t / row.w_t, -limit, limit);
      const double dtan = jt - row.jt;
      row.jt = jt;
      dyn.apply(rc.b, rc.point, t * dtan);
      dyn.apply(rc.a, rc.point, t * -dtan);
    }
  }
  w.contacts.clear();
  for (std::size_t i = 0; i < s.raw.size(); ++i) {
    const RawContact& rc = s.raw[i];
    w.contacts.push_back({rc.a, rc.b, lift(rc.point), lift(rc.normal), rc.penetration,
                          s.solve[i].jn / dt, s.solve[i].jt / dt});
  }

  // Integrate positions.
  hand.base.x += hand.base_vel.x * dt;
  hand.base.z += hand.base_vel.z * dt;
  hand.wrist += hand.wrist_vel * dt;
  for (int j = 0; j < kNumJoints; ++j) {
    double q = hand.joints[j] + hand.joint_vel[j] * dt;
    if (q < params.joint_min) {
      q = params.joint_min;
      hand.joint_vel[j] = std::max(hand.joint_vel[j], 0.0);
    } else if (q > params.joint_max) {
      q = params.joint_max;
      hand.joint_vel[j] = std::min(hand.joint_vel[j], 0.0);
    }
    hand.joints[j] = q;
  }
  for (auto& b : w.blocks) {
    b.center.x += b.vel_x * dt;
    b.center.z += b.vel_z * dt;
    b.angle = wrap_angle(b.angle + b.ang_vel * dt);
  }
  w.time += dt;
  check_finite(w, params);
}

}  // namespace

Container Container::make(double length, double wall_height) {
  Container c;
  c.interior_length = length;
  c.wall_height = wall_height;
  c.floor_z = 0.0;
  c.left_wall_x = 0.0;
  c.right_wall_x = length;
  return c;
}

void PhysicsParams::validate() const {
  if (substeps <= 0 || !(dt > 0.0) || contact_iterations <= 0) throw ConfigError("physics: substeps and dt must be positive");
  if (std::abs(substeps * dt - 0.05) > 1e-12) {
    throw ConfigError("physics: substeps * dt must equal the 0.05 s control period");
  }
  if (!(contact_stiffness > 0.0) || contact_damping < 0.0 || friction < 0.0) {
    throw ConfigError("physics: contact constants out of range");
  }
  if (!(tip_radius > 0.0) || !(joint_inertia > 0.0) || !(joint_max > joint_min)) {
    throw ConfigError("physics: hand constants out of range");
  }
  for (double l : link_lengths) {
    if (!(l > 0.0)) throw ConfigError("physics: link lengths must be positive");
  }
}

double wrap_angle(double a) {
  constexpr double kPi = std::numbers::pi;
  if (a > kPi || a <= -kPi) {
    a = std::remainder(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
  }
  return a;
}

Fingertips fk_fingertips(const HandState& hand, const PhysicsParams& params) {
  Fingertips tips;
  FingerCache cache;
  for (int f = 0; f < kNumFingers; ++f) {
    finger_chain(hand, params, f, cache);
    tips[f] = lift(cache.tip);
  }
  return tips;
}

std::array<std::array<double, 2>, kJointsPerFinger> fingertip_jacobian(
    const HandState& hand, const PhysicsParams& params, int finger) {
  FingerCache cache;
  finger_chain(hand, params, finger, cache);
  std::array<std::array<double, 2>, kJointsPerFinger> out{};
  for (int k = 0; k < kJointsPerFinger; ++k) out[k] = {cache.jac[k].x, cache.jac[k].z};
  return out;
}

CornerPair block_keypoints(const RigidBlock& block) {
  const double c = std::cos(block.angle);
  const double s = std::sin(block.angle);
  const Vec2 centre{block.center.x, block.center.z};
  Vec2 p = centre + rotate({-block.half_x, block.half_z}, c, s);
  Vec2 q = centre + rotate({block.half_x, block.half_z}, c, s);
  constexpr double kTie = 1e-12;
  const bool swap = std::abs(p.x - q.x) <= kTie ? q.z < p.z : q.x < p.x;
  if (swap) std::swap(p, q);
  return {lift(p), lift(q)};
}

CornerPair wall_keypoints(double wall_x, double virtual_height) {
  const Vec3 v{wall_x, 0.0, virtual_height};
  return {v, v};
}

std::vector<ContactPoint> resolve_contacts(const WorldState& world, const PhysicsParams& params) {
  std::array<FingerCache, kNumFingers> fingers;
  for (int f = 0; f < kNumFingers; ++f) finger_chain(world.hand, params, f, fingers[f]);
  std::vector<Box> boxes;
  std::vector<RawContact> raw;
  detect(world, params, fingers, boxes, raw);

  // Dynamics only reads here; the const_cast never leads to a write.
  Dynamics dyn(const_cast<WorldState&>(world), params, fingers);
  std::vector<ContactPoint> out;
  out.reserve(raw.size());
  for (const RawContact& rc : raw) {
    const Vec2 n = rc.normal;
    const Vec2 v_rel = dyn.velocity(rc.b, rc.point) - dyn.velocity(rc.a, rc.point);
    const double closing = -dot(v_rel, n);
    const double fn =
        std::max(0.0, rc.stiffness * rc.penetration + params.contact_damping * closing);
    const Vec2 t{-n.z, n.x};
    const double w_t = dyn.inverse_mass(rc.a, rc.point, t) + dyn.inverse_mass(rc.b, rc.point, t);
    double ft = 0.0;
    if (w_t > 0.0) {
      const double limit = params.friction * fn;
      ft = std::clamp(-dot(v_rel, t) / (w_t * params.dt), -limit, limit);
    }
    out.push_back({rc.a, rc.b, lift(rc.point), lift(n), rc.penetration, fn, ft});
  }
  return out;
}

void substep_n(WorldState& world, const BaseTarget& base_target, const PhysicsParams& params,
               int count) {
  for (int i = 0; i < count; ++i) substep(world, base_target, params, (count - i) * params.dt);
}

void step_in_place(WorldState& world, const JointVector& joint_targets,
                   const BaseTarget& base_target, const PhysicsParams& params) {
  for (int j = 0; j < kNumJoints; ++j) {
    if (!std::isfinite(joint_targets[j])) throw NumericalBlowup("non-finite joint target");
    world.hand.joint_targets[j] = std::clamp(joint_targets[j], params.joint_min, params.joint_max);
  }
  if (!std::isfinite(base_target.position.x) || !std::isfinite(base_target.position.z) ||
      !std::isfinite(base_target.wrist)) {
    throw NumericalBlowup("non-finite base target");
  }
  substep_n(world, base_target, params, params.substeps);
}

WorldState step(const WorldState& world, const JointVector& joint_targets,
                const BaseTarget& base_target, const PhysicsParams& params) {
  WorldState next = world;
  step_in_place(next, joint_targets, base_target, params);
  return next;
}

}  // namespace sope::physics
