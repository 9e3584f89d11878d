#pragma once

// Scene builders shared by the unit and acceptance tests.

#include <vector>

#include "sope/physics.hpp"

namespace sope::fixture {

// Row of upright blocks on the floor, hand parked well above the box.
inline physics::WorldState row_world(int n, double gap, double length = 0.0) {
  physics::WorldState w;
  const double hx = 0.015;
  const double row = n * 2.0 * hx + (n - 1) * gap;
  if (length <= 0.0) length = row + 0.06;
  w.container = physics::Container::make(length, 0.175);
  double x = 0.5 * (length - row) + hx;
  for (int i = 0; i < n; ++i) {
    physics::RigidBlock b;
    b.center = {x, 0.0, 0.075};
    b.id = i;
    w.blocks.push_back(b);
    x += 2.0 * hx + gap;
  }
  w.hand.base = {0.5 * length, 0.0, 1.0};
  return w;
}

inline physics::BaseTarget hold_base(const physics::WorldState& w) {
  return {w.hand.base, w.hand.wrist};
}

inline void settle(physics::WorldState& w, const physics::PhysicsParams& p, int substeps = 600) {
  physics::substep_n(w, hold_base(w), p, substeps);
  w.time = 0.0;
}

}  // namespace sope::fixture
