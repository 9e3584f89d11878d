#pragma once

// Reference computations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <random>
#include <vector>

#include "sope/physics.hpp"
#include "sope/ppo.hpp"

namespace sope::fixture {

inline std::vector<double>* const kNoGrad = nullptr;

inline bool bitwise_equal(const physics::WorldState& a, const physics::WorldState& b) {
  if (a.blocks.size() != b.blocks.size()) return false;
  for (std::size_t i = 0; i < a.blocks.size(); ++i) {
    const physics::RigidBlock& x = a.blocks[i];
    const physics::RigidBlock& y = b.blocks[i];
    const double xs[] = {x.center.x, x.center.z, x.angle, x.vel_x, x.vel_z, x.ang_vel};
    const double ys[] = {y.center.x, y.center.z, y.angle, y.vel_x, y.vel_z, y.ang_vel};
    if (std::memcmp(xs, ys, sizeof(xs)) != 0) return false;
  }
  constexpr std::size_t bytes = sizeof(double) * physics::kNumJoints;
  return std::memcmp(a.hand.joints.data(), b.hand.joints.data(), bytes) == 0 &&
         std::memcmp(a.hand.joint_vel.data(), b.hand.joint_vel.data(), bytes) == 0 &&
         a.hand.base == b.hand.base;
}

// Brute-force advantage: discounted sum of TD residuals over the rest of the
// episode, written without recursion.
inline std::vector<double> gae_oracle(const std::vector<double>& r, const std::vector<double>& v,
                               const std::vector<double>& done, double boot, double g, double l) {
  const std::size_t n = r.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double acc = 0.0;
    double w = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      const double next = k + 1 < n ? v[k + 1] : boot;
      const double delta = r[k] + g * next * (1.0 - done[k]) - v[k];
      acc += w * delta;
      if (done[k] > 0.5) break;
      w *= g * l;
    }
    out[t] = acc;
  }
  return out;
}

inline ppo::ActorCritic<double> small_model(std::uint64_t seed, int obs_dim = 7) {
  ppo::ActorCritic<double> m(obs_dim, {12, 8});
  m.init(seed, -0.7);
  // Give the policy head real weights so the gradient is not dominated by
  // the near-zero output init.
  std::mt19937_64 gen(seed + 100);
  std::uniform_real_distribution<double> u(-0.4, 0.4);
  for (int i = 0; i < m.log_std_offset(); ++i) m.params[i] += u(gen);
  return m;
}

inline ppo::Batch<double> random_batch(const ppo::ActorCritic<double>& m, int n, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  ppo::Batch<double> b;
  b.obs.resize(m.obs_dim(), n);
  b.act.resize(16, n);
  b.logp_old.resize(n);
  b.adv.resize(n);
  b.ret.resize(n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < m.obs_dim(); ++i) b.obs(i, j) = nd(gen);
  }
  const nn::Mat<double> mu = m.mean(b.obs);
  std::vector<double> ls(16);
  for (int i = 0; i < 16; ++i) ls[i] = m.log_std()[i];
  for (int j = 0; j < n; ++j) {
    std::vector<double> mean(16), a(16);
    for (int i = 0; i < 16; ++i) {
      mean[i] = mu(i, j);
      a[i] = mean[i] + std::exp(ls[i]) * nd(gen);
      b.act(i, j) = a[i];
    }
    // Old log-probs slightly off so some ratios differ from one.
    b.logp_old[j] = ppo::gaussian_log_prob(mean, ls, a) + 0.05 * nd(gen);
    b.adv[j] = nd(gen);
    b.ret[j] = nd(gen);
  }
  return b;
}

// Largest relative gap between the analytic gradient of the total loss and
// central differences with step h.
inline double max_gradient_error(ppo::ActorCritic<double> m, const ppo::Batch<double>& b,
                                 const ppo::Hyper& h, double step) {
  std::vector<double> grad;
  ppo::loss_and_grad(m, b, h, &grad);
  double worst = 0.0;
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    const double keep = m.params[i];
    m.params[i] = keep + step;
    const double up = ppo::loss_and_grad(m, b, h, kNoGrad).total;
    m.params[i] = keep - step;
    const double down = ppo::loss_and_grad(m, b, h, kNoGrad).total;
    m.params[i] = keep;
    const double fd = (up - down) / (2.0 * step);
    const double scale = std::max({std::abs(fd), std::abs(grad[i]), 1e-6});
    worst = std::max(worst, std::abs(fd - grad[i]) / scale);
  }
  return worst;
}

}  // namespace sope::fixture
