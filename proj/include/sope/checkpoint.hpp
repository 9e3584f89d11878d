#pragma once

// Checkpoint file:
//   line 1  "SOPECKPT 1"
//   line 2  one-line JSON header (shapes, observation variant, normaliser
//           statistics, optimiser step, iteration, seed, success window)
//   rest    little-endian float32: parameters, then Adam first and second
//           moments, each header["num_params"] long.

#include <cstdint>
#include <string>
#include <vector>

#include "sope/encoder.hpp"
#include "sope/ppo.hpp"

namespace sope::ckpt {

inline constexpr int kFormatVersion = 1;

struct Checkpoint {
  int obs_dim = 0;
  obs::Variant variant = obs::Variant::kStandard;
  std::vector<int> hidden;
  std::vector<float> params;
  std::vector<float> adam_m;
  std::vector<float> adam_v;
  std::int64_t adam_step = 0;
  int iteration = 0;  // iterations completed
  std::uint64_t seed = 0;
  bool obs_norm = true;
  ppo::RunningNorm norm;
  std::vector<int> success_window;  // oldest first, 1 = success
  std::int64_t episodes = 0;
  std::int64_t env_steps = 0;
};

void save(const Checkpoint& c, const std::string& path);
// Throws IoError on unreadable files, CheckpointMismatch on format errors.
Checkpoint load(const std::string& path);

}  // namespace sope::ckpt
