#pragma once

// Evaluation of a trained policy or a scripted controller over seeded
// episodes, and the zero-shot block-count sweep.

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "sope/baselines.hpp"
#include "sope/checkpoint.hpp"
#include "sope/config.hpp"
#include "sope/env.hpp"
#include "sope/ppo.hpp"

namespace sope::eval {

struct MetricsRecord {
  int episodes = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_reward = 0.0;
  std::vector<int> target_successes;  // per target index
  std::vector<int> target_counts;
  int isolating_failures = 0;
  int grasp_retrieve_failures = 0;
  int blowups = 0;
  int obs_dim = 0;
  int n_blocks = 0;
};

nlohmann::json to_json(const MetricsRecord& m);

struct Command {
  physics::JointVector delta{};
  std::optional<physics::BaseTarget> base;  // unset: scheduled waypoint
  bool mask_phase3 = true;
};

// Drives one episode. The episode is mutable so test controllers can
// instrument the world.
class Controller {
 public:
  virtual ~Controller() = default;
  virtual void begin(env::Episode& ep, std::uint64_t episode_seed) = 0;
  virtual Command act(env::Episode& ep, const obs::Observation& o) = 0;
};

using ControllerFactory = std::function<std::unique_ptr<Controller>()>;

// Frozen network and normaliser shared by all episodes of an evaluation.
struct Policy {
  ppo::ActorCritic<float> model;
  ppo::RunningNorm norm;
  bool obs_norm = true;
  obs::Variant variant = obs::Variant::kStandard;
};

// Accepts the path with or without the ".ckpt" suffix.
std::string resolve_checkpoint_path(const std::string& path);
std::shared_ptr<const Policy> load_policy(const std::string& path);

ControllerFactory policy_controller(std::shared_ptr<const Policy> policy, bool deterministic);
ControllerFactory scripted_controller(const baselines::S2SSPConfig& cfg,
                                      const physics::PhysicsParams& params);

struct EvalOptions {
  int episodes = 100;
  std::uint64_t seed = 0;
  std::string trajectory_dir;  // empty: no logging
};

// Throws CheckpointMismatch when a policy's observation variant differs
// from the env's. Box randomisation fields are ignored.
MetricsRecord evaluate(const ControllerFactory& factory, const env::EnvConfig& env,
                       const EvalOptions& opts,
                       const std::shared_ptr<const Policy>& policy = nullptr);

struct SweepRow {
  std::string method;
  std::vector<int> n_blocks;
  // cells[i][s]: success rate for n_blocks[i] and seed s
  std::vector<std::vector<double>> cells;
  std::vector<std::vector<MetricsRecord>> records;
};

SweepRow sweep(const std::string& method, const std::shared_ptr<const Policy>& policy,
               const config::RunConfig& cfg, const std::vector<std::uint64_t>& seeds);

// "method,1-out-of-1,..." with "mean ± std" cells.
void write_sweep_table(const std::vector<SweepRow>& rows, const std::string& path);
// One line per (method, seed, n_blocks).
void write_sweep_long(const std::vector<SweepRow>& rows, const std::vector<std::uint64_t>& seeds,
                      const std::string& path);

}  // namespace sope::eval
