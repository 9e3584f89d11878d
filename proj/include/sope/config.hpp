#pragma once

// Run configuration: defaults, JSON files (unknown keys rejected), flag
// overrides, ablation presets, and the resolved snapshot written per run.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "sope/baselines.hpp"
#include "sope/env.hpp"
#include "sope/ppo.hpp"

namespace sope::config {

inline constexpr int kSchemaVersion = 1;

struct EvalSettings {
  int episodes = 100;
  bool deterministic = true;  // act with the distribution mean
  bool ema = true;
};

struct RunConfig {
  int schema_version = kSchemaVersion;
  std::string mode = "train";
  std::vector<std::uint64_t> seeds{0};
  std::string ablation = "none";
  env::EnvConfig env;
  ppo::Hyper ppo;
  EvalSettings eval;
  baselines::S2SSPConfig s2ssp;
  std::vector<int> sweep_blocks{1, 2, 5, 10};
  std::string out_dir = "runs/default";
  std::string checkpoint;
  bool log_trajectories = false;

  void validate() const;
};

nlohmann::json to_json(const RunConfig& c);
nlohmann::json to_json(const env::EnvConfig& c);

// Overlays `j` on `base`. Throws ConfigError on unknown keys or bad types.
RunConfig from_json(const nlohmann::json& j, RunConfig base = {});
env::EnvConfig env_from_json(const nlohmann::json& j, env::EnvConfig base = {});

RunConfig load(const std::string& path, RunConfig base = {});
void save(const RunConfig& c, const std::string& path);

// Applies the named ablation to the env section and validates. Idempotent.
void finalize(RunConfig& c);

// Default run differing only in what the ablation defines.
RunConfig ablation_run_config(baselines::Ablation a, RunConfig base = {});

}  // namespace sope::config
