#pragma once

// Training loop: one full episode per env per iteration, collected in
// lock-step, then clipped-surrogate updates.

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "sope/checkpoint.hpp"
#include "sope/config.hpp"
#include "sope/env.hpp"
#include "sope/pool.hpp"
#include "sope/ppo.hpp"

namespace sope::train {

struct IterationMetrics {
  int iteration = 0;  // 1-based count of completed iterations
  std::int64_t env_steps = 0;
  std::int64_t episodes = 0;
  double mean_return = 0.0;
  double iteration_success = 0.0;
  double online_success = 0.0;  // over the last success_window episodes
  ppo::LossStats loss;
  double grad_norm = 0.0;
  double log_std_mean = 0.0;
  int batch_size = 0;
  std::int64_t blowups = 0;  // cumulative
};

nlohmann::json to_json(const IterationMetrics& m);

// Flat rollout of one iteration, env-major then time.
struct Rollout {
  int obs_dim = 0;
  std::vector<float> obs;       // normalised, obs_dim per row
  std::vector<double> raw_obs;  // before normalisation
  std::vector<float> act;       // 16 per row
  std::vector<double> logp;
  std::vector<double> value;
  std::vector<double> reward;
  std::vector<double> done;
  std::vector<int> phase;
  std::vector<int> env_index;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<double> episode_returns;  // per env
  std::vector<bool> episode_success;    // per env
  std::vector<bool> episode_blowup;     // per env
  std::size_t rows() const { return reward.size(); }
};

class Trainer {
 public:
  Trainer(config::RunConfig cfg, std::uint64_t seed, WorkerPool* pool = nullptr);

  void resume(const ckpt::Checkpoint& c);
  IterationMetrics iterate();

  // Collection only (no update), exposed for tests.
  Rollout collect(int iteration) const;

  ckpt::Checkpoint checkpoint() const;
  int iteration() const { return iteration_; }
  const ppo::ActorCritic<float>& model() const { return model_; }
  ppo::ActorCritic<float>& model() { return model_; }
  const ppo::RunningNorm& norm() const { return norm_; }
  const config::RunConfig& config() const { return cfg_; }
  double online_success() const;

 private:
  config::RunConfig cfg_;
  std::uint64_t seed_;
  WorkerPool* pool_;
  ppo::ActorCritic<float> model_;
  ppo::Adam<float> adam_;
  ppo::RunningNorm norm_;
  std::deque<int> window_;
  int iteration_ = 0;
  std::int64_t episodes_ = 0;
  std::int64_t env_steps_ = 0;
  std::int64_t blowups_ = 0;
};

inline constexpr std::int64_t kBlowupMinEpisodes = 640;

struct TrainSummary {
  std::string final_checkpoint;
  IterationMetrics last;
};

// Writes metrics.jsonl, curve.csv, resolved_config.json and checkpoints into
// `out_dir`. Resumes from `resume_path` when given. Throws NumericalBlowup
// once more than 1% of at least kBlowupMinEpisodes episodes blew up.
TrainSummary run_training(const config::RunConfig& cfg, std::uint64_t seed,
                          const std::string& out_dir, std::ostream* progress,
                          const std::optional<std::string>& resume_path = std::nullopt);

}  // namespace sope::train
