#include "sope/eval.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "sope/errors.hpp"
#include "sope/pool.hpp"
#include "sope/rng.hpp"
#include "sope/trajectory.hpp"

namespace sope::eval {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const MetricsRecord& m) {
  return {{"episodes", m.episodes},
          {"successes", m.successes},
          {"success_rate", m.success_rate},
          {"mean_reward", m.mean_reward},
          {"target_successes", m.target_successes},
          {"target_counts", m.target_counts},
          {"failures",
           {{"isolating", m.isolating_failures},
            {"grasp_retrieve", m.grasp_retrieve_failures},
            {"blowup", m.blowups}}},
          {"obs_dim", m.obs_dim},
          {"n_blocks", m.n_blocks}};
}

std::string resolve_checkpoint_path(const std::string& path) {
  if (fs::is_regular_file(path)) return path;
  if (fs::is_regular_file(path + ".ckpt")) return path + ".ckpt";
  throw IoError("checkpoint not found: " + path);
}

std::shared_ptr<const Policy> load_policy(const std::string& path) {
  const ckpt::Checkpoint c = ckpt::load(resolve_checkpoint_path(path));
  auto p = std::make_shared<Policy>();
  p->model = ppo::ActorCritic<float>(c.obs_dim, c.hidden);
  if (p->model.params.size() != c.params.size()) {
    throw CheckpointMismatch("parameter count does not match the stored shape");
  }
  p->model.params = c.params;
  p->norm = c.norm;
  p->obs_norm = c.obs_norm;
  p->variant = c.variant;
  return p;
}

namespace {

class PolicyController : public Controller {
 public:
  PolicyController(std::shared_ptr<const Policy> p, bool deterministic)
      : policy_(std::move(p)), deterministic_(deterministic) {}

  void begin(env::Episode&, std::uint64_t episode_seed) override {
    gen_ = rng::stream(episode_seed, 0, 0, rng::Purpose::kAction);
  }

  Command act(env::Episode&, const obs::Observation& o) override {
    const int d = static_cast<int>(o.values.size());
    std::vector<double> z(o.values);
    if (policy_->obs_norm) policy_->norm.normalize(o.values, z);
    nn::Mat<float> x(d, 1);
    for (int i = 0; i < d; ++i) x(i, 0) = static_cast<float>(z[i]);
    const nn::Mat<float> mu = policy_->model.mean(x);
    Command c;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < physics::kNumJoints; ++i) {
      c.delta[i] = mu(i, 0);
      if (!deterministic_) {
        c.delta[i] = static_cast<float>(
            c.delta[i] + std::exp(static_cast<double>(policy_->model.log_std()[i])) * normal(gen_));
      }
    }
    return c;
  }

 private:
  std::shared_ptr<const Policy> policy_;
  bool deterministic_;
  std::mt19937_64 gen_;
};

class ScriptedController : public Controller {
 public:
  ScriptedController(const baselines::S2SSPConfig& cfg, const physics::PhysicsParams& params)
      : script_(cfg, params) {}

  void begin(env::Episode& ep, std::uint64_t) override { script_.reset(ep.world(), ep.target()); }

  Command act(env::Episode& ep, const obs::Observation&) override {
    const baselines::ScriptCommand s = script_.act(ep.world());
    Command c;
    c.delta = s.delta;
    c.base = s.base;
    c.mask_phase3 = false;
    return c;
  }

 private:
  baselines::S2SSP script_;
};

}  // namespace

ControllerFactory policy_controller(std::shared_ptr<const Policy> policy, bool deterministic) {
  return [policy, deterministic] {
    return std::make_unique<PolicyController>(policy, deterministic);
  };
}

ControllerFactory scripted_controller(const baselines::S2SSPConfig& cfg,
                                      const physics::PhysicsParams& params) {
  return [cfg, params] { return std::make_unique<ScriptedController>(cfg, params); };
}

MetricsRecord evaluate(const ControllerFactory& factory, const env::EnvConfig& requested,
                       const EvalOptions& opts, const std::shared_ptr<const Policy>& policy) {
  // Box randomisation is a training aid; evaluation always uses the fixed box.
  env::EnvConfig env = requested;
  env.container_length_max = 0.0;
  env.row_shift_max = 0.0;
  env.validate();
  if (opts.episodes < 1) throw ConfigError("episodes must be positive");
  if (policy) {
    if (policy->variant != env.obs_variant || policy->model.obs_dim() != env.obs_dim()) {
      throw CheckpointMismatch("checkpoint observation variant " + obs::to_string(policy->variant) +
                               " does not match the env's " + obs::to_string(env.obs_variant));
    }
  }
  if (!opts.trajectory_dir.empty()) fs::create_directories(opts.trajectory_dir);

  struct Result {
    env::TrialOutcome outcome;
  };
  std::vector<Result> results(opts.episodes);
  auto run_one = [&](std::size_t e) {
    const std::uint64_t ep_seed = rng::derive(opts.seed, e, 0, rng::Purpose::kEval);
    env::Episode ep(env);
    obs::Observation o = ep.reset(ep_seed);
    std::unique_ptr<Controller> ctrl = factory();
    ctrl->begin(ep, ep_seed);
    std::unique_ptr<traj::Writer> writer;
    if (!opts.trajectory_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof(name), "episode_%05zu.jsonl", e);
      writer = std::make_unique<traj::Writer>((fs::path(opts.trajectory_dir) / name).string());
      writer->write(traj::header_record(ep, ep_seed));
    }
    while (!ep.done()) {
      const Command c = ctrl->act(ep, o);
      ep.set_base_override(c.base);
      ep.set_mask_phase3(c.mask_phase3);
      const env::StepResult r = ep.step(c.delta);
      if (writer) writer->write(traj::step_record(*r.record));
      o = r.observation;
    }
    if (writer) writer->write(traj::outcome_record(ep.outcome()));
    results[e].outcome = ep.outcome();
  };
  const int threads = threads_from_env();
  if (threads > 1) {
    WorkerPool pool(threads);
    pool.parallel_for(results.size(), run_one);
  } else {
    for (std::size_t e = 0; e < results.size(); ++e) run_one(e);
  }

  MetricsRecord m;
  m.episodes = opts.episodes;
  m.obs_dim = env.obs_dim();
  m.n_blocks = env.n_blocks;
  m.target_successes.assign(env.n_blocks, 0);
  m.target_counts.assign(env.n_blocks, 0);
  double reward = 0.0;
  for (const Result& r : results) {
    const env::TrialOutcome& o = r.outcome;
    reward += o.reward_sum;
    ++m.target_counts[o.target_idx];
    if (o.success) {
      ++m.successes;
      ++m.target_successes[o.target_idx];
    }
    switch (o.failure) {
      case env::FailureClass::kIsolating: ++m.isolating_failures; break;
      case env::FailureClass::kGraspRetrieve: ++m.grasp_retrieve_failures; break;
      case env::FailureClass::kBlowup: ++m.blowups; break;
      case env::FailureClass::kNone: break;
    }
  }
  m.success_rate = static_cast<double>(m.successes) / m.episodes;
  m.mean_reward = reward / m.episodes;
  return m;
}

SweepRow sweep(const std::string& method, const std::shared_ptr<const Policy>& policy,
               const config::RunConfig& cfg, const std::vector<std::uint64_t>& seeds) {
  SweepRow row;
  row.method = method;
  row.n_blocks = cfg.sweep_blocks;
  for (int n : cfg.sweep_blocks) {
    env::EnvConfig e = cfg.env;
    e.n_blocks = n;
    e.grow_container = true;
    e.ema = cfg.eval.ema;
    std::vector<double> rates;
    std::vector<MetricsRecord> recs;
    for (std::uint64_t s : seeds) {
      EvalOptions o;
      o.episodes = cfg.eval.episodes;
      o.seed = s;
      const MetricsRecord m =
          evaluate(policy_controller(policy, cfg.eval.deterministic), e, o, policy);
      rates.push_back(m.success_rate);
      recs.push_back(m);
    }
    row.cells.push_back(rates);
    row.records.push_back(recs);
  }
  return row;
}

namespace {

std::pair<double, double> mean_std(const std::vector<double>& v) {
  double mu = 0.0;
  for (double x : v) mu += x;
  mu /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mu) * (x - mu);
  // Sample deviation over seeds; a single seed reports 0.
  const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
  return {mu, sd};
}

}  // namespace

void write_sweep_table(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "method";
  if (!rows.empty()) {
    for (int n : rows.front().n_blocks) out << ",1-out-of-" << n;
  }
  out << "\n";
  for (const SweepRow& r : rows) {
    out << r.method;
    for (const auto& cell : r.cells) {
      const auto [mu, sd] = mean_std(cell);
      char buf[64];
      std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", mu, sd);
      out << "," << buf;
    }
    out << "\n";
  }
}

void write_sweep_long(const std::vector<SweepRow>& rows, const std::vector<std::uint64_t>& seeds,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "method,seed,n_blocks,episodes,successes,success_rate,obs_dim\n";
  for (const SweepRow& r : rows) {
    for (std::size_t i = 0; i < r.n_blocks.size(); ++i) {
      for (std::size_t s = 0; s < seeds.size(); ++s) {
        const MetricsRecord& m = r.records[i][s];
        out << r.method << "," << seeds[s] << "," << r.n_blocks[i] << "," << m.episodes << ","
            << m.successes << "," << m.success_rate << "," << m.obs_dim << "\n";
      }
    }
  }
}

}  // namespace sope::eval
