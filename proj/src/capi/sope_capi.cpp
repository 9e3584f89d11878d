#include "sope/sope.h"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "sope/config.hpp"
#include "sope/env.hpp"
#include "sope/errors.hpp"
#include "sope/eval.hpp"
#include "sope/trainer.hpp"
#include "sope/trajectory.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

struct sope_env {
  sope::env::Episode episode;
  explicit sope_env(sope::env::EnvConfig c) : episode(std::move(c)) {}
};

namespace {

thread_local std::string g_last_error;

sope_status fail(sope_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

// Maps the library's exceptions onto status codes.
template <typename F>
sope_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const sope::ConfigError& e) {
    return fail(SOPE_ERR_CONFIG, e.what());
  } catch (const sope::InfeasibleLayout& e) {
    return fail(SOPE_ERR_INFEASIBLE_LAYOUT, e.what());
  } catch (const sope::NumericalBlowup& e) {
    return fail(SOPE_ERR_NUMERICAL_BLOWUP, e.what());
  } catch (const sope::NonFiniteLoss& e) {
    return fail(SOPE_ERR_NONFINITE_LOSS, e.what());
  } catch (const sope::CheckpointMismatch& e) {
    return fail(SOPE_ERR_CHECKPOINT_MISMATCH, e.what());
  } catch (const sope::IoError& e) {
    return fail(SOPE_ERR_IO, e.what());
  } catch (const json::exception& e) {
    return fail(SOPE_ERR_CONFIG, std::string("malformed JSON: ") + e.what());
  } catch (const std::exception& e) {
    return fail(SOPE_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(SOPE_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void set_out(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

sope::config::RunConfig parse_resolved(const char* text) {
  if (!text) throw sope::ConfigError("config JSON is required");
  sope::config::RunConfig c = sope::config::from_json(json::parse(text));
  sope::config::finalize(c);
  return c;
}

void write_json(const json& j, const fs::path& p) {
  std::ofstream out(p);
  if (!out) throw sope::IoError("cannot write " + p.string());
  out << j.dump(2) << "\n";
}

void snapshot(sope::config::RunConfig c, const std::string& mode, const fs::path& dir) {
  c.mode = mode;
  c.out_dir = dir.string();
  sope::config::save(c, (dir / "resolved_config.json").string());
}

bool blowup_epidemic(int blowups, int episodes) { return blowups * 100 > episodes; }

}  // namespace

extern "C" {

const char* sope_version(void) { return "1.0.0"; }

const char* sope_last_error(void) { return g_last_error.c_str(); }

const char* sope_status_name(sope_status s) {
  switch (s) {
    case SOPE_OK: return "ok";
    case SOPE_ERR_CONFIG: return "config error";
    case SOPE_ERR_INFEASIBLE_LAYOUT: return "infeasible layout";
    case SOPE_ERR_NUMERICAL_BLOWUP: return "numerical blowup";
    case SOPE_ERR_NONFINITE_LOSS: return "non-finite loss";
    case SOPE_ERR_CHECKPOINT_MISMATCH: return "checkpoint mismatch";
    case SOPE_ERR_IO: return "io error";
    case SOPE_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SOPE_ERR_INTERNAL: return "internal error";
  }
  return "unknown";
}

void sope_free_string(char* s) { std::free(s); }

sope_status sope_env_create(const char* config_json, sope_env** out) {
  if (!out) return fail(SOPE_ERR_INVALID_ARGUMENT, "out is null");
  *out = nullptr;
  return guarded([&] {
    sope::env::EnvConfig cfg;
    if (config_json) {
      const json j = json::parse(config_json);
      if (j.contains("env") || j.contains("schema_version")) {
        sope::config::RunConfig rc = sope::config::from_json(j);
        sope::config::finalize(rc);
        cfg = rc.env;
      } else {
        cfg = sope::config::env_from_json(j);
      }
    }
    cfg.validate();
    *out = new sope_env(cfg);
    return SOPE_OK;
  });
}

void sope_env_destroy(sope_env* env) { delete env; }

int sope_env_obs_dim(const sope_env* env) { return env ? env->episode.config().obs_dim() : 0; }

int sope_env_action_dim(void) { return sope::physics::kNumJoints; }

sope_status sope_env_reset(sope_env* env, uint64_t seed, double* obs, size_t capacity) {
  if (!env) return fail(SOPE_ERR_INVALID_ARGUMENT, "env is null");
  return guarded([&] {
    const sope::obs::Observation o = env->episode.reset(seed);
    if (obs) {
      if (capacity < o.values.size()) return fail(SOPE_ERR_INVALID_ARGUMENT, "obs buffer too small");
      std::copy(o.values.begin(), o.values.end(), obs);
    }
    return SOPE_OK;
  });
}

sope_status sope_env_step(sope_env* env, const double* action, size_t action_len, double* obs,
                          size_t capacity, double* reward, int* done) {
  if (!env || !action) return fail(SOPE_ERR_INVALID_ARGUMENT, "env or action is null");
  return guarded([&] {
    if (env->episode.done()) return fail(SOPE_ERR_INVALID_ARGUMENT, "episode is finished; reset first");
    if (obs && capacity < static_cast<size_t>(env->episode.config().obs_dim())) {
      return fail(SOPE_ERR_INVALID_ARGUMENT, "obs buffer too small");
    }
    const sope::env::StepResult r = env->episode.step(std::span<const double>(action, action_len));
    if (obs) std::copy(r.observation.values.begin(), r.observation.values.end(), obs);
    if (reward) *reward = r.reward;
    if (done) *done = r.done ? 1 : 0;
    return SOPE_OK;
  });
}

sope_status sope_env_outcome(const sope_env* env, int* success, int* failure, int* target) {
  if (!env) return fail(SOPE_ERR_INVALID_ARGUMENT, "env is null");
  if (!env->episode.done()) return fail(SOPE_ERR_INVALID_ARGUMENT, "episode still running");
  const sope::env::TrialOutcome& o = env->episode.outcome();
  if (success) *success = o.success ? 1 : 0;
  if (failure) *failure = static_cast<int>(o.failure);
  if (target) *target = o.target_idx;
  return SOPE_OK;
}

sope_status sope_resolve_config(const char* config_path, const char* overrides_json,
                                char** resolved_json) {
  return guarded([&] {
    sope::config::RunConfig c;
    if (config_path && *config_path) c = sope::config::load(config_path);
    if (overrides_json && *overrides_json) {
      c = sope::config::from_json(json::parse(overrides_json), c);
    }
    sope::config::finalize(c);
    set_out(resolved_json, sope::config::to_json(c).dump());
    return SOPE_OK;
  });
}

sope_status sope_train(const char* resolved_json, uint64_t seed, const char* out_dir,
                       const char* resume_checkpoint, int verbose, char** summary_json) {
  if (!out_dir) return fail(SOPE_ERR_INVALID_ARGUMENT, "out_dir is null");
  return guarded([&] {
    const sope::config::RunConfig c = parse_resolved(resolved_json);
    std::optional<std::string> resume;
    if (resume_checkpoint && *resume_checkpoint) {
      resume = sope::eval::resolve_checkpoint_path(resume_checkpoint);
    }
    const sope::train::TrainSummary s =
        sope::train::run_training(c, seed, out_dir, verbose ? &std::cerr : nullptr, resume);
    json j = sope::train::to_json(s.last);
    j["final_checkpoint"] = s.final_checkpoint;
    j["seed"] = seed;
    set_out(summary_json, j.dump());
    return SOPE_OK;
  });
}

sope_status sope_eval(const char* resolved_json, const char* checkpoint, const char* out_dir,
                      char** metrics_json) {
  if (!checkpoint || !out_dir) return fail(SOPE_ERR_INVALID_ARGUMENT, "checkpoint and out_dir are required");
  return guarded([&] {
    const sope::config::RunConfig c = parse_resolved(resolved_json);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    sope::config::RunConfig snap = c;
    snap.checkpoint = checkpoint;
    snapshot(snap, "eval", dir);
    const auto policy = sope::eval::load_policy(checkpoint);
    sope::env::EnvConfig env = c.env;
    env.ema = c.eval.ema;
    json out = json::array();
    int blowups = 0, episodes = 0;
    for (std::uint64_t seed : c.seeds) {
      sope::eval::EvalOptions o;
      o.episodes = c.eval.episodes;
      o.seed = seed;
      if (c.log_trajectories) o.trajectory_dir = (dir / ("trajectories_seed" + std::to_string(seed))).string();
      const sope::eval::MetricsRecord m = sope::eval::evaluate(
          sope::eval::policy_controller(policy, c.eval.deterministic), env, o, policy);
      json j = sope::eval::to_json(m);
      j["seed"] = seed;
      out.push_back(j);
      blowups += m.blowups;
      episodes += m.episodes;
    }
    write_json(out, dir / "eval_metrics.json");
    set_out(metrics_json, out.dump());
    if (blowup_epidemic(blowups, episodes)) {
      return fail(SOPE_ERR_NUMERICAL_BLOWUP, "physics blew up in " + std::to_string(blowups) +
                                                 " of " + std::to_string(episodes) + " episodes");
    }
    return SOPE_OK;
  });
}

sope_status sope_sweep(const char* resolved_json, const char* const* checkpoints, size_t count,
                       const char* out_dir, char** result_json) {
  if (!checkpoints || count == 0 || !out_dir) {
    return fail(SOPE_ERR_INVALID_ARGUMENT, "at least one checkpoint and out_dir are required");
  }
  return guarded([&] {
    const sope::config::RunConfig c = parse_resolved(resolved_json);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    snapshot(c, "sweep", dir);
    std::vector<sope::eval::SweepRow> rows;
    json out = json::array();
    int blowups = 0, episodes = 0;
    for (size_t i = 0; i < count; ++i) {
      const std::string path = checkpoints[i];
      const auto policy = sope::eval::load_policy(path);
      // Row label: the run directory holding the checkpoint.
      fs::path p(sope::eval::resolve_checkpoint_path(path));
      std::string method = p.parent_path().filename().string();
      if (method.empty()) method = p.stem().string();
      rows.push_back(sope::eval::sweep(method, policy, c, c.seeds));
      for (const auto& recs : rows.back().records) {
        for (size_t s = 0; s < recs.size(); ++s) {
          json j = sope::eval::to_json(recs[s]);
          j["method"] = method;
          j["seed"] = c.seeds[s];
          out.push_back(j);
          blowups += recs[s].blowups;
          episodes += recs[s].episodes;
        }
      }
    }
    sope::eval::write_sweep_table(rows, (dir / "sweep_table.csv").string());
    sope::eval::write_sweep_long(rows, c.seeds, (dir / "sweep_long.csv").string());
    write_json(out, dir / "sweep_metrics.json");
    set_out(result_json, out.dump());
    if (blowup_epidemic(blowups, episodes)) {
      return fail(SOPE_ERR_NUMERICAL_BLOWUP, "physics blew up in " + std::to_string(blowups) +
                                                 " of " + std::to_string(episodes) + " episodes");
    }
    return SOPE_OK;
  });
}

sope_status sope_baseline(const char* resolved_json, const char* out_dir, char** metrics_json) {
  if (!out_dir) return fail(SOPE_ERR_INVALID_ARGUMENT, "out_dir is null");
  return guarded([&] {
    const sope::config::RunConfig c = parse_resolved(resolved_json);
    const fs::path dir(out_dir);
    fs::create_directories(dir);
    snapshot(c, "baseline", dir);
    sope::env::EnvConfig env = c.env;
    env.ema = false;  // the script issues exact joint deltas
    json out = json::array();
    int blowups = 0, episodes = 0;
    for (std::uint64_t seed : c.seeds) {
      sope::eval::EvalOptions o;
      o.episodes = c.eval.episodes;
      o.seed = seed;
      if (c.log_trajectories) o.trajectory_dir = (dir / ("trajectories_seed" + std::to_string(seed))).string();
      const sope::eval::MetricsRecord m = sope::eval::evaluate(
          sope::eval::scripted_controller(c.s2ssp, env.physics), env, o);
      json j = sope::eval::to_json(m);
      j["seed"] = seed;
      out.push_back(j);
      blowups += m.blowups;
      episodes += m.episodes;
    }
    write_json(out, dir / "baseline_metrics.json");
    set_out(metrics_json, out.dump());
    if (blowup_epidemic(blowups, episodes)) {
      return fail(SOPE_ERR_NUMERICAL_BLOWUP, "physics blew up in " + std::to_string(blowups) +
                                                 " of " + std::to_string(episodes) + " episodes");
    }
    return SOPE_OK;
  });
}

sope_status sope_replay(const char* trajectory_path, char** report_text, int* mismatches) {
  if (!trajectory_path) return fail(SOPE_ERR_INVALID_ARGUMENT, "path is null");
  return guarded([&] {
    const sope::traj::ReplayReport r = sope::traj::replay(trajectory_path);
    std::ostringstream os;
    sope::traj::print_report(r, os);
    set_out(report_text, os.str());
    if (mismatches) *mismatches = static_cast<int>(r.mismatches.size());
    return SOPE_OK;
  });
}

}  // extern "C"
