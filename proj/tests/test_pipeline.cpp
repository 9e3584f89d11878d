#include <gtest/gtest.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sope/baselines.hpp"
#include "sope/checkpoint.hpp"
#include "sope/config.hpp"
#include "sope/eval.hpp"
#include "sope/trainer.hpp"
#include "sope/trajectory.hpp"

using namespace sope;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sope_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

config::RunConfig tiny() {
  config::RunConfig c;
  c.ppo.n_envs = 3;
  c.ppo.hidden = {16, 8};
  c.ppo.iterations = 2;
  c.ppo.epochs = 2;
  c.ppo.minibatches = 2;
  c.ppo.checkpoint_every = 0;
  c.eval.episodes = 4;
  return c;
}

void expect_metrics_equal(const eval::MetricsRecord& a, const eval::MetricsRecord& b) {
  EXPECT_EQ(eval::to_json(a).dump(), eval::to_json(b).dump());
}

}  // namespace

// ---- config ----

TEST(Config, UnknownKeysAreRejected) {
  EXPECT_THROW(config::from_json(json::parse(R"({"schema_version":1,"bogus":1})")), ConfigError);
  EXPECT_THROW(config::from_json(json::parse(R"({"env":{"n_blocks":4,"colour":"red"}})")), ConfigError);
  EXPECT_THROW(config::from_json(json::parse(R"({"ppo":{"lr":"fast"}})")), ConfigError);
  EXPECT_THROW(config::from_json(json::parse(R"({"schema_version":2})")), ConfigError);
}

TEST(Config, OverlayKeepsUnspecifiedDefaults) {
  const config::RunConfig c = config::from_json(json::parse(R"({"env":{"n_blocks":6}})"));
  EXPECT_EQ(c.env.n_blocks, 6);
  EXPECT_EQ(c.env.container_length, 0.26);
  EXPECT_EQ(c.ppo.n_envs, 64);
}

TEST(Config, JsonRoundTripIsExact) {
  config::RunConfig c = tiny();
  c.env.gap_max = 0.0123456789;
  c.seeds = {3, 4};
  const config::RunConfig back = config::from_json(config::to_json(c));
  EXPECT_EQ(config::to_json(back).dump(), config::to_json(c).dump());
}

TEST(Config, SnapshotReloads) {
  const fs::path d = scratch_dir("cfg");
  config::RunConfig c = tiny();
  c.ablation = "tactile";
  config::finalize(c);
  config::save(c, (d / "c.json").string());
  const config::RunConfig back = config::load((d / "c.json").string());
  EXPECT_EQ(config::to_json(back).dump(), config::to_json(c).dump());
}

TEST(Ablation, PresetsChangeOnlyTheirFields) {
  const json base = config::to_json(config::ablation_run_config(baselines::Ablation::kNone));
  auto changed = [&](baselines::Ablation a) {
    const json j = config::to_json(config::ablation_run_config(a));
    std::set<std::string> keys;
    for (const auto& op : json::diff(base, j)) keys.insert(op.at("path").get<std::string>());
    return keys;
  };
  for (const std::string& k : changed(baselines::Ablation::kTactile)) {
    EXPECT_TRUE(k == "/ablation" || k == "/env/obs_variant") << k;
  }
  for (const std::string& k : changed(baselines::Ablation::kNaiveBlock)) {
    EXPECT_TRUE(k == "/ablation" || k == "/env/obs_variant") << k;
  }
  for (const std::string& k : changed(baselines::Ablation::kTwoPhase)) {
    EXPECT_TRUE(k == "/ablation" || k.rfind("/env/schedule", 0) == 0 ||
                k.rfind("/env/weights", 0) == 0 || k == "/env/waypoints/hover")
        << k;
  }
  EXPECT_EQ(config::ablation_run_config(baselines::Ablation::kTactile).env.obs_dim(), 48);
  EXPECT_EQ(config::ablation_run_config(baselines::Ablation::kNaiveBlock).env.obs_dim(), 47);
  EXPECT_EQ(config::ablation_run_config(baselines::Ablation::kTwoPhase).env.obs_dim(), 44);
}

TEST(Ablation, TwoPhaseSchedule) {
  const baselines::TwoPhase tp = baselines::two_phase_schedule();
  EXPECT_EQ(env::phase_of(0, tp.schedule), 1);
  EXPECT_EQ(env::phase_of(69, tp.schedule), 1);
  EXPECT_EQ(env::phase_of(70, tp.schedule), 3);
  EXPECT_EQ(tp.weights.at(1).w_s, -10.0);
  EXPECT_EQ(tp.weights.at(3), reward::PhaseWeights{}.at(3));
  env::EnvConfig c;
  baselines::apply_ablation(baselines::Ablation::kTwoPhase, c);
  const env::EnvConfig once = c;
  baselines::apply_ablation(baselines::Ablation::kTwoPhase, c);
  EXPECT_EQ(config::to_json(c).dump(), config::to_json(once).dump());
}

// ---- checkpoint ----

TEST(Checkpoint, RoundTripIsBitwise) {
  const fs::path d = scratch_dir("ckpt");
  train::Trainer t(tiny(), 5);
  t.iterate();
  const ckpt::Checkpoint a = t.checkpoint();
  ckpt::save(a, (d / "a.ckpt").string());
  const ckpt::Checkpoint b = ckpt::load((d / "a.ckpt").string());
  ASSERT_EQ(a.params.size(), b.params.size());
  EXPECT_EQ(std::memcmp(a.params.data(), b.params.data(), a.params.size() * sizeof(float)), 0);
  EXPECT_EQ(std::memcmp(a.adam_m.data(), b.adam_m.data(), a.adam_m.size() * sizeof(float)), 0);
  EXPECT_EQ(std::memcmp(a.adam_v.data(), b.adam_v.data(), a.adam_v.size() * sizeof(float)), 0);
  EXPECT_EQ(std::memcmp(a.norm.mean.data(), b.norm.mean.data(), a.norm.mean.size() * sizeof(double)), 0);
  EXPECT_EQ(std::memcmp(a.norm.var.data(), b.norm.var.data(), a.norm.var.size() * sizeof(double)), 0);
  EXPECT_EQ(a.norm.count, b.norm.count);
  EXPECT_EQ(a.adam_step, b.adam_step);
  EXPECT_EQ(a.iteration, b.iteration);
  EXPECT_EQ(a.success_window, b.success_window);
  EXPECT_EQ(a.variant, b.variant);
  EXPECT_EQ(a.hidden, b.hidden);
}

TEST(Checkpoint, CorruptFilesAreRejected) {
  const fs::path d = scratch_dir("ckpt_bad");
  {
    std::ofstream(d / "magic.ckpt") << "NOTACKPT\n{}\n";
  }
  EXPECT_THROW(ckpt::load((d / "magic.ckpt").string()), CheckpointMismatch);
  EXPECT_THROW(ckpt::load((d / "missing.ckpt").string()), IoError);
  train::Trainer t(tiny(), 1);
  ckpt::save(t.checkpoint(), (d / "ok.ckpt").string());
  fs::resize_file(d / "ok.ckpt", fs::file_size(d / "ok.ckpt") - 8);
  EXPECT_THROW(ckpt::load((d / "ok.ckpt").string()), CheckpointMismatch);
}

// ---- trainer ----

TEST(Trainer, BufferShapeWithoutEarlyTermination) {
  config::RunConfig c = tiny();
  c.env.early_termination = false;
  train::Trainer t(c, 3);
  const train::Rollout r = t.collect(0);
  EXPECT_EQ(r.rows(), 3u * 120u);
  EXPECT_EQ(r.obs.size(), 3u * 120u * 44u);
  EXPECT_EQ(r.act.size(), 3u * 120u * 16u);
}

TEST(Trainer, CollectionIsDeterministic) {
  train::Trainer a(tiny(), 8);
  train::Trainer b(tiny(), 8);
  const train::Rollout ra = a.collect(0);
  const train::Rollout rb = b.collect(0);
  ASSERT_EQ(ra.obs.size(), rb.obs.size());
  EXPECT_EQ(std::memcmp(ra.obs.data(), rb.obs.data(), ra.obs.size() * sizeof(float)), 0);
  EXPECT_EQ(std::memcmp(ra.reward.data(), rb.reward.data(), ra.reward.size() * sizeof(double)), 0);
}

TEST(Trainer, ThreadedCollectionMatchesSerial) {
  WorkerPool pool(3);
  train::Trainer a(tiny(), 8);
  train::Trainer b(tiny(), 8, &pool);
  const train::Rollout ra = a.collect(1);
  const train::Rollout rb = b.collect(1);
  ASSERT_EQ(ra.reward.size(), rb.reward.size());
  EXPECT_EQ(std::memcmp(ra.reward.data(), rb.reward.data(), ra.reward.size() * sizeof(double)), 0);
  EXPECT_EQ(std::memcmp(ra.act.data(), rb.act.data(), ra.act.size() * sizeof(float)), 0);
}

TEST(Trainer, RewardBookkeeping) {
  train::Trainer t(tiny(), 2);
  const train::Rollout r = t.collect(0);
  double stored = 0.0, episodes = 0.0;
  for (double x : r.reward) stored += x;
  for (double x : r.episode_returns) episodes += x;
  EXPECT_NEAR(stored, episodes, 1e-9);
}

TEST(Trainer, SeedsGiveDistinctStreams) {
  std::set<double> firsts;
  for (std::uint64_t s = 0; s < 5; ++s) {
    train::Trainer t(tiny(), s);
    firsts.insert(t.collect(0).reward.front() + t.model().params[3]);
  }
  EXPECT_EQ(firsts.size(), 5u);
}

TEST(Trainer, ResumeContinuesBitwise) {
  const fs::path d = scratch_dir("resume");
  config::RunConfig c = tiny();
  c.ppo.iterations = 3;
  train::Trainer a(c, 4);
  a.iterate();
  a.iterate();
  ckpt::save(a.checkpoint(), (d / "mid.ckpt").string());
  a.iterate();

  train::Trainer b(c, 4);
  b.resume(ckpt::load((d / "mid.ckpt").string()));
  b.iterate();
  ASSERT_EQ(a.model().params.size(), b.model().params.size());
  EXPECT_EQ(std::memcmp(a.model().params.data(), b.model().params.data(),
                        a.model().params.size() * sizeof(float)),
            0);
  EXPECT_EQ(a.iteration(), b.iteration());
}

TEST(Trainer, ResumeRejectsAnotherLayout) {
  train::Trainer a(tiny(), 1);
  config::RunConfig c = tiny();
  c.ablation = "tactile";
  train::Trainer b(c, 1);
  EXPECT_THROW(b.resume(a.checkpoint()), CheckpointMismatch);
}

TEST(Trainer, RunWritesArtifacts) {
  const fs::path d = scratch_dir("run");
  config::RunConfig c = tiny();
  c.ppo.checkpoint_every = 1;
  const train::TrainSummary s = train::run_training(c, 0, d.string(), nullptr);
  EXPECT_TRUE(fs::exists(d / "metrics.jsonl"));
  EXPECT_TRUE(fs::exists(d / "curve.csv"));
  EXPECT_TRUE(fs::exists(d / "resolved_config.json"));
  EXPECT_TRUE(fs::exists(d / "ckpt_000001.ckpt"));
  EXPECT_TRUE(fs::exists(s.final_checkpoint));
  std::ifstream in(d / "metrics.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const json j = json::parse(line);
    EXPECT_EQ(j.at("iteration").get<int>(), ++lines);
    EXPECT_TRUE(j.contains("online_success"));
    EXPECT_TRUE(j.contains("approx_kl"));
    EXPECT_TRUE(j.contains("clip_frac"));
  }
  EXPECT_EQ(lines, 2);
}

TEST(Trainer, SnapshotReproducesTheRun) {
  const fs::path d1 = scratch_dir("snap1");
  const fs::path d2 = scratch_dir("snap2");
  train::run_training(tiny(), 6, d1.string(), nullptr);
  const config::RunConfig again = config::load((d1 / "resolved_config.json").string());
  train::run_training(again, 6, d2.string(), nullptr);
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  EXPECT_EQ(slurp(d1 / "metrics.jsonl"), slurp(d2 / "metrics.jsonl"));
}

// ---- evaluation ----

TEST(Eval, TeleportOracleAlwaysSucceeds) {
  class Teleport : public eval::Controller {
   public:
    void begin(env::Episode& ep, std::uint64_t) override {
      z0_ = ep.world().blocks[ep.target()].center.z;
    }
    eval::Command act(env::Episode& ep, const obs::Observation&) override {
      auto& b = ep.mutable_world().blocks[ep.target()];
      b.center.z = z0_ + 0.3;
      b.vel_x = b.vel_z = b.ang_vel = 0.0;
      return {};
    }

   private:
    double z0_ = 0.0;
  };
  eval::EvalOptions o;
  o.episodes = 5;
  const auto m = eval::evaluate([] { return std::make_unique<Teleport>(); }, env::EnvConfig{}, o);
  EXPECT_EQ(m.success_rate, 1.0);
}

TEST(Eval, UntrainedPolicyRarelySucceedsAndIsDeterministic) {
  train::Trainer t(tiny(), 0);
  auto policy = std::make_shared<eval::Policy>();
  policy->model = t.model();
  policy->norm = t.norm();
  eval::EvalOptions o;
  o.episodes = 20;
  o.seed = 3;
  const auto a = eval::evaluate(eval::policy_controller(policy, true), env::EnvConfig{}, o, policy);
  const auto b = eval::evaluate(eval::policy_controller(policy, true), env::EnvConfig{}, o, policy);
  expect_metrics_equal(a, b);
  EXPECT_LE(a.success_rate, 0.05);
  int per_target = 0, per_count = 0;
  for (int s : a.target_successes) per_target += s;
  for (int s : a.target_counts) per_count += s;
  EXPECT_EQ(per_target, a.successes);
  EXPECT_EQ(per_count, a.episodes);
  EXPECT_EQ(a.successes + a.isolating_failures + a.grasp_retrieve_failures + a.blowups, a.episodes);
}

TEST(Eval, IgnoresBoxRandomisation) {
  train::Trainer t(tiny(), 0);
  auto policy = std::make_shared<eval::Policy>();
  policy->model = t.model();
  policy->norm = t.norm();
  eval::EvalOptions o;
  o.episodes = 6;
  env::EnvConfig randomised;
  randomised.container_length_max = 0.40;
  randomised.row_shift_max = 0.06;
  const auto a = eval::evaluate(eval::policy_controller(policy, true), env::EnvConfig{}, o, policy);
  const auto b = eval::evaluate(eval::policy_controller(policy, true), randomised, o, policy);
  expect_metrics_equal(a, b);
  EXPECT_EQ(a.mean_reward, b.mean_reward);
}

TEST(Eval, VariantMismatchIsReported) {
  train::Trainer t(tiny(), 0);
  auto policy = std::make_shared<eval::Policy>();
  policy->model = t.model();
  policy->norm = t.norm();
  env::EnvConfig e;
  e.obs_variant = obs::Variant::kTactile;
  EXPECT_THROW(eval::evaluate(eval::policy_controller(policy, true), e, {}, policy), CheckpointMismatch);
}

TEST(Eval, CheckpointPathWithoutSuffix) {
  const fs::path d = scratch_dir("suffix");
  train::Trainer t(tiny(), 0);
  ckpt::save(t.checkpoint(), (d / "final.ckpt").string());
  EXPECT_EQ(eval::resolve_checkpoint_path((d / "final").string()), (d / "final.ckpt").string());
  EXPECT_THROW(eval::resolve_checkpoint_path((d / "nothing").string()), IoError);
}

TEST(Eval, SweepTableShape) {
  const fs::path d = scratch_dir("sweep");
  config::RunConfig c = tiny();
  c.eval.episodes = 2;
  train::Trainer t(c, 0);
  ckpt::save(t.checkpoint(), (d / "final.ckpt").string());
  const auto policy = eval::load_policy((d / "final").string());
  const auto row = eval::sweep("ours", policy, c, {0, 1});
  eval::write_sweep_table({row}, (d / "table.csv").string());
  eval::write_sweep_long({row}, {0, 1}, (d / "long.csv").string());
  std::ifstream in(d / "table.csv");
  std::string header, body;
  std::getline(in, header);
  std::getline(in, body);
  EXPECT_EQ(header, "method,1-out-of-1,1-out-of-2,1-out-of-5,1-out-of-10");
  EXPECT_EQ(std::count(body.begin(), body.end(), ','), 4);
  for (const auto& recs : row.records) {
    for (const auto& m : recs) EXPECT_EQ(m.obs_dim, 44);
  }
  // A single block is always the target.
  for (const auto& m : row.records[0]) EXPECT_EQ(m.target_counts.size(), 1u);
}

// ---- trajectories ----

TEST(Replay, FreshTrajectoryHasNoMismatches) {
  const fs::path d = scratch_dir("traj");
  eval::EvalOptions o;
  o.episodes = 2;
  o.trajectory_dir = (d / "t").string();
  const env::EnvConfig e;
  eval::evaluate(eval::scripted_controller(baselines::S2SSPConfig{}, e.physics), e, o);
  const auto r = traj::replay((d / "t" / "episode_00000.jsonl").string());
  EXPECT_GT(r.steps, 0);
  EXPECT_TRUE(r.mismatches.empty());
  EXPECT_TRUE(r.has_outcome);
  ASSERT_EQ(r.phase_starts.size(), 3u);
  EXPECT_EQ(r.phase_starts[0], 0);
  EXPECT_EQ(r.phase_starts[1], 45);
  EXPECT_EQ(r.phase_starts[2], 70);
}

TEST(Replay, CorruptedRewardIsReportedWithItsStep) {
  const fs::path d = scratch_dir("traj_bad");
  eval::EvalOptions o;
  o.episodes = 1;
  o.trajectory_dir = (d / "t").string();
  eval::evaluate(eval::scripted_controller(baselines::S2SSPConfig{}, physics::PhysicsParams{}),
                 env::EnvConfig{}, o);
  std::ifstream in(d / "t" / "episode_00000.jsonl");
  std::ofstream out(d / "bad.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    json j = json::parse(line);
    if (j.value("type", "") == "step" && j.at("step").get<int>() == 7) {
      j["reward"]["total"] = j["reward"]["total"].get<double>() + 1e-6;
    }
    out << j.dump() << "\n";
  }
  out.close();
  const auto r = traj::replay((d / "bad.jsonl").string());
  ASSERT_EQ(r.mismatches.size(), 1u);
  EXPECT_EQ(r.mismatches[0].step, 7);
}

TEST(Replay, EmptyFileReportsNoSteps) {
  const fs::path d = scratch_dir("traj_empty");
  std::ofstream(d / "empty.jsonl").close();
  const auto r = traj::replay((d / "empty.jsonl").string());
  EXPECT_EQ(r.steps, 0);
  std::ostringstream os;
  traj::print_report(r, os);
  EXPECT_NE(os.str().find("no steps"), std::string::npos);
}

// ---- scripted baseline ----

TEST(Baseline, IsDeterministic) {
  eval::EvalOptions o;
  o.episodes = 3;
  o.seed = 9;
  const env::EnvConfig e;
  const auto f = eval::scripted_controller(baselines::S2SSPConfig{}, e.physics);
  expect_metrics_equal(eval::evaluate(f, e, o), eval::evaluate(f, e, o));
}

TEST(Baseline, SingleBlockStillPinchesAndLifts) {
  env::EnvConfig e;
  e.n_blocks = 1;
  eval::EvalOptions o;
  o.episodes = 3;
  const auto m = eval::evaluate(eval::scripted_controller(baselines::S2SSPConfig{}, e.physics), e, o);
  EXPECT_EQ(m.successes, 3);
}

TEST(Baseline, TipIkMovesTowardTheGoal) {
  physics::PhysicsParams p;
  physics::HandState h;
  h.base = {0.1, 0.0, 0.3};
  h.joint_targets = h.joints;
  std::array<std::optional<physics::Vec3>, physics::kNumFingers> goals;
  const physics::Vec3 start = physics::fk_fingertips(h, p)[1];
  goals[1] = start + physics::Vec3{0.01, 0.0, 0.005};
  const physics::JointVector d = baselines::tip_ik_step(h, p, goals, 0.1);
  for (double v : d) EXPECT_LE(std::abs(v), 0.1 + 1e-12);
  for (int j = 0; j < 16; ++j) {
    if (j / 4 != 1) {
      EXPECT_EQ(d[j], 0.0);
    }
  }
  physics::HandState moved = h;
  for (int j = 0; j < 16; ++j) moved.joints[j] += d[j];
  const physics::Vec3 after = physics::fk_fingertips(moved, p)[1];
  EXPECT_LT((after - *goals[1]).norm(), (start - *goals[1]).norm());
}
