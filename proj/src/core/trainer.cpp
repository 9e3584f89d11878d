#include "sope/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <ostream>

#include "sope/errors.hpp"
#include "sope/rng.hpp"

namespace sope::train {

namespace fs = std::filesystem;
using nlohmann::json;

json to_json(const IterationMetrics& m) {
  return {{"iteration", m.iteration},
          {"env_steps", m.env_steps},
          {"episodes", m.episodes},
          {"mean_return", m.mean_return},
          {"iteration_success", m.iteration_success},
          {"online_success", m.online_success},
          {"loss", m.loss.total},
          {"policy_loss", m.loss.policy},
          {"value_loss", m.loss.value},
          {"entropy", m.loss.entropy},
          {"approx_kl", m.loss.approx_kl},
          {"clip_frac", m.loss.clip_frac},
          {"grad_norm", m.grad_norm},
          {"log_std_mean", m.log_std_mean},
          {"batch_size", m.batch_size},
          {"blowups", m.blowups}};
}

Trainer::Trainer(config::RunConfig cfg, std::uint64_t seed, WorkerPool* pool)
    : cfg_(std::move(cfg)), seed_(seed), pool_(pool) {
  config::finalize(cfg_);
  const int d = cfg_.env.obs_dim();
  model_ = ppo::ActorCritic<float>(d, cfg_.ppo.hidden);
  model_.init(seed_, cfg_.ppo.log_std_init);
  adam_ = ppo::Adam<float>(model_.params.size());
  norm_ = ppo::RunningNorm(d);
}

void Trainer::resume(const ckpt::Checkpoint& c) {
  if (c.obs_dim != cfg_.env.obs_dim() || c.variant != cfg_.env.obs_variant) {
    throw CheckpointMismatch("checkpoint observation layout differs from the config");
  }
  if (c.hidden != cfg_.ppo.hidden || c.params.size() != model_.params.size()) {
    throw CheckpointMismatch("checkpoint network shape differs from the config");
  }
  model_.params = c.params;
  adam_.m = c.adam_m;
  adam_.v = c.adam_v;
  adam_.t = c.adam_step;
  norm_ = c.norm;
  window_.assign(c.success_window.begin(), c.success_window.end());
  iteration_ = c.iteration;
  episodes_ = c.episodes;
  env_steps_ = c.env_steps;
  seed_ = c.seed;
}

ckpt::Checkpoint Trainer::checkpoint() const {
  ckpt::Checkpoint c;
  c.obs_dim = cfg_.env.obs_dim();
  c.variant = cfg_.env.obs_variant;
  c.hidden = cfg_.ppo.hidden;
  c.params = model_.params;
  c.adam_m = adam_.m;
  c.adam_v = adam_.v;
  c.adam_step = adam_.t;
  c.iteration = iteration_;
  c.seed = seed_;
  c.obs_norm = cfg_.ppo.obs_norm;
  c.norm = norm_;
  c.success_window.assign(window_.begin(), window_.end());
  c.episodes = episodes_;
  c.env_steps = env_steps_;
  return c;
}

double Trainer::online_success() const {
  if (window_.empty()) return 0.0;
  return static_cast<double>(std::accumulate(window_.begin(), window_.end(), 0)) /
         static_cast<double>(window_.size());
}

Rollout Trainer::collect(int iteration) const {
  const int n_envs = cfg_.ppo.n_envs;
  const int d = cfg_.env.obs_dim();
  const int a_dim = ppo::ActorCritic<float>::kActDim;
  const bool use_norm = cfg_.ppo.obs_norm;

  struct Slot {
    std::optional<env::Episode> ep;
    std::mt19937_64 gen;
    std::vector<double> obs;  // current raw observation
    Rollout part;
    double ret = 0.0;
    bool success = false;
  };
  std::vector<Slot> slots(n_envs);
  auto reset_one = [&](std::size_t e) {
    Slot& s = slots[e];
    s.ep.emplace(cfg_.env);
    s.obs = s.ep->reset(rng::derive(seed_, iteration, e, rng::Purpose::kReset)).values;
    s.gen = rng::stream(seed_, iteration, e, rng::Purpose::kAction);
  };
  if (pool_) {
    pool_->parallel_for(n_envs, reset_one);
  } else {
    for (int e = 0; e < n_envs; ++e) reset_one(e);
  }

  std::vector<double> ls(a_dim);
  for (int i = 0; i < a_dim; ++i) ls[i] = model_.log_std()[i];
  std::vector<int> active;
  std::vector<std::vector<double>> actions(n_envs, std::vector<double>(a_dim));
  std::vector<double> normed(d);
  for (int t = 0; t < cfg_.ppo.horizon; ++t) {
    active.clear();
    for (int e = 0; e < n_envs; ++e) {
      if (!slots[e].ep->done()) active.push_back(e);
    }
    if (active.empty()) break;
    const int k = static_cast<int>(active.size());
    nn::Mat<float> x(d, k);
    for (int c = 0; c < k; ++c) {
      Slot& s = slots[active[c]];
      if (use_norm) {
        norm_.normalize(s.obs, normed);
      } else {
        normed = s.obs;
      }
      for (int i = 0; i < d; ++i) x(i, c) = static_cast<float>(normed[i]);
    }
    const nn::Mat<float> mu = model_.mean(x);
    const nn::Mat<float> v = model_.value(x);
    for (int c = 0; c < k; ++c) {
      Slot& s = slots[active[c]];
      std::normal_distribution<double> normal(0.0, 1.0);
      std::vector<double> mean(a_dim);
      auto& a = actions[active[c]];
      for (int i = 0; i < a_dim; ++i) {
        mean[i] = mu(i, c);
        a[i] = static_cast<float>(mean[i] + std::exp(ls[i]) * normal(s.gen));
      }
      Rollout& p = s.part;
      for (int i = 0; i < d; ++i) p.obs.push_back(x(i, c));
      p.raw_obs.insert(p.raw_obs.end(), s.obs.begin(), s.obs.end());
      for (int i = 0; i < a_dim; ++i) p.act.push_back(static_cast<float>(a[i]));
      p.logp.push_back(ppo::gaussian_log_prob(mean, ls, a));
      p.value.push_back(v(0, c));
      p.phase.push_back(s.ep->phase());
      p.env_index.push_back(active[c]);
    }
    auto step_one = [&](std::size_t c) {
      Slot& s = slots[active[c]];
      const env::StepResult r = s.ep->step(actions[active[c]]);
      s.obs = r.observation.values;
      s.part.reward.push_back(r.reward);
      s.part.done.push_back(r.done ? 1.0 : 0.0);
      s.ret += r.reward;
    };
    if (pool_) {
      pool_->parallel_for(k, step_one);
    } else {
      for (int c = 0; c < k; ++c) step_one(c);
    }
  }

  Rollout out;
  out.obs_dim = d;
  for (int e = 0; e < n_envs; ++e) {
    Slot& s = slots[e];
    Rollout& p = s.part;
    if (!p.done.empty()) p.done.back() = 1.0;  // the horizon ends the episode
    const ppo::GaeResult g =
        ppo::gae(p.reward, p.value, p.done, 0.0, cfg_.ppo.gamma, cfg_.ppo.lambda);
    auto append = [](auto& dst, const auto& src) { dst.insert(dst.end(), src.begin(), src.end()); };
    append(out.obs, p.obs);
    append(out.raw_obs, p.raw_obs);
    append(out.act, p.act);
    append(out.logp, p.logp);
    append(out.value, p.value);
    append(out.reward, p.reward);
    append(out.done, p.done);
    append(out.phase, p.phase);
    append(out.env_index, p.env_index);
    append(out.advantages, g.advantages);
    append(out.returns, g.returns);
    out.episode_returns.push_back(s.ret);
    out.episode_success.push_back(s.ep->outcome().success);
    out.episode_blowup.push_back(s.ep->outcome().failure == env::FailureClass::kBlowup);
  }
  return out;
}

IterationMetrics Trainer::iterate() {
  const Rollout ro = collect(iteration_);
  const int d = ro.obs_dim;
  const int a_dim = ppo::ActorCritic<float>::kActDim;
  const int n = static_cast<int>(ro.rows());

  // Advantage normalisation over the whole batch.
  double mean = 0.0;
  for (double a : ro.advantages) mean += a;
  mean /= n;
  double var = 0.0;
  for (double a : ro.advantages) var += (a - mean) * (a - mean);
  const double sd = std::sqrt(var / n);

  ppo::Batch<float> full;
  full.obs = Eigen::Map<const nn::Mat<float>>(ro.obs.data(), d, n);
  full.act = Eigen::Map<const nn::Mat<float>>(ro.act.data(), a_dim, n);
  full.logp_old.resize(n);
  full.adv.resize(n);
  full.ret.resize(n);
  for (int i = 0; i < n; ++i) {
    full.logp_old[i] = static_cast<float>(ro.logp[i]);
    full.adv[i] = static_cast<float>((ro.advantages[i] - mean) / (sd + 1e-8));
    full.ret[i] = static_cast<float>(ro.returns[i]);
  }

  IterationMetrics m;
  const ppo::Hyper& h = cfg_.ppo;
  std::vector<int> perm(n);
  std::vector<float> grad;
  ppo::LossStats acc;
  double gn_acc = 0.0;
  int updates = 0;
  for (int epoch = 0; epoch < h.epochs; ++epoch) {
    std::iota(perm.begin(), perm.end(), 0);
    std::mt19937_64 gen = rng::stream(seed_, iteration_, epoch, rng::Purpose::kMinibatch);
    std::shuffle(perm.begin(), perm.end(), gen);
    for (int mb = 0; mb < h.minibatches; ++mb) {
      const int lo = static_cast<int>(static_cast<long long>(n) * mb / h.minibatches);
      const int hi = static_cast<int>(static_cast<long long>(n) * (mb + 1) / h.minibatches);
      const int sz = hi - lo;
      if (sz <= 0) continue;
      ppo::Batch<float> b;
      b.obs.resize(d, sz);
      b.act.resize(a_dim, sz);
      b.logp_old.resize(sz);
      b.adv.resize(sz);
      b.ret.resize(sz);
      for (int c = 0; c < sz; ++c) {
        const int j = perm[lo + c];
        b.obs.col(c) = full.obs.col(j);
        b.act.col(c) = full.act.col(j);
        b.logp_old[c] = full.logp_old[j];
        b.adv[c] = full.adv[j];
        b.ret[c] = full.ret[j];
      }
      const ppo::LossStats st = ppo::loss_and_grad(model_, b, h, &grad);
      const double gn = ppo::clip_grad_norm(grad, h.max_grad_norm);
      adam_.step(model_.params, grad, h);
      model_.clamp_log_std(h.log_std_min, h.log_std_max);
      if (epoch + 1 == h.epochs) {
        acc.total += st.total;
        acc.policy += st.policy;
        acc.value += st.value;
        acc.entropy += st.entropy;
        acc.approx_kl += st.approx_kl;
        acc.clip_frac += st.clip_frac;
        gn_acc += gn;
        ++updates;
      }
    }
  }
  if (updates > 0) {
    acc.total /= updates;
    acc.policy /= updates;
    acc.value /= updates;
    acc.entropy /= updates;
    acc.approx_kl /= updates;
    acc.clip_frac /= updates;
    gn_acc /= updates;
  }

  if (h.obs_norm) norm_.update(ro.raw_obs);

  double ret = 0.0;
  int succ = 0;
  for (std::size_t e = 0; e < ro.episode_returns.size(); ++e) {
    ret += ro.episode_returns[e];
    succ += ro.episode_success[e] ? 1 : 0;
    blowups_ += ro.episode_blowup[e] ? 1 : 0;
    window_.push_back(ro.episode_success[e] ? 1 : 0);
    while (static_cast<int>(window_.size()) > h.success_window) window_.pop_front();
  }
  ++iteration_;
  episodes_ += static_cast<std::int64_t>(ro.episode_returns.size());
  env_steps_ += n;

  m.iteration = iteration_;
  m.env_steps = env_steps_;
  m.episodes = episodes_;
  m.mean_return = ret / static_cast<double>(ro.episode_returns.size());
  m.iteration_success = static_cast<double>(succ) / static_cast<double>(ro.episode_returns.size());
  m.online_success = online_success();
  m.loss = acc;
  m.grad_norm = gn_acc;
  double lsm = 0.0;
  for (int i = 0; i < a_dim; ++i) lsm += model_.log_std()[i];
  m.log_std_mean = lsm / a_dim;
  m.batch_size = n;
  m.blowups = blowups_;
  return m;
}

TrainSummary run_training(const config::RunConfig& cfg_in, std::uint64_t seed,
                          const std::string& out_dir, std::ostream* progress,
                          const std::optional<std::string>& resume_path) {
  config::RunConfig cfg = cfg_in;
  config::finalize(cfg);
  fs::create_directories(out_dir);
  config::RunConfig snapshot = cfg;
  snapshot.mode = "train";
  snapshot.seeds = {seed};
  snapshot.out_dir = out_dir;
  config::save(snapshot, (fs::path(out_dir) / "resolved_config.json").string());

  const int threads = threads_from_env();
  WorkerPool pool(threads);
  Trainer trainer(cfg, seed, threads > 1 ? &pool : nullptr);

  const fs::path metrics_path = fs::path(out_dir) / "metrics.jsonl";
  const fs::path curve_path = fs::path(out_dir) / "curve.csv";
  std::vector<json> kept;
  if (resume_path) {
    trainer.resume(ckpt::load(*resume_path));
    std::ifstream in(metrics_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line, nullptr, false);
      if (!j.is_discarded() && j.value("iteration", 0) <= trainer.iteration()) kept.push_back(j);
    }
  }
  std::ofstream metrics(metrics_path, std::ios::trunc);
  std::ofstream curve(curve_path, std::ios::trunc);
  if (!metrics || !curve) throw IoError("cannot write metrics in " + out_dir);
  curve << "iteration,env_steps,episodes,online_success,mean_return\n";
  auto curve_row = [&](const json& j) {
    curve << j.at("iteration").get<int>() << "," << j.at("env_steps").get<std::int64_t>() << ","
          << j.at("episodes").get<std::int64_t>() << "," << j.at("online_success").get<double>()
          << "," << j.at("mean_return").get<double>() << "\n";
  };
  for (const json& j : kept) {
    metrics << j.dump() << "\n";
    curve_row(j);
  }

  TrainSummary summary;
  auto save_ckpt = [&](const std::string& name) {
    const std::string p = (fs::path(out_dir) / name).string();
    ckpt::save(trainer.checkpoint(), p);
    return p;
  };
  while (trainer.iteration() < cfg.ppo.iterations) {
    const IterationMetrics m = trainer.iterate();
    const json j = to_json(m);
    metrics << j.dump() << "\n";
    metrics.flush();
    curve_row(j);
    curve.flush();
    summary.last = m;
    if (m.episodes >= kBlowupMinEpisodes && m.blowups * 100 > m.episodes) {
      throw NumericalBlowup("physics blew up in " + std::to_string(m.blowups) + " of " +
                            std::to_string(m.episodes) + " training episodes");
    }
    if (progress) {
      *progress << "iter " << m.iteration << " return " << m.mean_return << " online_success "
                << m.online_success << " kl " << m.loss.approx_kl << "\n";
      progress->flush();
    }
    if (cfg.ppo.checkpoint_every > 0 && m.iteration % cfg.ppo.checkpoint_every == 0) {
      char name[32];
      std::snprintf(name, sizeof(name), "ckpt_%06d.ckpt", m.iteration);
      save_ckpt(name);
    }
  }
  summary.final_checkpoint = save_ckpt("final.ckpt");
  return summary;
}

}  // namespace sope::train
