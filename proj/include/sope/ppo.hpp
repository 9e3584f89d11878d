#pragma once

// Clipped-surrogate policy optimisation: GAE, Gaussian actor-critic on a flat
// parameter vector, loss with analytic gradient, Adam, running observation
// normalisation.

#include <cstdint>
#include <span>
#include <vector>

#include "sope/mlp.hpp"

namespace sope::ppo {

struct Hyper {
  double gamma = 0.99;
  double lambda = 0.95;
  double clip = 0.2;
  double lr = 3e-4;
  int epochs = 5;
  int minibatches = 4;
  double vf_coef = 0.5;
  double ent_coef = 0.0;
  double max_grad_norm = 1.0;
  int n_envs = 64;
  int horizon = 120;
  int iterations = 3000;
  std::vector<int> hidden{256, 128, 64};
  double log_std_init = -1.0;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  bool obs_norm = true;
  int checkpoint_every = 100;
  int success_window = 100;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct GaeResult {
  std::vector<double> advantages;
  std::vector<double> returns;
};

// done[t] = 1 cuts the recursion after step t.
GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const double> dones, double bootstrap_value, double gamma,
              double lambda);

double clipped_policy_loss(double ratio, double advantage, double eps);

// log N(action; mean, diag(exp(log_std))^2)
double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action);

template <typename S>
class ActorCritic {
 public:
  static constexpr int kActDim = 16;

  ActorCritic() = default;
  ActorCritic(int obs_dim, const std::vector<int>& hidden);

  int obs_dim() const { return policy_.in_dim(); }
  int num_params() const { return static_cast<int>(params.size()); }
  const std::vector<int>& hidden() const { return hidden_; }

  void init(std::uint64_t seed, double log_std_init);

  nn::Mat<S> mean(const nn::Mat<S>& obs, nn::MlpCache<S>* cache = nullptr) const;
  nn::Mat<S> value(const nn::Mat<S>& obs, nn::MlpCache<S>* cache = nullptr) const;
  S* log_std() { return params.data() + log_std_offset_; }
  const S* log_std() const { return params.data() + log_std_offset_; }
  void clamp_log_std(double lo, double hi);

  int policy_offset() const { return 0; }
  int log_std_offset() const { return log_std_offset_; }
  int value_offset() const { return value_offset_; }
  const nn::Mlp<S>& policy_net() const { return policy_; }
  const nn::Mlp<S>& value_net() const { return value_; }

  std::vector<S> params;

 private:
  std::vector<int> hidden_;
  nn::Mlp<S> policy_;
  nn::Mlp<S> value_;
  int log_std_offset_ = 0;
  int value_offset_ = 0;
};

template <typename S>
struct Batch {
  nn::Mat<S> obs;  // obs_dim x M, already normalised
  nn::Mat<S> act;  // 16 x M
  nn::Vec<S> logp_old;
  nn::Vec<S> adv;
  nn::Vec<S> ret;
};

struct LossStats {
  double total = 0.0;
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_frac = 0.0;
};

// Total loss = policy + vf_coef * mean (V - R)^2 - ent_coef * entropy.
// Writes the gradient into `grad` (resized, overwritten) when non-null.
template <typename S>
LossStats loss_and_grad(const ActorCritic<S>& model, const Batch<S>& batch, const Hyper& hyper,
                        std::vector<S>* grad);

template <typename S>
class Adam {
 public:
  Adam() = default;
  explicit Adam(std::size_t n) : m(n, S(0)), v(n, S(0)) {}

  void step(std::vector<S>& params, const std::vector<S>& grad, const Hyper& h);

  std::vector<S> m;
  std::vector<S> v;
  std::int64_t t = 0;
};

// Global L2 norm of `grad`; scales it down to `max_norm` when larger.
template <typename S>
double clip_grad_norm(std::vector<S>& grad, double max_norm);

struct RunningNorm {
  std::vector<double> mean;
  std::vector<double> var;
  double count = 0.0;
  double clip = 10.0;

  RunningNorm() = default;
  explicit RunningNorm(int dim) : mean(dim, 0.0), var(dim, 1.0) {}

  // Merge a batch of rows (each `mean.size()` long) into the statistics.
  void update(std::span<const double> rows);
  void normalize(std::span<const double> in, std::span<double> out) const;
};

}  // namespace sope::ppo
