#include "sope/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "sope/errors.hpp"
#include "sope/rng.hpp"

namespace sope::ppo {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2 pi)
}

void Hyper::validate() const {
  if (!(gamma > 0.0 && gamma <= 1.0) || !(lambda > 0.0 && lambda <= 1.0)) {
    throw ConfigError("gamma and lambda must lie in (0, 1]");
  }
  if (!(clip > 0.0)) throw ConfigError("clip must be positive");
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  if (epochs < 1 || minibatches < 1 || n_envs < 1 || horizon < 1 || iterations < 0) {
    throw ConfigError("epochs, minibatches, n_envs and horizon must be positive");
  }
  if (hidden.empty()) throw ConfigError("at least one hidden layer is required");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("hidden sizes must be positive");
  }
  if (!(log_std_min < log_std_max)) throw ConfigError("bad log-std bounds");
  if (!(max_grad_norm > 0.0) || vf_coef < 0.0 || ent_coef < 0.0) {
    throw ConfigError("bad loss coefficients");
  }
  if (checkpoint_every < 0 || success_window < 1) throw ConfigError("bad bookkeeping intervals");
}

GaeResult gae(std::span<const double> rewards, std::span<const double> values,
              std::span<const double> dones, double bootstrap_value, double gamma,
              double lambda) {
  const std::size_t n = rewards.size();
  GaeResult out;
  out.advantages.assign(n, 0.0);
  out.returns.assign(n, 0.0);
  double next_adv = 0.0;
  double next_value = bootstrap_value;
  for (std::size_t k = n; k-- > 0;) {
    const double live = 1.0 - dones[k];
    const double delta = rewards[k] + gamma * next_value * live - values[k];
    next_adv = delta + gamma * lambda * live * next_adv;
    out.advantages[k] = next_adv;
    out.returns[k] = next_adv + values[k];
    next_value = values[k];
  }
  return out;
}

double clipped_policy_loss(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return -std::min(ratio * advantage, clipped * advantage);
}

double gaussian_log_prob(std::span<const double> mean, std::span<const double> log_std,
                         std::span<const double> action) {
  double lp = 0.0;
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = (action[i] - mean[i]) * std::exp(-log_std[i]);
    lp += -0.5 * z * z - log_std[i] - 0.5 * kLog2Pi;
  }
  return lp;
}

template <typename S>
ActorCritic<S>::ActorCritic(int obs_dim, const std::vector<int>& hidden) : hidden_(hidden) {
  std::vector<int> ps{obs_dim};
  ps.insert(ps.end(), hidden.begin(), hidden.end());
  std::vector<int> vs = ps;
  ps.push_back(kActDim);
  vs.push_back(1);
  policy_ = nn::Mlp<S>(ps);
  value_ = nn::Mlp<S>(vs);
  log_std_offset_ = policy_.num_params();
  value_offset_ = log_std_offset_ + kActDim;
  params.assign(value_offset_ + value_.num_params(), S(0));
}

template <typename S>
void ActorCritic<S>::init(std::uint64_t seed, double log_std_init) {
  std::mt19937_64 gen = rng::stream(seed, 0, 0, rng::Purpose::kInit);
  policy_.init(params.data(), gen, 0.01);
  value_.init(params.data() + value_offset_, gen, 1.0);
  for (int i = 0; i < kActDim; ++i) log_std()[i] = static_cast<S>(log_std_init);
}

template <typename S>
nn::Mat<S> ActorCritic<S>::mean(const nn::Mat<S>& obs, nn::MlpCache<S>* cache) const {
  return policy_.forward(params.data(), obs, cache);
}

template <typename S>
nn::Mat<S> ActorCritic<S>::value(const nn::Mat<S>& obs, nn::MlpCache<S>* cache) const {
  return value_.forward(params.data() + value_offset_, obs, cache);
}

template <typename S>
void ActorCritic<S>::clamp_log_std(double lo, double hi) {
  for (int i = 0; i < kActDim; ++i) {
    log_std()[i] = std::clamp(log_std()[i], static_cast<S>(lo), static_cast<S>(hi));
  }
}

template <typename S>
LossStats loss_and_grad(const ActorCritic<S>& model, const Batch<S>& batch, const Hyper& hyper,
                        std::vector<S>* grad) {
  const int m = static_cast<int>(batch.obs.cols());
  const int a_dim = ActorCritic<S>::kActDim;
  const S inv_m = S(1) / static_cast<S>(m);
  const S eps = static_cast<S>(hyper.clip);

  nn::MlpCache<S> pc;
  nn::MlpCache<S> vc;
  const nn::Mat<S> mu = model.mean(batch.obs, &pc);
  const nn::Mat<S> v = model.value(batch.obs, &vc);
  nn::Vec<S> ls(a_dim);
  for (int i = 0; i < a_dim; ++i) ls[i] = model.log_std()[i];
  const nn::Vec<S> inv_var = (S(-2) * ls).array().exp();

  const nn::Mat<S> diff = batch.act - mu;
  const S ls_sum = ls.sum();
  const S log_norm = static_cast<S>(0.5 * kLog2Pi * a_dim);

  LossStats st;
  nn::Vec<S> dlogp(m);
  double pg = 0.0, vl = 0.0, kl = 0.0, clipped = 0.0;
  for (int j = 0; j < m; ++j) {
    const S quad = (diff.col(j).array().square() * inv_var.array()).sum();
    const S logp = S(-0.5) * quad - ls_sum - log_norm;
    const S log_ratio = logp - batch.logp_old[j];
    const S ratio = std::exp(log_ratio);
    const S a = batch.adv[j];
    const S unclipped = ratio * a;
    const S clip_r = std::clamp(ratio, S(1) - eps, S(1) + eps);
    const S clipped_obj = clip_r * a;
    // The min picks the unclipped branch whenever it is not larger.
    const bool take_ratio = unclipped <= clipped_obj;
    pg += -static_cast<double>(take_ratio ? unclipped : clipped_obj);
    dlogp[j] = take_ratio ? -a * ratio * inv_m : S(0);
    if (std::abs(static_cast<double>(ratio) - 1.0) > hyper.clip) clipped += 1.0;
    kl += static_cast<double>(-log_ratio);
    const S e = v(0, j) - batch.ret[j];
    vl += static_cast<double>(e * e);
  }
  st.policy = pg / m;
  st.value = vl / m;
  st.entropy = static_cast<double>(ls_sum) + 0.5 * a_dim * (1.0 + kLog2Pi);
  st.total = st.policy + hyper.vf_coef * st.value - hyper.ent_coef * st.entropy;
  st.approx_kl = kl / m;
  st.clip_frac = clipped / m;
  if (!std::isfinite(st.total)) throw NonFiniteLoss("loss is not finite");

  if (grad) {
    grad->assign(model.params.size(), S(0));
    // d logp / d mu = diff / var; d logp / d ls = diff^2 / var - 1.
    nn::Mat<S> dmu = diff.array().colwise() * inv_var.array();
    dmu.array().rowwise() *= dlogp.transpose().array();
    model.policy_net().backward(model.params.data(), pc, dmu, grad->data());
    S* gls = grad->data() + model.log_std_offset();
    const nn::Mat<S> z2 = diff.array().square().colwise() * inv_var.array();
    for (int i = 0; i < a_dim; ++i) {
      S acc = S(0);
      for (int j = 0; j < m; ++j) acc += dlogp[j] * (z2(i, j) - S(1));
      gls[i] = acc - static_cast<S>(hyper.ent_coef);
    }
    nn::Mat<S> dv(1, m);
    const S vscale = static_cast<S>(2.0 * hyper.vf_coef) * inv_m;
    for (int j = 0; j < m; ++j) dv(0, j) = vscale * (v(0, j) - batch.ret[j]);
    model.value_net().backward(model.params.data() + model.value_offset(), vc, dv,
                               grad->data() + model.value_offset());
  }
  return st;
}

template <typename S>
void Adam<S>::step(std::vector<S>& params, const std::vector<S>& grad, const Hyper& h) {
  ++t;
  const double b1 = h.adam_beta1;
  const double b2 = h.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
  const S sb1 = static_cast<S>(b1), sb2 = static_cast<S>(b2);
  const S step = static_cast<S>(h.lr / c1);
  const S inv_c2 = static_cast<S>(1.0 / c2);
  const S eps = static_cast<S>(h.adam_eps);
  for (std::size_t i = 0; i < params.size(); ++i) {
    m[i] = sb1 * m[i] + (S(1) - sb1) * grad[i];
    v[i] = sb2 * v[i] + (S(1) - sb2) * grad[i] * grad[i];
    params[i] -= step * m[i] / (std::sqrt(v[i] * inv_c2) + eps);
  }
}

template <typename S>
double clip_grad_norm(std::vector<S>& grad, double max_norm) {
  double sq = 0.0;
  for (S g : grad) sq += static_cast<double>(g) * static_cast<double>(g);
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const S scale = static_cast<S>(max_norm / norm);
    for (S& g : grad) g *= scale;
  }
  return norm;
}

void RunningNorm::update(std::span<const double> rows) {
  const std::size_t d = mean.size();
  if (d == 0 || rows.empty()) return;
  const std::size_t n = rows.size() / d;
  std::vector<double> bm(d, 0.0), bv(d, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) bm[i] += rows[r * d + i];
  }
  for (double& x : bm) x /= static_cast<double>(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      const double e = rows[r * d + i] - bm[i];
      bv[i] += e * e;
    }
  }
  for (double& x : bv) x /= static_cast<double>(n);
  // Parallel-variance merge of (count, mean, var) with (n, bm, bv).
  const double tot = count + static_cast<double>(n);
  for (std::size_t i = 0; i < d; ++i) {
    const double delta = bm[i] - mean[i];
    const double m2 = var[i] * count + bv[i] * n + delta * delta * count * n / tot;
    mean[i] += delta * n / tot;
    var[i] = m2 / tot;
  }
  count = tot;
}

void RunningNorm::normalize(std::span<const double> in, std::span<double> out) const {
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double z = (in[i] - mean[i]) / std::sqrt(var[i] + 1e-8);
    out[i] = std::clamp(z, -clip, clip);
  }
}

template class ActorCritic<float>;
template class ActorCritic<double>;
template LossStats loss_and_grad<float>(const ActorCritic<float>&, const Batch<float>&,
                                        const Hyper&, std::vector<float>*);
template LossStats loss_and_grad<double>(const ActorCritic<double>&, const Batch<double>&,
                                         const Hyper&, std::vector<double>*);
template class Adam<float>;
template class Adam<double>;
template double clip_grad_norm<float>(std::vector<float>&, double);
template double clip_grad_norm<double>(std::vector<double>&, double);

}  // namespace sope::ppo
