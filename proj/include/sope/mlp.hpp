#pragma once

// Dense tanh MLP over a caller-owned flat parameter array. Layer l stores its
// weight matrix (out x in, column-major) followed by its bias.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace sope::nn {

template <typename S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <typename S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

template <typename S>
struct MlpCache {
  std::vector<Mat<S>> acts;  // acts[0] = input, acts[l + 1] = output of layer l
};

template <typename S>
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<int> sizes) : sizes_(std::move(sizes)) {
    offsets_.push_back(0);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      offsets_.push_back(offsets_.back() + sizes_[l + 1] * (sizes_[l] + 1));
    }
  }

  int num_params() const { return offsets_.empty() ? 0 : offsets_.back(); }
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }
  const std::vector<int>& sizes() const { return sizes_; }

  // Uniform fan-in init; the last layer is scaled by `out_scale`.
  void init(S* p, std::mt19937_64& gen, double out_scale) const {
    for (int l = 0; l < num_layers(); ++l) {
      const int in = sizes_[l];
      const int out = sizes_[l + 1];
      const double bound = std::sqrt(6.0 / (in + out)) * (l + 1 == num_layers() ? out_scale : 1.0);
      std::uniform_real_distribution<double> u(-bound, bound);
      S* w = p + offsets_[l];
      for (int i = 0; i < out * in; ++i) w[i] = static_cast<S>(u(gen));
      for (int i = 0; i < out; ++i) w[out * in + i] = S(0);
    }
  }

  Mat<S> forward(const S* p, const Mat<S>& x, MlpCache<S>* cache) const {
    Mat<S> h = x;
    if (cache) {
      cache->acts.clear();
      cache->acts.push_back(x);
    }
    for (int l = 0; l < num_layers(); ++l) {
      const auto w = weight(p, l);
      const auto b = bias(p, l);
      Mat<S> z = w * h;
      z.colwise() += b;
      if (l + 1 < num_layers()) z = z.array().tanh().matrix();
      h = std::move(z);
      if (cache) cache->acts.push_back(h);
    }
    return h;
  }

  // Accumulates d loss / d params into `g` given d loss / d output.
  void backward(const S* p, const MlpCache<S>& cache, const Mat<S>& dout, S* g) const {
    Mat<S> d = dout;
    for (int l = num_layers() - 1; l >= 0; --l) {
      if (l + 1 < num_layers()) {
        const Mat<S>& a = cache.acts[l + 1];
        d.array() *= (S(1) - a.array().square());
      }
      const Mat<S>& in = cache.acts[l];
      Eigen::Map<Mat<S>> gw(g + offsets_[l], sizes_[l + 1], sizes_[l]);
      Eigen::Map<Vec<S>> gb(g + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]);
      gw.noalias() += d * in.transpose();
      gb.noalias() += d.rowwise().sum();
      if (l > 0) d = weight(p, l).transpose() * d;
    }
  }

 private:
  Eigen::Map<const Mat<S>> weight(const S* p, int l) const {
    return Eigen::Map<const Mat<S>>(p + offsets_[l], sizes_[l + 1], sizes_[l]);
  }
  Eigen::Map<const Vec<S>> bias(const S* p, int l) const {
    return Eigen::Map<const Vec<S>>(p + offsets_[l] + sizes_[l + 1] * sizes_[l], sizes_[l + 1]);
  }

  std::vector<int> sizes_;
  std::vector<int> offsets_;
};

}  // namespace sope::nn
