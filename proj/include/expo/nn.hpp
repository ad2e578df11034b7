#pragma once

// Minimal dense/conv layers with hand-written backward passes. Every network
// owns one flat parameter vector and a matching gradient vector; layers only
// hold offsets into them.

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

namespace expo::nn {

template <class T>
using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;
template <class T>
using MapR = Eigen::Map<MatR<T>>;
template <class T>
using CMapR = Eigen::Map<const MatR<T>>;

struct ConvSpec {
  int filters = 32;
  int kernel = 8;
  int stride = 4;
};

struct NetworkSpec {
  int in_channels = 4;
  int in_size = 84;
  std::vector<ConvSpec> convs{{32, 8, 4}, {64, 4, 2}, {64, 3, 1}};
  int hidden = 512;

  // A few hundred parameters per network on 8x8 input; used by gradient checks.
  static NetworkSpec miniature() {
    NetworkSpec s;
    s.in_size = 8;
    s.convs = {{4, 3, 2}, {4, 2, 1}};
    s.hidden = 16;
    return s;
  }

  bool operator==(const NetworkSpec& o) const {
    if (in_channels != o.in_channels || in_size != o.in_size || hidden != o.hidden || convs.size() != o.convs.size())
      return false;
    for (std::size_t i = 0; i < convs.size(); ++i) {
      if (convs[i].filters != o.convs[i].filters || convs[i].kernel != o.convs[i].kernel ||
          convs[i].stride != o.convs[i].stride)
        return false;
    }
    return true;
  }
};

// Parameter block layout helper.
class Layout {
 public:
  std::size_t take(std::size_t n) {
    const std::size_t off = size_;
    size_ += n;
    return off;
  }
  std::size_t size() const { return size_; }

 private:
  std::size_t size_ = 0;
};

template <class T>
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, Layout& layout) : in_(in), out_(out) {
    w_ = layout.take(static_cast<std::size_t>(in) * out);
    b_ = layout.take(out);
  }

  int in() const { return in_; }
  int out() const { return out_; }

  void init(T* params, std::mt19937_64& rng, double bound = -1.0) const {
    const double lim = bound > 0.0 ? bound : 1.0 / std::sqrt(static_cast<double>(in_));
    std::uniform_real_distribution<double> u(-lim, lim);
    for (std::size_t i = 0; i < static_cast<std::size_t>(in_) * out_; ++i) params[w_ + i] = static_cast<T>(u(rng));
    for (int i = 0; i < out_; ++i) params[b_ + i] = static_cast<T>(u(rng));
  }

  // x: [B, in] -> y: [B, out]
  void forward(const T* params, const MatR<T>& x, MatR<T>& y) const {
    CMapR<T> w(params + w_, out_, in_);
    Eigen::Map<const Vec<T>> b(params + b_, out_);
    y.noalias() = x * w.transpose();
    y.rowwise() += b.transpose();
  }

  // Accumulates parameter gradients when grads != nullptr; writes dx when given.
  void backward(const T* params, T* grads, const MatR<T>& x, const MatR<T>& dy, MatR<T>* dx) const {
    if (grads) {
      MapR<T> gw(grads + w_, out_, in_);
      Eigen::Map<Vec<T>> gb(grads + b_, out_);
      gw.noalias() += dy.transpose() * x;
      gb += dy.colwise().sum().transpose();
    }
    if (dx) {
      CMapR<T> w(params + w_, out_, in_);
      dx->noalias() = dy * w;
    }
  }

 private:
  int in_ = 0;
  int out_ = 0;
  std::size_t w_ = 0;
  std::size_t b_ = 0;
};

template <class T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(int in_c, int in_h, int in_w, const ConvSpec& spec, Layout& layout)
      : in_c_(in_c), in_h_(in_h), in_w_(in_w), out_c_(spec.filters), k_(spec.kernel), s_(spec.stride) {
    if (in_h < k_ || in_w < k_) throw std::invalid_argument("convolution kernel larger than its input");
    out_h_ = (in_h - k_) / s_ + 1;
    out_w_ = (in_w - k_) / s_ + 1;
    w_ = layout.take(static_cast<std::size_t>(out_c_) * patch());
    b_ = layout.take(out_c_);
  }

  int patch() const { return in_c_ * k_ * k_; }
  int positions() const { return out_h_ * out_w_; }
  int in_size() const { return in_c_ * in_h_ * in_w_; }
  int out_size() const { return out_c_ * positions(); }
  int out_channels() const { return out_c_; }
  int out_h() const { return out_h_; }
  int out_w() const { return out_w_; }

  void init(T* params, std::mt19937_64& rng) const {
    const double lim = 1.0 / std::sqrt(static_cast<double>(patch()));
    std::uniform_real_distribution<double> u(-lim, lim);
    for (std::size_t i = 0; i < static_cast<std::size_t>(out_c_) * patch(); ++i)
      params[w_ + i] = static_cast<T>(u(rng));
    for (int i = 0; i < out_c_; ++i) params[b_ + i] = static_cast<T>(u(rng));
  }

  // x: [B, C*H*W] (CHW rows) -> y: [B, out_c*oh*ow]; cols keeps the im2col
  // matrices ([B*patch, positions]) for backward.
  void forward(const T* params, const MatR<T>& x, MatR<T>& y, MatR<T>& cols) const {
    const int batch = static_cast<int>(x.rows());
    const int kk = patch();
    const int np = positions();
    cols.resize(static_cast<Eigen::Index>(batch) * kk, np);
    y.resize(batch, out_size());
    CMapR<T> w(params + w_, out_c_, kk);
    Eigen::Map<const Vec<T>> b(params + b_, out_c_);
    for (int n = 0; n < batch; ++n) {
      auto c = cols.middleRows(static_cast<Eigen::Index>(n) * kk, kk);
      im2col(x.row(n).data(), c);
      MapR<T> yn(y.row(n).data(), out_c_, np);
      yn.noalias() = w * c;
      yn.colwise() += b;
    }
  }

  void backward(const T* params, T* grads, const MatR<T>& cols, const MatR<T>& dy, MatR<T>* dx) const {
    const int batch = static_cast<int>(dy.rows());
    const int kk = patch();
    const int np = positions();
    CMapR<T> w(params + w_, out_c_, kk);
    MapR<T> gw(grads + w_, out_c_, kk);
    Eigen::Map<Vec<T>> gb(grads + b_, out_c_);
    MatR<T> dcols;
    if (dx) dx->setZero(batch, in_size());
    for (int n = 0; n < batch; ++n) {
      CMapR<T> dyn(dy.row(n).data(), out_c_, np);
      const auto c = cols.middleRows(static_cast<Eigen::Index>(n) * kk, kk);
      gw.noalias() += dyn * c.transpose();
      gb += dyn.rowwise().sum();
      if (dx) {
        dcols.noalias() = w.transpose() * dyn;
        col2im(dcols, dx->row(n).data());
      }
    }
  }

 private:
  template <class Block>
  void im2col(const T* img, Block& cols) const {
    for (int c = 0; c < in_c_; ++c) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          T* row = &cols((c * k_ + ky) * k_ + kx, 0);
          for (int oy = 0; oy < out_h_; ++oy) {
            const T* src = img + (static_cast<std::size_t>(c) * in_h_ + oy * s_ + ky) * in_w_ + kx;
            for (int ox = 0; ox < out_w_; ++ox) row[oy * out_w_ + ox] = src[ox * s_];
          }
        }
      }
    }
  }

  void col2im(const MatR<T>& dcols, T* dimg) const {
    for (int c = 0; c < in_c_; ++c) {
      for (int ky = 0; ky < k_; ++ky) {
        for (int kx = 0; kx < k_; ++kx) {
          const T* row = &dcols((c * k_ + ky) * k_ + kx, 0);
          for (int oy = 0; oy < out_h_; ++oy) {
            T* dst = dimg + (static_cast<std::size_t>(c) * in_h_ + oy * s_ + ky) * in_w_ + kx;
            for (int ox = 0; ox < out_w_; ++ox) dst[ox * s_] += row[oy * out_w_ + ox];
          }
        }
      }
    }
  }

  int in_c_ = 0, in_h_ = 0, in_w_ = 0;
  int out_c_ = 0, k_ = 0, s_ = 1;
  int out_h_ = 0, out_w_ = 0;
  std::size_t w_ = 0, b_ = 0;
};

template <class T>
void relu_inplace(MatR<T>& x) {
  x = x.cwiseMax(T(0));
}

// dy masked by the post-activation output y.
template <class T>
void relu_backward(const MatR<T>& y, MatR<T>& dy) {
  dy = (y.array() > T(0)).select(dy, T(0));
}

// Stack of conv + ReLU layers producing flattened features.
template <class T>
class ConvTrunk {
 public:
  struct Cache {
    std::vector<MatR<T>> cols;
    std::vector<MatR<T>> act;  // post-ReLU output of each layer
  };

  ConvTrunk() = default;
  ConvTrunk(const NetworkSpec& spec, Layout& layout) {
    int c = spec.in_channels, h = spec.in_size, w = spec.in_size;
    for (const auto& cs : spec.convs) {
      layers_.emplace_back(c, h, w, cs, layout);
      c = layers_.back().out_channels();
      h = layers_.back().out_h();
      w = layers_.back().out_w();
    }
    if (layers_.empty()) throw std::invalid_argument("network needs at least one convolution");
  }

  int in_size() const { return layers_.front().in_size(); }
  int out_size() const { return layers_.back().out_size(); }

  void init(T* params, std::mt19937_64& rng) const {
    for (const auto& l : layers_) l.init(params, rng);
  }

  const MatR<T>& forward(const T* params, const MatR<T>& x, Cache& cache) const {
    cache.cols.resize(layers_.size());
    cache.act.resize(layers_.size());
    const MatR<T>* in = &x;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i].forward(params, *in, cache.act[i], cache.cols[i]);
      relu_inplace(cache.act[i]);
      in = &cache.act[i];
    }
    return cache.act.back();
  }

  // dfeat is consumed. The input gradient is never needed.
  void backward(const T* params, T* grads, MatR<T>& dfeat, const Cache& cache) const {
    MatR<T> dy = std::move(dfeat);
    MatR<T> dx;
    for (std::size_t i = layers_.size(); i-- > 0;) {
      relu_backward(cache.act[i], dy);
      layers_[i].backward(params, grads, cache.cols[i], dy, i > 0 ? &dx : nullptr);
      if (i > 0) std::swap(dy, dx);
    }
  }

 private:
  std::vector<Conv2d<T>> layers_;
};

template <class T>
class Adam {
 public:
  Adam() = default;
  Adam(std::size_t n, double lr) : m_(Vec<T>::Zero(n)), v_(Vec<T>::Zero(n)), lr_(lr) {}

  void step(Vec<T>& params, const Vec<T>& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    m_ = T(beta1) * m_ + T(1.0 - beta1) * grads;
    v_ = T(beta2) * v_ + T(1.0 - beta2) * grads.cwiseProduct(grads);
    const T step_size = static_cast<T>(lr_ / c1);
    const T root_c2 = static_cast<T>(std::sqrt(c2));
    params.array() -= step_size * m_.array() / (v_.array().sqrt() / root_c2 + T(eps));
  }

  double lr() const { return lr_; }
  std::int64_t steps() const { return t_; }
  Vec<T>& m() { return m_; }
  Vec<T>& v() { return v_; }
  const Vec<T>& m() const { return m_; }
  const Vec<T>& v() const { return v_; }
  void set_steps(std::int64_t t) { t_ = t; }

  static constexpr double beta1 = 0.9;
  static constexpr double beta2 = 0.999;
  static constexpr double eps = 1e-8;

 private:
  Vec<T> m_, v_;
  double lr_ = 1e-4;
  std::int64_t t_ = 0;
};

}  // namespace expo::nn
