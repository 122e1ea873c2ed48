#pragma once

#include <cmath>
#include <string>

#include "dnadet/nn/tensor.hpp"

namespace dnadet::nn {

/// Per-channel batch normalization. Training mode normalizes with batch
/// statistics and updates running estimates; eval mode uses the running ones.
template <typename T>
class BatchNorm2d {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm2d() = default;
  BatchNorm2d(int channels, const std::string& name)
      : gamma_(name + ".gamma", {channels}), beta_(name + ".beta", {channels}) {
    std::fill(gamma_.value.begin(), gamma_.value.end(), T(1));
    running_mean_ = {name + ".running_mean", std::vector<T>(channels, T(0))};
    running_var_ = {name + ".running_var", std::vector<T>(channels, T(1))};
  }

  int channels() const noexcept { return static_cast<int>(gamma_.size()); }
  Param<T>& gamma() noexcept { return gamma_; }
  Param<T>& beta() noexcept { return beta_; }
  Buffer<T>& running_mean() noexcept { return running_mean_; }
  Buffer<T>& running_var() noexcept { return running_var_; }

  void collect(ParamRefs<T>& out) {
    out.push_back(&gamma_);
    out.push_back(&beta_);
  }
  void collect_buffers(BufferRefs<T>& out) {
    out.push_back(&running_mean_);
    out.push_back(&running_var_);
  }

  Tensor<T> forward(const Tensor<T>& x, bool training) {
    const int C = channels();
    if (x.c != C) throw InvalidArgument("BatchNorm2d " + gamma_.name + ": channel mismatch");
    training_ = training;
    Tensor<T> y(x.n, x.c, x.h, x.w);
    xhat_ = Tensor<T>(x.n, x.c, x.h, x.w);
    inv_std_.assign(C, T(0));
    const std::size_t P = x.plane();
    const double count = static_cast<double>(x.n) * P;
    for (int ch = 0; ch < C; ++ch) {
      double mean, var;
      if (training) {
        double sum = 0.0;
        for (int i = 0; i < x.n; ++i) {
          const T* p = x.sample(i) + ch * P;
          for (std::size_t k = 0; k < P; ++k) sum += p[k];
        }
        mean = sum / count;
        double sq = 0.0;
        for (int i = 0; i < x.n; ++i) {
          const T* p = x.sample(i) + ch * P;
          for (std::size_t k = 0; k < P; ++k) {
            const double d = p[k] - mean;
            sq += d * d;
          }
        }
        var = sq / count;
        const double unbiased = count > 1 ? sq / (count - 1) : var;
        running_mean_.value[ch] =
            static_cast<T>((1 - kMomentum) * running_mean_.value[ch] + kMomentum * mean);
        running_var_.value[ch] =
            static_cast<T>((1 - kMomentum) * running_var_.value[ch] + kMomentum * unbiased);
      } else {
        mean = running_mean_.value[ch];
        var = running_var_.value[ch];
      }
      const T inv = static_cast<T>(1.0 / std::sqrt(var + kEps));
      const T m = static_cast<T>(mean);
      inv_std_[ch] = inv;
      const T g = gamma_.value[ch], b = beta_.value[ch];
      for (int i = 0; i < x.n; ++i) {
        const T* p = x.sample(i) + ch * P;
        T* xh = xhat_.sample(i) + ch * P;
        T* q = y.sample(i) + ch * P;
        for (std::size_t k = 0; k < P; ++k) {
          xh[k] = (p[k] - m) * inv;
          q[k] = g * xh[k] + b;
        }
      }
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& dy) {
    const int C = channels();
    Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
    const std::size_t P = dy.plane();
    const double count = static_cast<double>(dy.n) * P;
    for (int ch = 0; ch < C; ++ch) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int i = 0; i < dy.n; ++i) {
        const T* g = dy.sample(i) + ch * P;
        const T* xh = xhat_.sample(i) + ch * P;
        for (std::size_t k = 0; k < P; ++k) {
          sum_dy += g[k];
          sum_dy_xhat += static_cast<double>(g[k]) * xh[k];
        }
      }
      gamma_.grad[ch] += static_cast<T>(sum_dy_xhat);
      beta_.grad[ch] += static_cast<T>(sum_dy);
      const T scale = gamma_.value[ch] * inv_std_[ch];
      if (training_) {
        const T mdy = static_cast<T>(sum_dy / count);
        const T mdyx = static_cast<T>(sum_dy_xhat / count);
        for (int i = 0; i < dy.n; ++i) {
          const T* g = dy.sample(i) + ch * P;
          const T* xh = xhat_.sample(i) + ch * P;
          T* d = dx.sample(i) + ch * P;
          for (std::size_t k = 0; k < P; ++k) d[k] = scale * (g[k] - mdy - xh[k] * mdyx);
        }
      } else {
        for (int i = 0; i < dy.n; ++i) {
          const T* g = dy.sample(i) + ch * P;
          T* d = dx.sample(i) + ch * P;
          for (std::size_t k = 0; k < P; ++k) d[k] = scale * g[k];
        }
      }
    }
    return dx;
  }

  void release() {
    xhat_ = Tensor<T>();
  }

 private:
  Param<T> gamma_;
  Param<T> beta_;
  Buffer<T> running_mean_;
  Buffer<T> running_var_;
  bool training_ = false;
  Tensor<T> xhat_;
  std::vector<T> inv_std_;
};

/// Stateless batch-statistics normalization (no affine), as used by untrained generators.
template <typename T>
void batch_normalize(Tensor<T>& x, double eps = 1e-5) {
  const std::size_t P = x.plane();
  const double count = static_cast<double>(x.n) * P;
  for (int ch = 0; ch < x.c; ++ch) {
    double sum = 0.0, sq = 0.0;
    for (int i = 0; i < x.n; ++i) {
      const T* p = x.sample(i) + ch * P;
      for (std::size_t k = 0; k < P; ++k) sum += p[k];
    }
    const double mean = sum / count;
    for (int i = 0; i < x.n; ++i) {
      const T* p = x.sample(i) + ch * P;
      for (std::size_t k = 0; k < P; ++k) sq += (p[k] - mean) * (p[k] - mean);
    }
    const T inv = static_cast<T>(1.0 / std::sqrt(sq / count + eps));
    const T m = static_cast<T>(mean);
    for (int i = 0; i < x.n; ++i) {
      T* p = x.sample(i) + ch * P;
      for (std::size_t k = 0; k < P; ++k) p[k] = (p[k] - m) * inv;
    }
  }
}

}  // namespace dnadet::nn
