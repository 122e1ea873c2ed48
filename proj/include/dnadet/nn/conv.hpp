#pragma once

#include <cmath>
#include <numeric>
#include <string>

#include "dnadet/core/rng.hpp"
#include "dnadet/nn/tensor.hpp"

namespace dnadet::nn {

/// Geometry of a square-kernel 2-D convolution.
struct ConvGeometry {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int padding = 1;

  int out_size(int in) const { return (in + 2 * padding - kernel) / stride + 1; }
  int patch_len() const { return in_channels * kernel * kernel; }
};

namespace detail {

/// Column buffer rows are (c, ky, kx); columns are (sample, oy, ox) for `count` samples.
template <typename T>
void im2col(const Tensor<T>& x, int first, int count, const ConvGeometry& g, int oh, int ow,
            T* cols) {
  const std::size_t P = static_cast<std::size_t>(oh) * ow;
  const std::size_t ld = P * count;
  for (int ch = 0; ch < g.in_channels; ++ch) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        T* row = cols + ((static_cast<std::size_t>(ch) * g.kernel + ky) * g.kernel + kx) * ld;
        for (int s = 0; s < count; ++s) {
          const T* plane = x.sample(first + s) + static_cast<std::size_t>(ch) * x.plane();
          T* dst = row + s * P;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * g.stride - g.padding + ky;
            T* d = dst + static_cast<std::size_t>(oy) * ow;
            if (iy < 0 || iy >= x.h) {
              std::fill(d, d + ow, T(0));
              continue;
            }
            const T* src = plane + static_cast<std::size_t>(iy) * x.w;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * g.stride - g.padding + kx;
              d[ox] = (ix >= 0 && ix < x.w) ? src[ix] : T(0);
            }
          }
        }
      }
    }
  }
}

/// Adjoint of im2col: scatter-adds columns back into `dx`.
template <typename T>
void col2im(const T* cols, int first, int count, const ConvGeometry& g, int oh, int ow,
            Tensor<T>& dx) {
  const std::size_t P = static_cast<std::size_t>(oh) * ow;
  const std::size_t ld = P * count;
  for (int ch = 0; ch < g.in_channels; ++ch) {
    for (int ky = 0; ky < g.kernel; ++ky) {
      for (int kx = 0; kx < g.kernel; ++kx) {
        const T* row = cols + ((static_cast<std::size_t>(ch) * g.kernel + ky) * g.kernel + kx) * ld;
        for (int s = 0; s < count; ++s) {
          T* plane = dx.sample(first + s) + static_cast<std::size_t>(ch) * dx.plane();
          const T* src = row + s * P;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * g.stride - g.padding + ky;
            if (iy < 0 || iy >= dx.h) continue;
            T* d = plane + static_cast<std::size_t>(iy) * dx.w;
            const T* sv = src + static_cast<std::size_t>(oy) * ow;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * g.stride - g.padding + kx;
              if (ix >= 0 && ix < dx.w) d[ix] += sv[ox];
            }
          }
        }
      }
    }
  }
}

inline int chunk_samples(std::size_t per_sample, int n) {
  constexpr std::size_t kBudget = std::size_t{1} << 22;
  const std::size_t k = std::max<std::size_t>(1, kBudget / std::max<std::size_t>(1, per_sample));
  return static_cast<int>(std::min<std::size_t>(k, static_cast<std::size_t>(n)));
}

}  // namespace detail

/// Plain convolution `y = W * x + b` with zero padding.
template <typename T>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(const ConvGeometry& g, const std::string& name, bool bias = true)
      : geom_(g),
        weight_(name + ".weight", {g.out_channels, g.in_channels, g.kernel, g.kernel}),
        has_bias_(bias) {
    if (bias) bias_ = Param<T>(name + ".bias", {g.out_channels});
  }

  const ConvGeometry& geometry() const noexcept { return geom_; }
  Param<T>& weight() noexcept { return weight_; }
  Param<T>& bias() noexcept { return bias_; }
  const Param<T>& weight() const noexcept { return weight_; }
  const Param<T>& bias() const noexcept { return bias_; }
  bool has_bias() const noexcept { return has_bias_; }

  void collect(ParamRefs<T>& out) {
    out.push_back(&weight_);
    if (has_bias_) out.push_back(&bias_);
  }

  /// Normal(0, gain / sqrt(fan_in)); bias zero.
  void init_fan_in(Rng& rng, double gain) {
    const double std = gain / std::sqrt(static_cast<double>(geom_.patch_len()));
    for (auto& v : weight_.value) v = static_cast<T>(normal(rng) * std);
    if (has_bias_) std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  }

  Tensor<T> forward(const Tensor<T>& x, bool keep_input = true) {
    if (x.c != geom_.in_channels) {
      throw InvalidArgument("Conv2d " + weight_.name + ": channel mismatch");
    }
    if (keep_input) input_ = x;
    const int oh = geom_.out_size(x.h), ow = geom_.out_size(x.w);
    if (oh <= 0 || ow <= 0) throw InvalidArgument("Conv2d: input too small");
    Tensor<T> y(x.n, geom_.out_channels, oh, ow);
    const std::size_t P = static_cast<std::size_t>(oh) * ow;
    const int K = geom_.patch_len();
    const int co = geom_.out_channels;
    const int step = detail::chunk_samples(K * P, x.n);
    cols_.resize(static_cast<std::size_t>(K) * P * step);
    out_.resize(static_cast<std::size_t>(co) * P * step);
    ConstMapR<T> W(weight_.value.data(), co, K);
    for (int s0 = 0; s0 < x.n; s0 += step) {
      const int cnt = std::min(step, x.n - s0);
      const Eigen::Index cols = static_cast<Eigen::Index>(P) * cnt;
      detail::im2col(x, s0, cnt, geom_, oh, ow, cols_.data());
      MapR<T> C(cols_.data(), K, cols);
      MapR<T> O(out_.data(), co, cols);
      O.noalias() = W * C;
      for (int s = 0; s < cnt; ++s) {
        T* dst = y.sample(s0 + s);
        for (int o = 0; o < co; ++o) {
          const T b = has_bias_ ? bias_.value[o] : T(0);
          const T* src = out_.data() + static_cast<std::size_t>(o) * cols + s * P;
          T* d = dst + o * P;
          for (std::size_t p = 0; p < P; ++p) d[p] = src[p] + b;
        }
      }
    }
    return y;
  }

  /// Accumulates weight/bias gradients and returns dL/dx for the cached input.
  Tensor<T> backward(const Tensor<T>& dy, bool need_input_grad = true) {
    const Tensor<T>& x = input_;
    const int oh = dy.h, ow = dy.w;
    const std::size_t P = static_cast<std::size_t>(oh) * ow;
    const int K = geom_.patch_len();
    const int co = geom_.out_channels;
    Tensor<T> dx;
    if (need_input_grad) dx = Tensor<T>(x.n, x.c, x.h, x.w);
    const int step = detail::chunk_samples(K * P, x.n);
    cols_.resize(static_cast<std::size_t>(K) * P * step);
    out_.resize(static_cast<std::size_t>(co) * P * step);
    std::vector<T> dcols(need_input_grad ? cols_.size() : 0);
    ConstMapR<T> W(weight_.value.data(), co, K);
    MapR<T> dW(weight_.grad.data(), co, K);
    for (int s0 = 0; s0 < x.n; s0 += step) {
      const int cnt = std::min(step, x.n - s0);
      const Eigen::Index cols = static_cast<Eigen::Index>(P) * cnt;
      for (int s = 0; s < cnt; ++s) {
        const T* src = dy.sample(s0 + s);
        for (int o = 0; o < co; ++o) {
          std::copy(src + o * P, src + (o + 1) * P,
                    out_.data() + static_cast<std::size_t>(o) * cols + s * P);
        }
      }
      MapR<T> G(out_.data(), co, cols);
      if (has_bias_) {
        // Fixed-order sum: a vectorized reduction depends on buffer alignment.
        for (int o = 0; o < co; ++o) {
          const T* row = out_.data() + static_cast<std::size_t>(o) * cols;
          bias_.grad[o] += std::accumulate(row, row + cols, T(0));
        }
      }
      detail::im2col(x, s0, cnt, geom_, oh, ow, cols_.data());
      MapR<T> C(cols_.data(), K, cols);
      dW.noalias() += G * C.transpose();
      if (need_input_grad) {
        MapR<T> dC(dcols.data(), K, cols);
        dC.noalias() = W.transpose() * G;
        detail::col2im(dcols.data(), s0, cnt, geom_, oh, ow, dx);
      }
    }
    return dx;
  }

  void release() {
    input_ = Tensor<T>();
    cols_.clear();
    cols_.shrink_to_fit();
    out_.clear();
    out_.shrink_to_fit();
  }

 private:
  ConvGeometry geom_;
  Param<T> weight_;
  Param<T> bias_;
  bool has_bias_ = true;
  Tensor<T> input_;
  std::vector<T> cols_;
  std::vector<T> out_;
};

/// Transposed convolution as the adjoint of a convolution with geometry `g`
/// (g maps out_h x out_w -> x.h x x.w). Weight layout [in_channels_of_g][...]
/// follows the forward conv, i.e. [g.out_channels, g.in_channels, k, k].
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& x, const std::vector<T>& weight, const ConvGeometry& g,
                           int out_h, int out_w) {
  if (x.c != g.out_channels) throw InvalidArgument("conv_transpose2d: channel mismatch");
  if (g.out_size(out_h) != x.h || g.out_size(out_w) != x.w) {
    throw InvalidArgument("conv_transpose2d: output size inconsistent with geometry");
  }
  Tensor<T> y(x.n, g.in_channels, out_h, out_w);
  const std::size_t P = x.plane();
  const int K = g.patch_len();
  ConstMapR<T> W(weight.data(), g.out_channels, K);
  std::vector<T> cols(static_cast<std::size_t>(K) * P);
  for (int s = 0; s < x.n; ++s) {
    ConstMapR<T> X(x.sample(s), g.out_channels, static_cast<Eigen::Index>(P));
    MapR<T> C(cols.data(), K, static_cast<Eigen::Index>(P));
    C.noalias() = W.transpose() * X;
    detail::col2im(cols.data(), s, 1, g, x.h, x.w, y);
  }
  return y;
}

}  // namespace dnadet::nn
