#pragma once

#include <cmath>
#include <string>

#include "dnadet/core/rng.hpp"
#include "dnadet/nn/tensor.hpp"

namespace dnadet::nn {

/// Fully connected layer on row-major [batch, features] matrices.
template <typename T>
class Linear {
 public:
  Linear() = default;
  Linear(int in, int out, const std::string& name)
      : weight_(name + ".weight", {out, in}), bias_(name + ".bias", {out}) {}

  int in_features() const noexcept { return weight_.shape[1]; }
  int out_features() const noexcept { return weight_.shape[0]; }
  Param<T>& weight() noexcept { return weight_; }
  Param<T>& bias() noexcept { return bias_; }

  void collect(ParamRefs<T>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

  void init_fan_in(Rng& rng, double gain) {
    const double std = gain / std::sqrt(static_cast<double>(in_features()));
    for (auto& v : weight_.value) v = static_cast<T>(normal(rng) * std);
    std::fill(bias_.value.begin(), bias_.value.end(), T(0));
  }

  MatrixR<T> forward(const MatrixR<T>& x, bool keep_input = true) {
    if (x.cols() != in_features()) throw InvalidArgument("Linear " + weight_.name + ": width mismatch");
    if (keep_input) input_ = x;
    ConstMapR<T> W(weight_.value.data(), out_features(), in_features());
    Eigen::Map<const Eigen::Matrix<T, 1, Eigen::Dynamic>> b(bias_.value.data(), out_features());
    MatrixR<T> y = x * W.transpose();
    y.rowwise() += b;
    return y;
  }

  MatrixR<T> backward(const MatrixR<T>& dy) {
    MapR<T> dW(weight_.grad.data(), out_features(), in_features());
    dW.noalias() += dy.transpose() * input_;
    for (Eigen::Index j = 0; j < dy.cols(); ++j) bias_.grad[j] += dy.col(j).sum();
    ConstMapR<T> W(weight_.value.data(), out_features(), in_features());
    return dy * W;
  }

 private:
  Param<T> weight_;
  Param<T> bias_;
  MatrixR<T> input_;
};

template <typename T>
void leaky_relu_inplace(std::vector<T>& v, T slope) {
  for (auto& x : v) x = x > T(0) ? x : slope * x;
}

/// Gradient through leaky ReLU given its output (sign is preserved for slope > 0).
template <typename T>
void leaky_relu_backward_inplace(std::vector<T>& grad, const std::vector<T>& out, T slope) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!(out[i] > T(0))) grad[i] *= slope;
  }
}

/// Global average pool NCHW -> [n, c].
template <typename T>
MatrixR<T> global_avg_pool(const Tensor<T>& x) {
  MatrixR<T> out(x.n, x.c);
  const std::size_t P = x.plane();
  for (int i = 0; i < x.n; ++i) {
    for (int ch = 0; ch < x.c; ++ch) {
      const T* p = x.sample(i) + ch * P;
      T s = T(0);
      for (std::size_t k = 0; k < P; ++k) s += p[k];
      out(i, ch) = s / static_cast<T>(P);
    }
  }
  return out;
}

template <typename T>
Tensor<T> global_avg_pool_backward(const MatrixR<T>& dy, int h, int w) {
  Tensor<T> dx(static_cast<int>(dy.rows()), static_cast<int>(dy.cols()), h, w);
  const std::size_t P = dx.plane();
  for (int i = 0; i < dx.n; ++i) {
    for (int ch = 0; ch < dx.c; ++ch) {
      const T g = dy(i, ch) / static_cast<T>(P);
      T* p = dx.sample(i) + ch * P;
      std::fill(p, p + P, g);
    }
  }
  return dx;
}

/// Row-wise v / max(||v||, eps).
template <typename T>
MatrixR<T> l2_normalize_rows(const MatrixR<T>& x, double eps) {
  MatrixR<T> y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const T norm = std::max(static_cast<T>(x.row(i).norm()), static_cast<T>(eps));
    y.row(i) = x.row(i) / norm;
  }
  return y;
}

template <typename T>
MatrixR<T> l2_normalize_rows_backward(const MatrixR<T>& x, const MatrixR<T>& dy, double eps) {
  MatrixR<T> dx(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const T norm = static_cast<T>(x.row(i).norm());
    if (norm <= static_cast<T>(eps)) {
      dx.row(i) = dy.row(i) / static_cast<T>(eps);
      continue;
    }
    const auto y = x.row(i) / norm;
    const T dot = dy.row(i).dot(y);
    dx.row(i) = (dy.row(i) - dot * y) / norm;
  }
  return dx;
}

}  // namespace dnadet::nn
