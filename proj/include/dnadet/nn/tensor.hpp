#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dnadet/core/error.hpp"

namespace dnadet::nn {

template <typename T>
using MatrixR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using MapR = Eigen::Map<MatrixR<T>>;

template <typename T>
using ConstMapR = Eigen::Map<const MatrixR<T>>;

/// Dense NCHW activation tensor.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_)
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, T(0)) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const noexcept { return static_cast<std::size_t>(c) * h * w; }

  T* sample(int i) noexcept { return data.data() + i * sample_size(); }
  const T* sample(int i) const noexcept { return data.data() + i * sample_size(); }

  T& at(int i, int ch, int y, int x) noexcept {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }
  T at(int i, int ch, int y, int x) const noexcept {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }

  bool same_shape(const Tensor& o) const noexcept {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
};

/// Trainable parameter: value plus accumulated gradient, shape kept for checkpoints.
template <typename T>
struct Param {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;

  Param() = default;
  Param(std::string name_, std::vector<int> shape_) : name(std::move(name_)), shape(std::move(shape_)) {
    std::size_t count = 1;
    for (int d : shape) count *= static_cast<std::size_t>(d);
    value.assign(count, T(0));
    grad.assign(count, T(0));
  }

  std::size_t size() const noexcept { return value.size(); }
  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
};

/// Non-trainable persistent state (batch-norm running statistics).
template <typename T>
struct Buffer {
  std::string name;
  std::vector<T> value;
};

template <typename T>
using ParamRefs = std::vector<Param<T>*>;

template <typename T>
using BufferRefs = std::vector<Buffer<T>*>;

}  // namespace dnadet::nn
