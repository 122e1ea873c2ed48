#pragma once

#include <cmath>
#include <vector>

#include "dnadet/nn/tensor.hpp"

namespace dnadet::nn {

/// Adam with bias correction and no weight decay.
template <typename T>
class Adam {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  explicit Adam(ParamRefs<T> params) : params_(std::move(params)) {
    for (auto* p : params_) {
      m_.emplace_back(p->size(), 0.0);
      v_.emplace_back(p->size(), 0.0);
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  void step(double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      auto& m = m_[k];
      auto& v = v_[k];
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double g = p.grad[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * g;
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
        const double mh = m[i] / c1;
        const double vh = v[i] / c2;
        p.value[i] = static_cast<T>(p.value[i] - lr * mh / (std::sqrt(vh) + eps));
      }
    }
  }

  long long steps() const noexcept { return t_; }

 private:
  ParamRefs<T> params_;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  long long t_ = 0;
};

}  // namespace dnadet::nn
