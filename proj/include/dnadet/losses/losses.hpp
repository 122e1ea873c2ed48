#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "dnadet/core/error.hpp"
#include "dnadet/nn/tensor.hpp"

namespace dnadet::losses {

using nn::MatrixR;

/// Tolerance on the unit-norm requirement for contrastive embeddings.
inline constexpr double kUnitNormTolerance = 1e-5;

/// Embeddings (one unit-length row per patch), their class labels, and temperature.
template <typename T>
struct ContrastiveBatch {
  MatrixR<T> embeddings;
  std::vector<int> labels;
  double temperature = 0.07;
};

template <typename T>
struct SupConResult {
  T loss = T(0);       // unnormalized sum over anchors with at least one positive
  int anchors = 0;     // anchors that contributed
  MatrixR<T> grad;     // dLoss/dEmbeddings, filled when requested

  T mean_per_anchor() const { return anchors ? loss / static_cast<T>(anchors) : T(0); }
};

template <typename T>
void validate(const ContrastiveBatch<T>& b) {
  const auto n = b.embeddings.rows();
  if (n < 2) throw InvalidArgument("supcon_loss: need at least 2 embeddings");
  if (static_cast<std::size_t>(n) != b.labels.size()) {
    throw InvalidArgument("supcon_loss: label count does not match embeddings");
  }
  if (!(b.temperature > 0.0)) throw InvalidArgument("supcon_loss: temperature must be > 0");
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = static_cast<double>(b.embeddings.row(i).norm());
    if (!std::isfinite(norm) || std::abs(norm - 1.0) > kUnitNormTolerance) {
      throw InvalidArgument("supcon_loss: embedding " + std::to_string(i) + " is not unit length");
    }
  }
}

/// Supervised contrastive loss:
///   sum_i  -1/|P(i)| sum_{p in P(i)} log( exp(z_i.z_p/t) / sum_{a != i} exp(z_i.z_a/t) )
/// over anchors with |P(i)| > 0. Anchors without positives contribute nothing.
template <typename T>
SupConResult<T> supcon(const ContrastiveBatch<T>& batch, bool with_grad) {
  validate(batch);
  const auto& Z = batch.embeddings;
  const Eigen::Index n = Z.rows();
  const T inv_t = static_cast<T>(1.0 / batch.temperature);
  const MatrixR<T> S = (Z * Z.transpose()) * inv_t;

  SupConResult<T> out;
  MatrixR<T> G;
  if (with_grad) G = MatrixR<T>::Zero(n, n);
  std::vector<T> prob(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    int positives = 0;
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i && batch.labels[a] == batch.labels[i]) ++positives;
    }
    if (positives == 0) continue;
    T m = -std::numeric_limits<T>::infinity();
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i) m = std::max(m, S(i, a));
    }
    T denom = T(0);
    for (Eigen::Index a = 0; a < n; ++a) {
      prob[a] = a == i ? T(0) : std::exp(S(i, a) - m);
      denom += prob[a];
    }
    const T lse = m + std::log(denom);
    T pos_sum = T(0);
    for (Eigen::Index a = 0; a < n; ++a) {
      if (a != i && batch.labels[a] == batch.labels[i]) pos_sum += S(i, a);
    }
    out.loss += lse - pos_sum / static_cast<T>(positives);
    ++out.anchors;
    if (with_grad) {
      const T inv_p = T(1) / static_cast<T>(positives);
      for (Eigen::Index a = 0; a < n; ++a) {
        if (a == i) continue;
        G(i, a) = prob[a] / denom - (batch.labels[a] == batch.labels[i] ? inv_p : T(0));
      }
    }
  }
  if (with_grad) out.grad = ((G + G.transpose()) * Z) * inv_t;
  return out;
}

template <typename T>
T supcon_loss(const ContrastiveBatch<T>& batch) {
  return supcon(batch, false).loss;
}

template <typename T>
struct CrossEntropyResult {
  T loss = T(0);
  MatrixR<T> grad;  // dLoss/dLogits
};

/// Mean negative log-softmax of the true class.
template <typename T>
CrossEntropyResult<T> cross_entropy(const MatrixR<T>& logits, const std::vector<int>& labels,
                                    bool with_grad = true) {
  const Eigen::Index n = logits.rows(), C = logits.cols();
  if (static_cast<std::size_t>(n) != labels.size() || n == 0) {
    throw InvalidArgument("cross_entropy: label count does not match logits");
  }
  CrossEntropyResult<T> out;
  if (with_grad) out.grad = MatrixR<T>::Zero(n, C);
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || y >= C) throw InvalidArgument("cross_entropy: label out of range");
    const T m = logits.row(i).maxCoeff();
    T denom = T(0);
    for (Eigen::Index c = 0; c < C; ++c) denom += std::exp(logits(i, c) - m);
    const T lse = m + std::log(denom);
    out.loss += lse - logits(i, y);
    if (with_grad) {
      for (Eigen::Index c = 0; c < C; ++c) {
        out.grad(i, c) = std::exp(logits(i, c) - lse) / static_cast<T>(n);
      }
      out.grad(i, y) -= T(1) / static_cast<T>(n);
    }
  }
  out.loss /= static_cast<T>(n);
  return out;
}

/// Learnable log-variances s = (s_con, s_ce); the loss weights are w_k = exp(-s_k) / 2.
struct LossWeights {
  double s_con = 0.0;
  double s_ce = 0.0;

  double w_con() const { return 0.5 * std::exp(-s_con); }
  double w_ce() const { return 0.5 * std::exp(-s_ce); }
};

struct WeightedTotal {
  double total = 0.0;
  double d_con = 0.0;    // dTotal/dL_con
  double d_ce = 0.0;     // dTotal/dL_ce
  double d_s_con = 0.0;  // dTotal/ds_con
  double d_s_ce = 0.0;   // dTotal/ds_ce
};

/// total = w_con L_con + s_con/2 + w_ce L_ce + s_ce/2, with gradients.
inline WeightedTotal auto_weighted_total(double l_con, double l_ce, const LossWeights& w) {
  WeightedTotal out;
  out.total = w.w_con() * l_con + 0.5 * w.s_con + w.w_ce() * l_ce + 0.5 * w.s_ce;
  out.d_con = w.w_con();
  out.d_ce = w.w_ce();
  out.d_s_con = -w.w_con() * l_con + 0.5;
  out.d_s_ce = -w.w_ce() * l_ce + 0.5;
  return out;
}

}  // namespace dnadet::losses
