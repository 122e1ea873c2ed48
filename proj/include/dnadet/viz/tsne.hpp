#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dnadet/core/error.hpp"
#include "dnadet/core/rng.hpp"

namespace dnadet::viz {

struct TsneOptions {
  double perplexity = 30.0;
  int iterations = 1000;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iterations = 250;
  std::uint64_t seed = 0;
};

namespace detail {

/// Row-conditional affinities p(j|i) whose entropy matches log(perplexity),
/// found by bisection on the Gaussian precision of each row.
inline Eigen::MatrixXd conditional_affinities(const Eigen::MatrixXd& sq_dist, double perplexity) {
  const Eigen::Index n = sq_dist.rows();
  const double target = std::log(perplexity);
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    // Distances shifted by the row minimum keep exp() in range.
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) dmin = std::min(dmin, sq_dist(i, j));
    }
    for (int step = 0; step < 200; ++step) {
      double sum = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double d = sq_dist(i, j) - dmin;
        const double e = std::exp(-beta * d);
        P(i, j) = e;
        sum += e;
        weighted += d * e;
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      for (Eigen::Index j = 0; j < n; ++j) P(i, j) /= sum;
      const double diff = entropy - target;
      if (std::abs(diff) < 1e-10) break;
      if (diff > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
      } else {
        hi = beta;
        beta = (beta + lo) / 2.0;
      }
    }
  }
  return P;
}

inline Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& X) {
  const Eigen::VectorXd norms = X.rowwise().squaredNorm();
  Eigen::MatrixXd D = (-2.0 * X * X.transpose()).colwise() + norms;
  D.rowwise() += norms.transpose();
  return D.cwiseMax(0.0);
}

}  // namespace detail

/// Exact t-SNE to two dimensions. Perplexity is capped at (n - 1) / 3 for small
/// inputs. Deterministic in (X, options).
inline Eigen::MatrixXd tsne(const Eigen::MatrixXd& X, const TsneOptions& opt = {}) {
  const Eigen::Index n = X.rows();
  if (n < 4) throw InvalidArgument("tsne: need at least 4 points, got " + std::to_string(n));
  if (!X.allFinite()) throw InvalidArgument("tsne: non-finite feature values");
  const double perplexity = std::min(opt.perplexity, static_cast<double>(n - 1) / 3.0);

  Eigen::MatrixXd P = detail::conditional_affinities(detail::squared_distances(X), perplexity);
  P = (P + P.transpose()) / (2.0 * static_cast<double>(n));
  P = P.cwiseMax(1e-12);
  P.diagonal().setZero();

  Rng rng = make_rng(opt.seed, "tsne");
  Eigen::MatrixXd Y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int d = 0; d < 2; ++d) Y(i, d) = 1e-4 * normal(rng);
  }
  Eigen::MatrixXd update = Eigen::MatrixXd::Zero(n, 2);
  Eigen::MatrixXd gains = Eigen::MatrixXd::Ones(n, 2);
  Eigen::MatrixXd Q(n, n), grad(n, 2);

  for (int it = 0; it < opt.iterations; ++it) {
    const double exaggeration = it < opt.exaggeration_iterations ? opt.early_exaggeration : 1.0;
    const double momentum = it < opt.exaggeration_iterations ? 0.5 : 0.8;
    double qsum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      Q(i, i) = 0.0;
      for (Eigen::Index j = i + 1; j < n; ++j) {
        const double dx = Y(i, 0) - Y(j, 0), dy = Y(i, 1) - Y(j, 1);
        const double q = 1.0 / (1.0 + dx * dx + dy * dy);
        Q(i, j) = Q(j, i) = q;
        qsum += 2.0 * q;
      }
    }
    grad.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        const double m = (exaggeration * P(i, j) - Q(i, j) / qsum) * Q(i, j);
        grad(i, 0) += 4.0 * m * (Y(i, 0) - Y(j, 0));
        grad(i, 1) += 4.0 * m * (Y(i, 1) - Y(j, 1));
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) {
      for (int d = 0; d < 2; ++d) {
        const bool same_sign = (grad(i, d) > 0) == (update(i, d) > 0);
        gains(i, d) = std::max(0.01, same_sign ? gains(i, d) * 0.8 : gains(i, d) + 0.2);
        update(i, d) = momentum * update(i, d) - opt.learning_rate * gains(i, d) * grad(i, d);
        Y(i, d) += update(i, d);
      }
    }
    Y.rowwise() -= Y.colwise().mean();
  }
  return Y;
}

}  // namespace dnadet::viz
