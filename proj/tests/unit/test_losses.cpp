#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "dnadet/losses/losses.hpp"
#include "support/oracles.hpp"

namespace {

using dnadet::losses::ContrastiveBatch;
using dnadet::losses::LossWeights;
using dnadet::nn::MatrixR;
using Mat = MatrixR<double>;

ContrastiveBatch<double> make_batch(const std::vector<oracle::Vec>& z, std::vector<int> labels,
                                    double tau) {
  ContrastiveBatch<double> b;
  b.embeddings = Mat(z.size(), z[0].size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    for (std::size_t k = 0; k < z[i].size(); ++k) b.embeddings(i, k) = z[i][k];
  }
  b.labels = std::move(labels);
  b.temperature = tau;
  return b;
}

std::vector<oracle::Vec> random_embeddings(std::mt19937_64& rng, int n, int dim) {
  std::vector<oracle::Vec> z;
  for (int i = 0; i < n; ++i) z.push_back(oracle::random_unit(rng, dim));
  return z;
}

TEST(SupCon, TwoSameLabelIsZero) {
  std::mt19937_64 rng(1);
  for (double tau : {0.07, 0.5, 1.0, 3.0}) {
    auto b = make_batch(random_embeddings(rng, 2, 16), {3, 3}, tau);
    EXPECT_NEAR(dnadet::losses::supcon_loss(b), 0.0, 1e-12);
  }
}

TEST(SupCon, IdenticalEmbeddingsAAB) {
  std::mt19937_64 rng(2);
  const auto v = oracle::random_unit(rng, 8);
  auto b = make_batch({v, v, v}, {0, 0, 1}, 1.0);
  const auto r = dnadet::losses::supcon(b, false);
  EXPECT_NEAR(r.loss, 2.0 * std::log(2.0), 1e-12);
  EXPECT_EQ(r.anchors, 2);
}

TEST(SupCon, MatchesBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> cls(0, 3);
  for (int trial = 0; trial < 50; ++trial) {
    auto z = random_embeddings(rng, 8, 12);
    std::vector<int> labels(8);
    for (auto& l : labels) l = cls(rng);
    const double ref = oracle::supcon_bruteforce(z, labels, 0.07);
    const double got = dnadet::losses::supcon_loss(make_batch(z, labels, 0.07));
    EXPECT_LE(oracle::relative_error(got, ref), 1e-6) << "trial " << trial;
  }
}

TEST(SupCon, RejectsBadBatches) {
  std::mt19937_64 rng(4);
  auto single = make_batch(random_embeddings(rng, 1, 4), {0}, 0.1);
  EXPECT_THROW(dnadet::losses::supcon_loss(single), dnadet::InvalidArgument);
  auto b = make_batch(random_embeddings(rng, 4, 4), {0, 0, 1, 1}, 0.1);
  b.embeddings.row(2) *= 1.01;
  EXPECT_THROW(dnadet::losses::supcon_loss(b), dnadet::InvalidArgument);
}

TEST(SupCon, PermutationAndRelabelingInvariant) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> cls(0, 4);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 10;
    auto z = random_embeddings(rng, n, 6);
    std::vector<int> labels(n);
    for (auto& l : labels) l = cls(rng);
    const double base = dnadet::losses::supcon_loss(make_batch(z, labels, 0.2));

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<oracle::Vec> zp;
    std::vector<int> lp;
    for (int i : perm) {
      zp.push_back(z[i]);
      lp.push_back(labels[i]);
    }
    EXPECT_NEAR(dnadet::losses::supcon_loss(make_batch(zp, lp, 0.2)), base, 1e-9);

    std::vector<int> rename = {7, 3, 11, 0, 5};
    std::vector<int> lr;
    for (int l : labels) lr.push_back(rename[l]);
    EXPECT_NEAR(dnadet::losses::supcon_loss(make_batch(z, lr, 0.2)), base, 1e-12);
  }
}

TEST(SupCon, MovingPositiveCloserDecreasesLoss) {
  // Anchor at e0, positive at angle theta, negative fixed at e1.
  auto at = [](double theta) {
    oracle::Vec a = {1, 0, 0}, p = {std::cos(theta), 0, std::sin(theta)}, n = {0, 1, 0};
    return dnadet::losses::supcon_loss(make_batch({a, p, n}, {0, 0, 1}, 0.5));
  };
  double prev = at(3.0);
  for (double theta = 2.8; theta >= 0.0; theta -= 0.2) {
    const double cur = at(theta);
    EXPECT_LT(cur, prev) << theta;
    prev = cur;
  }
}

TEST(SupCon, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(6);
  std::uniform_int_distribution<int> cls(0, 2);
  for (int trial = 0; trial < 5; ++trial) {
    auto z = random_embeddings(rng, 7, 5);
    std::vector<int> labels(7);
    for (auto& l : labels) l = cls(rng);
    const auto batch = make_batch(z, labels, 0.3);
    const auto r = dnadet::losses::supcon(batch, true);
    oracle::Vec flat(batch.embeddings.data(), batch.embeddings.data() + batch.embeddings.size());
    auto f = [&](const oracle::Vec& x) {
      auto b = batch;
      std::copy(x.begin(), x.end(), b.embeddings.data());
      return dnadet::losses::supcon_loss(b);
    };
    for (std::size_t k = 0; k < flat.size(); ++k) {
      const double fd = oracle::central_difference(f, flat, k, 1e-7);
      EXPECT_LE(oracle::relative_error(r.grad.data()[k], fd, 1e-6), 1e-4) << k;
    }
  }
}

TEST(CrossEntropy, UniformLogitsGiveLogC) {
  Mat logits = Mat::Constant(3, 5, 0.7);
  EXPECT_NEAR(dnadet::losses::cross_entropy(logits, {0, 2, 4}).loss, std::log(5.0), 1e-12);
}

TEST(CrossEntropy, ConfidentCorrectIsNearZero) {
  Mat logits = Mat::Zero(2, 4);
  logits(0, 1) = 20;
  logits(1, 3) = 20;
  // 3 e^-20 is the exact residual.
  EXPECT_NEAR(dnadet::losses::cross_entropy(logits, {1, 3}).loss, 0.0, 1e-8);
}

TEST(CrossEntropy, BatchIsMeanOfSamples) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> nd;
  Mat logits(4, 3);
  for (int i = 0; i < logits.size(); ++i) logits.data()[i] = nd(rng);
  const std::vector<int> labels = {0, 2, 1, 2};
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    sum += dnadet::losses::cross_entropy(Mat(logits.row(i)), {labels[i]}).loss;
  }
  EXPECT_NEAR(dnadet::losses::cross_entropy(logits, labels).loss, sum / 4, 1e-12);
  EXPECT_THROW(dnadet::losses::cross_entropy(logits, {0, 1, 2, 3}), dnadet::InvalidArgument);
}

TEST(AutoWeighted, UnitSigmaCase) {
  EXPECT_DOUBLE_EQ(dnadet::losses::auto_weighted_total(2.0, 4.0, {}).total, 3.0);
  EXPECT_DOUBLE_EQ(dnadet::losses::auto_weighted_total(0.0, 0.0, {}).total, 0.0);
}

TEST(AutoWeighted, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-2, 2), ul(0, 10);
  for (int trial = 0; trial < 20; ++trial) {
    const double lc = ul(rng), le = ul(rng);
    const LossWeights w{u(rng), u(rng)};
    const auto r = dnadet::losses::auto_weighted_total(lc, le, w);
    auto f_scon = [&](const oracle::Vec& s) {
      return dnadet::losses::auto_weighted_total(lc, le, {s[0], s[1]}).total;
    };
    const double h = 1e-6;
    EXPECT_LE(oracle::relative_error(r.d_s_con, oracle::central_difference(f_scon, {w.s_con, w.s_ce}, 0, h), 1e-6), 1e-6);
    EXPECT_LE(oracle::relative_error(r.d_s_ce, oracle::central_difference(f_scon, {w.s_con, w.s_ce}, 1, h), 1e-6), 1e-6);
    EXPECT_GT(w.w_con(), 0.0);
    EXPECT_GT(w.w_ce(), 0.0);
  }
}

TEST(AutoWeighted, AffineInEachLossWithPositiveSlope) {
  const LossWeights w{0.3, -0.7};
  const double a = dnadet::losses::auto_weighted_total(1.0, 2.0, w).total;
  const double b = dnadet::losses::auto_weighted_total(2.0, 2.0, w).total;
  const double c = dnadet::losses::auto_weighted_total(3.0, 2.0, w).total;
  EXPECT_NEAR(b - a, c - b, 1e-12);
  EXPECT_GT(b - a, 0.0);
}

}  // namespace
