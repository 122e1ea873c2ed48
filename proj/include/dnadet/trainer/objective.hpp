#pragma once

#include <vector>

#include "dnadet/losses/losses.hpp"
#include "dnadet/model/model_state.hpp"

namespace dnadet::trainer {

struct ObjectiveOptions {
  bool pcl = true;  // false: plain cross-entropy on the classifier only
  double temperature = 0.07;
};

struct ObjectiveResult {
  double total = 0.0;
  double l_con = 0.0;  // unnormalized sum over anchors (0 when pcl is off)
  double l_ce = 0.0;
  double w_con = 0.0;
  double w_ce = 0.0;
  int correct = 0;  // classifier hits on this batch
  int count = 0;
};

/// Training-mode forward of a patch batch through encoder, projection and
/// classifier. With pcl the total is the uncertainty-weighted sum of the
/// contrastive and cross-entropy losses; otherwise it is the cross-entropy.
/// When `backward` is set, parameter gradients (including the loss log-variances)
/// are accumulated; callers zero them first.
template <typename T>
ObjectiveResult compute_objective(model::ModelState<T>& m, const nn::Tensor<T>& patches,
                                  const std::vector<int>& labels, const ObjectiveOptions& opt,
                                  bool backward = true) {
  if (static_cast<std::size_t>(patches.n) != labels.size()) {
    throw InvalidArgument("objective: label count does not match batch");
  }
  ObjectiveResult r;
  r.count = patches.n;
  const auto F = m.encoder.forward(patches, true, backward);
  const auto logits = m.classifier.forward(F, backward);
  const auto ce = losses::cross_entropy(logits, labels, backward);
  r.l_ce = static_cast<double>(ce.loss);
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg;
    logits.row(i).maxCoeff(&arg);
    r.correct += static_cast<int>(arg) == labels[i];
  }

  nn::MatrixR<T> dF;
  if (opt.pcl) {
    const auto h1 = m.proj_hidden.forward(F, backward);
    const nn::MatrixR<T> a1 = h1.cwiseMax(T(0));
    const auto u = m.proj_out.forward(a1, backward);
    losses::ContrastiveBatch<T> batch{nn::l2_normalize_rows(u, model::kNormalizeEps), labels, opt.temperature};
    const auto con = losses::supcon(batch, backward);
    r.l_con = static_cast<double>(con.loss);
    const losses::LossWeights w{static_cast<double>(m.loss_log_vars.value[0]),
                                static_cast<double>(m.loss_log_vars.value[1])};
    const auto wt = losses::auto_weighted_total(r.l_con, r.l_ce, w);
    r.total = wt.total;
    r.w_con = w.w_con();
    r.w_ce = w.w_ce();
    if (backward) {
      const nn::MatrixR<T> dz = con.grad * static_cast<T>(wt.d_con);
      const auto du = nn::l2_normalize_rows_backward(u, dz, model::kNormalizeEps);
      nn::MatrixR<T> da1 = m.proj_out.backward(du);
      da1 = (h1.array() > T(0)).select(da1, T(0));
      dF = m.proj_hidden.backward(da1);
      dF += m.classifier.backward(ce.grad * static_cast<T>(wt.d_ce));
      m.loss_log_vars.grad[0] += static_cast<T>(wt.d_s_con);
      m.loss_log_vars.grad[1] += static_cast<T>(wt.d_s_ce);
    }
  } else {
    r.total = r.l_ce;
    r.w_ce = 1.0;
    if (backward) dF = m.classifier.backward(ce.grad);
  }
  if (backward) m.encoder.backward(dF);
  return r;
}

}  // namespace dnadet::trainer
