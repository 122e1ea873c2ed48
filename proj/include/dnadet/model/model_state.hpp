#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "dnadet/core/label_space.hpp"
#include "dnadet/core/rng.hpp"
#include "dnadet/model/encoder.hpp"
#include "dnadet/nn/dense.hpp"

namespace dnadet::model {

/// Guard used by the projection's length normalization.
inline constexpr double kNormalizeEps = 1e-12;

/// Encoder, projection head (Linear-ReLU-Linear-Normalize), linear classifier,
/// and the two log-variance parameters of the loss weighting.
template <typename T>
struct ModelState {
  EncoderConfig config;
  LabelSpace labels;
  long long iteration = 0;

  Encoder<T> encoder;
  nn::Linear<T> proj_hidden;
  nn::Linear<T> proj_out;
  nn::Linear<T> classifier;
  nn::Param<T> loss_log_vars{"loss.log_vars", {2}};  // (s_con, s_ce)

  ModelState() = default;

  ModelState(const EncoderConfig& cfg, const LabelSpace& label_space)
      : config(cfg),
        labels(label_space),
        encoder(cfg),
        proj_hidden(cfg.feature_dim(), cfg.feature_dim(), "projection.1"),
        proj_out(cfg.feature_dim(), cfg.projection_dim, "projection.2"),
        classifier(cfg.feature_dim(), label_space.size(), "classifier") {}

  /// Fresh model with every parameter initialized from `seed`'s init stream.
  static ModelState create(const EncoderConfig& cfg, const LabelSpace& label_space,
                           std::uint64_t seed) {
    ModelState m(cfg, label_space);
    Rng rng = make_rng(seed, "init");
    m.encoder.init(rng);
    m.proj_hidden.init_fan_in(rng, std::sqrt(2.0));
    m.proj_out.init_fan_in(rng, 1.0);
    m.classifier.init_fan_in(rng, 1.0);
    return m;
  }

  int num_classes() const noexcept { return labels.size(); }

  /// Replaces the classifier with a fresh head over `new_labels` and resets the
  /// loss-weight parameters; encoder and projection are kept bit-for-bit.
  void reset_head(const LabelSpace& new_labels, std::uint64_t seed) {
    labels = new_labels;
    classifier = nn::Linear<T>(config.feature_dim(), new_labels.size(), "classifier");
    Rng rng = make_rng(seed, "init-head");
    classifier.init_fan_in(rng, 1.0);
    std::fill(loss_log_vars.value.begin(), loss_log_vars.value.end(), T(0));
    iteration = 0;
  }

  nn::ParamRefs<T> params() {
    nn::ParamRefs<T> out;
    encoder.collect(out);
    proj_hidden.collect(out);
    proj_out.collect(out);
    classifier.collect(out);
    out.push_back(&loss_log_vars);
    return out;
  }

  nn::BufferRefs<T> buffers() {
    nn::BufferRefs<T> out;
    encoder.collect_buffers(out);
    return out;
  }

  void zero_grad() {
    for (auto* p : params()) p->zero_grad();
  }
};

/// Pooled encoder features, one row per image. `training` selects batch-norm mode.
template <typename T>
nn::MatrixR<T> encoder_forward(ModelState<T>& state, std::span<const ImageBuffer> batch,
                               bool training = false) {
  return state.encoder.forward(to_tensor<T>(batch), training, training);
}

/// Unit-length projection embeddings (the contrastive-loss inputs).
template <typename T>
nn::MatrixR<T> project(ModelState<T>& state, const nn::MatrixR<T>& features, bool keep = false) {
  auto h = state.proj_hidden.forward(features, keep);
  h = h.cwiseMax(T(0));
  return nn::l2_normalize_rows(state.proj_out.forward(h, keep), kNormalizeEps);
}

template <typename T>
nn::MatrixR<T> classify(ModelState<T>& state, const nn::MatrixR<T>& features, bool keep = false) {
  return state.classifier.forward(features, keep);
}

/// Class predictions for full images, evaluated in inference mode.
template <typename T>
std::vector<int> predict(ModelState<T>& state, std::span<const ImageBuffer> batch) {
  const auto logits = classify(state, encoder_forward(state, batch, false));
  std::vector<int> out(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg;
    logits.row(i).maxCoeff(&arg);
    out[i] = static_cast<int>(arg);
  }
  return out;
}

}  // namespace dnadet::model
