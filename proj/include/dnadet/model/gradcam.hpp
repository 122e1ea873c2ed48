#pragma once

#include <algorithm>
#include <vector>

#include <opencv2/imgproc.hpp>

#include "dnadet/model/model_state.hpp"

namespace dnadet::model {

/// Single-channel map over the input image, values in [0,1].
struct Heatmap {
  int height = 0;
  int width = 0;
  std::vector<float> values;  // row-major

  float at(int y, int x) const { return values[static_cast<std::size_t>(y) * width + x]; }
};

/// Gradient-weighted class activation map of `target_class` at encoder block
/// `layer` (1-based), upsampled bilinearly to the image size and divided by its
/// maximum. An all-zero map stays zero. Parameter gradients are left zeroed.
template <typename T>
Heatmap gradcam(ModelState<T>& state, const ImageBuffer& image, int target_class, int layer = 4) {
  if (layer < 1 || layer > kEncoderLayers) {
    throw InvalidArgument("gradcam: layer must be in [1,8], got " + std::to_string(layer));
  }
  if (target_class < 0 || target_class >= state.num_classes()) {
    throw InvalidArgument("gradcam: target class out of range");
  }
  const ImageBuffer batch[1] = {image};
  const auto x = to_tensor<T>(batch);
  state.encoder.forward(x, false, true);
  const auto& last = state.encoder.block_output(kEncoderLayers);

  // d logit_t / d features is the target row of the classifier weight.
  nn::MatrixR<T> dfeat(1, state.config.feature_dim());
  const auto& W = state.classifier.weight().value;
  for (int j = 0; j < state.config.feature_dim(); ++j) {
    dfeat(0, j) = W[static_cast<std::size_t>(target_class) * state.config.feature_dim() + j];
  }
  auto grad = state.encoder.backward_blocks(nn::global_avg_pool_backward(dfeat, last.h, last.w),
                                            kEncoderLayers, layer);
  const auto& act = state.encoder.block_output(layer);

  cv::Mat cam(act.h, act.w, CV_32F, cv::Scalar(0));
  const std::size_t P = act.plane();
  for (int c = 0; c < act.c; ++c) {
    double alpha = 0.0;
    const T* g = grad.sample(0) + c * P;
    for (std::size_t k = 0; k < P; ++k) alpha += g[k];
    alpha /= static_cast<double>(P);
    const T* a = act.sample(0) + c * P;
    for (int y = 0; y < act.h; ++y) {
      float* row = cam.ptr<float>(y);
      for (int xx = 0; xx < act.w; ++xx) {
        row[xx] += static_cast<float>(alpha * a[static_cast<std::size_t>(y) * act.w + xx]);
      }
    }
  }
  cam = cv::max(cam, 0.0f);
  cv::Mat up;
  cv::resize(cam, up, cv::Size(image.width(), image.height()), 0, 0, cv::INTER_LINEAR);
  up = cv::max(up, 0.0f);
  double maxv = 0.0;
  cv::minMaxLoc(up, nullptr, &maxv);
  if (maxv > 0.0) up /= maxv;

  state.zero_grad();
  state.encoder.release();

  Heatmap out{image.height(), image.width(), {}};
  out.values.assign(up.ptr<float>(), up.ptr<float>() + up.total());
  for (auto& v : out.values) v = std::clamp(v, 0.0f, 1.0f);
  return out;
}

}  // namespace dnadet::model
