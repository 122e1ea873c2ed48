#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "dnadet/core/image.hpp"
#include "dnadet/core/rng.hpp"
#include "dnadet/nn/batchnorm.hpp"
#include "dnadet/nn/conv.hpp"
#include "dnadet/nn/dense.hpp"

namespace dnadet::model {

inline constexpr int kEncoderLayers = 8;

/// Conv schedule of the encoder: eight Conv-BN-LReLU blocks alternating
/// [4,4,stride 2] and [3,3,stride 1] kernels, padding 1, then global average pooling.
struct EncoderConfig {
  std::array<int, kEncoderLayers> channels{64, 64, 128, 128, 256, 256, 512, 512};
  double leaky_slope = 0.2;
  int projection_dim = 128;

  /// Channel counts scaled by `width` (rounded, at least 1). width = 1 is the reference schedule.
  static EncoderConfig with_width(double width) {
    EncoderConfig cfg;
    for (auto& c : cfg.channels) {
      c = std::max(1, static_cast<int>(std::lround(c * width)));
    }
    return cfg;
  }

  int feature_dim() const noexcept { return channels.back(); }

  nn::ConvGeometry layer_geometry(int layer) const {
    const int in = layer == 0 ? ImageBuffer::kChannels : channels[layer - 1];
    const bool down = layer % 2 == 0;
    return nn::ConvGeometry{in, channels[layer], down ? 4 : 3, down ? 2 : 1, 1};
  }

  /// Closed-form number of trainable encoder parameters (conv weights+biases, BN affine).
  long long parameter_count() const {
    long long total = 0;
    for (int i = 0; i < kEncoderLayers; ++i) {
      const auto g = layer_geometry(i);
      total += static_cast<long long>(g.out_channels) * g.patch_len() + g.out_channels;
      total += 2LL * g.out_channels;
    }
    return total;
  }

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

/// Packs equally sized images into an NCHW tensor.
template <typename T>
nn::Tensor<T> to_tensor(std::span<const ImageBuffer> images) {
  if (images.empty()) throw InvalidArgument("to_tensor: empty batch");
  const int h = images[0].height(), w = images[0].width();
  nn::Tensor<T> t(static_cast<int>(images.size()), ImageBuffer::kChannels, h, w);
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (img.height() != h || img.width() != w) {
      throw InvalidArgument("to_tensor: batch images differ in shape");
    }
    T* dst = t.sample(static_cast<int>(i));
    const auto src = img.data();
    const std::size_t P = static_cast<std::size_t>(h) * w;
    for (std::size_t p = 0; p < P; ++p) {
      for (int c = 0; c < ImageBuffer::kChannels; ++c) {
        dst[c * P + p] = static_cast<T>(src[p * ImageBuffer::kChannels + c]);
      }
    }
  }
  return t;
}

/// Eight Conv-BN-LReLU blocks. Keeps the per-block outputs of the last
/// forward pass for backward and for activation inspection.
template <typename T>
class Encoder {
 public:
  Encoder() = default;
  explicit Encoder(const EncoderConfig& cfg) : cfg_(cfg) {
    for (int i = 0; i < kEncoderLayers; ++i) {
      const std::string name = "encoder." + std::to_string(i + 1);
      convs_.emplace_back(cfg.layer_geometry(i), name + ".conv");
      bns_.emplace_back(cfg.channels[i], name + ".bn");
    }
  }

  const EncoderConfig& config() const noexcept { return cfg_; }
  nn::Conv2d<T>& conv(int layer) { return convs_.at(layer); }
  nn::BatchNorm2d<T>& bn(int layer) { return bns_.at(layer); }

  void collect(nn::ParamRefs<T>& out) {
    for (int i = 0; i < kEncoderLayers; ++i) {
      convs_[i].collect(out);
      bns_[i].collect(out);
    }
  }
  void collect_buffers(nn::BufferRefs<T>& out) {
    for (auto& bn : bns_) bn.collect_buffers(out);
  }

  /// Kaiming fan-in initialization for the leaky-ReLU gain; zero biases.
  void init(Rng& rng) {
    const double gain = std::sqrt(2.0 / (1.0 + cfg_.leaky_slope * cfg_.leaky_slope));
    for (auto& c : convs_) c.init_fan_in(rng, gain);
  }

  /// Runs blocks 1..`upto` (1-based) and returns the last block output.
  nn::Tensor<T> forward_blocks(const nn::Tensor<T>& x, bool training, int upto = kEncoderLayers,
                               bool keep = true) {
    if (x.h < ImageBuffer::kMinSide || x.w < ImageBuffer::kMinSide) {
      throw InvalidArgument("encoder: spatial size must be >= 16");
    }
    const T slope = static_cast<T>(cfg_.leaky_slope);
    outputs_.assign(kEncoderLayers, nn::Tensor<T>());
    nn::Tensor<T> h = x;
    for (int i = 0; i < upto; ++i) {
      h = convs_[i].forward(h, keep);
      h = bns_[i].forward(h, training);
      nn::leaky_relu_inplace(h.data, slope);
      if (keep) outputs_[i] = h;
    }
    return h;
  }

  /// Pooled features, one row per sample.
  nn::MatrixR<T> forward(const nn::Tensor<T>& x, bool training, bool keep = true) {
    const auto h = forward_blocks(x, training, kEncoderLayers, keep);
    last_h_ = h.h;
    last_w_ = h.w;
    return nn::global_avg_pool(h);
  }

  /// Output of block `layer` (1-based) from the last kept forward.
  const nn::Tensor<T>& block_output(int layer) const { return outputs_.at(layer - 1); }

  /// Backpropagates from dL/d(block `from` output) down to block `stop`+1 and
  /// returns dL/d(block `stop` output); stop = 0 skips the input gradient.
  nn::Tensor<T> backward_blocks(nn::Tensor<T> grad, int from, int stop) {
    const T slope = static_cast<T>(cfg_.leaky_slope);
    for (int i = from - 1; i >= stop; --i) {
      nn::leaky_relu_backward_inplace(grad.data, outputs_[i].data, slope);
      grad = bns_[i].backward(grad);
      grad = convs_[i].backward(grad, i > 0);
    }
    return grad;
  }

  /// Backward from pooled-feature gradients through all blocks.
  void backward(const nn::MatrixR<T>& dfeatures) {
    backward_blocks(nn::global_avg_pool_backward(dfeatures, last_h_, last_w_), kEncoderLayers, 0);
  }

  void release() {
    outputs_.clear();
    for (auto& c : convs_) c.release();
    for (auto& b : bns_) b.release();
  }

 private:
  EncoderConfig cfg_;
  std::vector<nn::Conv2d<T>> convs_;
  std::vector<nn::BatchNorm2d<T>> bns_;
  std::vector<nn::Tensor<T>> outputs_;
  int last_h_ = 0;
  int last_w_ = 0;
};

}  // namespace dnadet::model
