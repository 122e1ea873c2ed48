#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>
#include <opencv2/core.hpp>

#include "dnadet/core/image.hpp"
#include "dnadet/core/manifest.hpp"
#include "dnadet/core/rng.hpp"
#include "dnadet/nn/batchnorm.hpp"
#include "dnadet/nn/conv.hpp"
#include "dnadet/nn/dense.hpp"

namespace dnadet::zoo {

enum class BlockType { dcgan, resnet };
enum class Skip { none, upsample_conv };
enum class Upsample { nearest, bilinear, depth_to_space };
enum class Norm { pixel_norm, batch_norm };
enum class Nonlinearity { sigmoid, tanh, none };
enum class Head { conv3, deconv5 };

inline std::string to_string(BlockType v) { return v == BlockType::dcgan ? "DCGAN" : "ResNet"; }
inline std::string to_string(Skip v) { return v == Skip::none ? "none" : "upsample_conv"; }
inline std::string to_string(Upsample v) {
  switch (v) {
    case Upsample::nearest: return "nearest";
    case Upsample::bilinear: return "bilinear";
    case Upsample::depth_to_space: return "depth_to_space";
  }
  return "?";
}
inline std::string to_string(Norm v) { return v == Norm::pixel_norm ? "pixel_norm" : "batch_norm"; }
inline std::string to_string(Nonlinearity v) {
  switch (v) {
    case Nonlinearity::sigmoid: return "sigmoid";
    case Nonlinearity::tanh: return "tanh";
    case Nonlinearity::none: return "none";
  }
  return "?";
}
inline std::string to_string(Head v) { return v == Head::conv3 ? "conv3x3" : "deconv5x5_s2"; }

/// Weight initializer: truncated normal (+-2 std) for every conv and the latent
/// projection, and for the projection bias. No conv biases.
inline constexpr double kWeightStd = 0.2;
inline constexpr double kBiasStd = 0.2;
inline constexpr int kSampleChunk = 50;
inline constexpr int kCalibrationImages = 256;
inline constexpr std::uint64_t kCalibrationLatentSeed = 424242;

struct GeneratorSpec {
  std::string name;
  BlockType block_type = BlockType::resnet;
  Skip skip_connect = Skip::upsample_conv;
  Upsample upsample = Upsample::nearest;
  Norm norm = Norm::batch_norm;
  int latent_dim = 128;
  /// Channels at 4x4 followed by the output channels of each upsampling block.
  std::vector<int> stage_channels;
  Head head = Head::conv3;
  Nonlinearity output_nonlinearity = Nonlinearity::tanh;
  int output_resolution = 64;
  /// Output colour spread after whitening, before the nonlinearity.
  double colour_std = 1.0;

  int blocks() const { return static_cast<int>(stage_channels.size()) - 1; }
  int upsampling_stages() const { return blocks() + (head == Head::deconv5 ? 1 : 0); }

  void validate() const {
    if (stage_channels.size() < 2) throw InvalidArgument("generator " + name + ": needs at least one block");
    if (latent_dim < 1) throw InvalidArgument("generator " + name + ": latent_dim must be >= 1");
    if (output_resolution != 4 * (1 << upsampling_stages())) {
      throw InvalidArgument("generator " + name + ": output_resolution must equal 4 * 2^stages");
    }
    if (upsample == Upsample::depth_to_space) {
      for (int b = 0; b < blocks(); ++b) {
        if (stage_channels[b] % 4 != 0) {
          throw InvalidArgument("generator " + name + ": depth_to_space needs channels divisible by 4");
        }
      }
    }
    if (block_type == BlockType::dcgan && skip_connect != Skip::none) {
      throw InvalidArgument("generator " + name + ": DCGAN blocks have no skip path");
    }
  }
};

/// The four reference architectures at `resolution` (64 or 128).
inline std::vector<GeneratorSpec> builtin_specs(int resolution = 64) {
  if (resolution != 64 && resolution != 128) throw InvalidArgument("zoo resolution must be 64 or 128");
  std::vector<int> ch = {128, 64, 32, 16, 16};
  std::vector<int> ch_d2s = {128, 64, 32, 16};
  if (resolution == 128) {
    ch.push_back(16);
    ch_d2s.push_back(16);
  }
  GeneratorSpec pro{"ProGAN", BlockType::dcgan, Skip::none, Upsample::nearest, Norm::pixel_norm, 128,
                    ch, Head::conv3, Nonlinearity::none, resolution, 0.5};
  GeneratorSpec mmd{"MMDGAN", BlockType::resnet, Skip::upsample_conv, Upsample::depth_to_space,
                    Norm::batch_norm, 128, ch_d2s, Head::deconv5, Nonlinearity::sigmoid, resolution, 2.0};
  GeneratorSpec sn{"SNGAN", BlockType::resnet, Skip::upsample_conv, Upsample::nearest, Norm::batch_norm, 128,
                   ch, Head::conv3, Nonlinearity::tanh, resolution, 1.0};
  GeneratorSpec info = sn;
  info.name = "InfoMaxGAN";
  info.upsample = Upsample::bilinear;
  return {pro, mmd, sn, info};
}

inline GeneratorSpec find_spec(const std::vector<GeneratorSpec>& specs, const std::string& name) {
  for (const auto& s : specs) {
    if (s.name == name) return s;
  }
  throw InvalidArgument("unknown generator spec: " + name);
}

namespace detail {

using TensorF = nn::Tensor<float>;

inline TensorF upsample_nearest(const TensorF& x) {
  TensorF y(x.n, x.c, 2 * x.h, 2 * x.w);
  for (int i = 0; i < x.n; ++i) {
    for (int c = 0; c < x.c; ++c) {
      for (int oy = 0; oy < y.h; ++oy) {
        for (int ox = 0; ox < y.w; ++ox) y.at(i, c, oy, ox) = x.at(i, c, oy / 2, ox / 2);
      }
    }
  }
  return y;
}

/// Half-pixel-centred bilinear x2 with edge clamping.
inline TensorF upsample_bilinear(const TensorF& x) {
  TensorF y(x.n, x.c, 2 * x.h, 2 * x.w);
  auto coord = [](int o, int n, int& i0, int& i1, float& t) {
    const float s = std::max(0.0f, (o + 0.5f) / 2.0f - 0.5f);
    i0 = std::min(static_cast<int>(s), n - 1);
    i1 = std::min(i0 + 1, n - 1);
    t = s - static_cast<float>(i0);
  };
  for (int oy = 0; oy < y.h; ++oy) {
    int y0, y1;
    float ty;
    coord(oy, x.h, y0, y1, ty);
    for (int ox = 0; ox < y.w; ++ox) {
      int x0, x1;
      float tx;
      coord(ox, x.w, x0, x1, tx);
      for (int i = 0; i < x.n; ++i) {
        for (int c = 0; c < x.c; ++c) {
          const float top = x.at(i, c, y0, x0) * (1 - tx) + x.at(i, c, y0, x1) * tx;
          const float bot = x.at(i, c, y1, x0) * (1 - tx) + x.at(i, c, y1, x1) * tx;
          y.at(i, c, oy, ox) = top * (1 - ty) + bot * ty;
        }
      }
    }
  }
  return y;
}

/// Channel-to-space rearrangement by 2: out[c, 2y+i, 2x+j] = in[4c + 2i + j, y, x].
inline TensorF depth_to_space(const TensorF& x) {
  TensorF y(x.n, x.c / 4, 2 * x.h, 2 * x.w);
  for (int n = 0; n < x.n; ++n) {
    for (int c = 0; c < y.c; ++c) {
      for (int i = 0; i < 2; ++i) {
        for (int j = 0; j < 2; ++j) {
          for (int yy = 0; yy < x.h; ++yy) {
            for (int xx = 0; xx < x.w; ++xx) {
              y.at(n, c, 2 * yy + i, 2 * xx + j) = x.at(n, 4 * c + 2 * i + j, yy, xx);
            }
          }
        }
      }
    }
  }
  return y;
}

inline void pixel_norm(TensorF& x) {
  const std::size_t P = x.plane();
  for (int n = 0; n < x.n; ++n) {
    float* s = x.sample(n);
    for (std::size_t p = 0; p < P; ++p) {
      double sq = 0.0;
      for (int c = 0; c < x.c; ++c) sq += static_cast<double>(s[c * P + p]) * s[c * P + p];
      const float inv = static_cast<float>(1.0 / std::sqrt(sq / x.c + 1e-8));
      for (int c = 0; c < x.c; ++c) s[c * P + p] *= inv;
    }
  }
}

/// Mirror padding by one pixel (edge pixel not repeated).
inline TensorF reflect_pad1(const TensorF& x) {
  TensorF y(x.n, x.c, x.h + 2, x.w + 2);
  auto m = [](int i, int n) { return i < 0 ? -i : (i >= n ? 2 * n - 2 - i : i); };
  for (int i = 0; i < x.n; ++i) {
    for (int c = 0; c < x.c; ++c) {
      for (int oy = 0; oy < y.h; ++oy) {
        const int sy = m(oy - 1, x.h);
        for (int ox = 0; ox < y.w; ++ox) y.at(i, c, oy, ox) = x.at(i, c, sy, m(ox - 1, x.w));
      }
    }
  }
  return y;
}

inline void leaky_relu(TensorF& x) { nn::leaky_relu_inplace(x.data, 0.2f); }
inline void relu(TensorF& x) {
  for (auto& v : x.data) v = std::max(v, 0.0f);
}

}  // namespace detail

/// A generator with fixed random weights and a fixed output colour calibration.
class GeneratorInstance {
 public:
  GeneratorInstance(const GeneratorSpec& spec, std::uint64_t weight_seed) : spec_(spec), seed_(weight_seed) {
    spec_.validate();
    Rng rng = make_rng(weight_seed, "generator:" + spec_.name);
    auto fill = [&](std::vector<float>& v, double std) {
      for (auto& w : v) w = static_cast<float>(truncated_normal(rng, std));
    };
    const int c0 = spec_.stage_channels[0];
    linear_w_.resize(static_cast<std::size_t>(c0) * 16 * spec_.latent_dim);
    linear_b_.resize(static_cast<std::size_t>(c0) * 16);
    fill(linear_w_, kWeightStd);
    fill(linear_b_, kBiasStd);
    auto conv = [&](int in, int out, const std::string& name) {
      nn::Conv2d<float> c(nn::ConvGeometry{in, out, 3, 1, 0}, name, false);
      fill(c.weight().value, kWeightStd);
      return c;
    };
    if (spec_.block_type == BlockType::dcgan) pre_ = conv(c0, c0, "pre");
    for (int b = 0; b < spec_.blocks(); ++b) {
      const int ci = spec_.stage_channels[b], co = spec_.stage_channels[b + 1];
      const int cu = spec_.upsample == Upsample::depth_to_space ? ci / 4 : ci;
      Block blk;
      if (spec_.block_type == BlockType::resnet) blk.skip = conv(cu, co, "skip");
      blk.a = conv(cu, co, "a");
      blk.b = conv(co, co, "b");
      blocks_.push_back(std::move(blk));
    }
    const int cl = spec_.stage_channels.back();
    if (spec_.head == Head::conv3) {
      out_ = conv(cl, 3, "out");
    } else {
      deconv_geom_ = nn::ConvGeometry{3, cl, 5, 2, 2};
      deconv_w_.resize(static_cast<std::size_t>(cl) * 3 * 25);
      fill(deconv_w_, kWeightStd);
    }
    calibrate();
  }

  const GeneratorSpec& spec() const noexcept { return spec_; }
  std::uint64_t weight_seed() const noexcept { return seed_; }

  /// `n` images drawn with standard-normal latents from `latent_seed`. Batch
  /// normalization uses the statistics of each chunk of kSampleChunk latents.
  std::vector<ImageBuffer> sample(int n, std::uint64_t latent_seed) const {
    if (n < 1) throw InvalidArgument("sample_images: n must be >= 1");
    std::vector<ImageBuffer> out;
    out.reserve(n);
    Rng rng = make_rng(latent_seed, "latent");
    for (int first = 0; first < n; first += kSampleChunk) {
      const int m = std::min(kSampleChunk, n - first);
      const auto raw = forward_raw(m, rng);
      for (int i = 0; i < m; ++i) out.push_back(finish(raw, i));
    }
    return out;
  }

  /// Every parameter value in construction order (for determinism checks).
  std::vector<float> flat_weights() const {
    std::vector<float> w(linear_w_);
    w.insert(w.end(), linear_b_.begin(), linear_b_.end());
    auto add = [&](const nn::Conv2d<float>& c) {
      w.insert(w.end(), c.weight().value.begin(), c.weight().value.end());
    };
    if (spec_.block_type == BlockType::dcgan) add(pre_);
    for (const auto& b : blocks_) {
      if (spec_.block_type == BlockType::resnet) add(b.skip);
      add(b.a);
      add(b.b);
    }
    if (spec_.head == Head::conv3) add(out_);
    w.insert(w.end(), deconv_w_.begin(), deconv_w_.end());
    return w;
  }

 private:
  struct Block {
    nn::Conv2d<float> skip, a, b;
  };

  detail::TensorF upsample(const detail::TensorF& x) const {
    switch (spec_.upsample) {
      case Upsample::nearest: return detail::upsample_nearest(x);
      case Upsample::bilinear: return detail::upsample_bilinear(x);
      case Upsample::depth_to_space: return detail::depth_to_space(x);
    }
    return x;
  }

  void normalize(detail::TensorF& x) const {
    if (spec_.norm == Norm::pixel_norm) {
      detail::pixel_norm(x);
    } else {
      nn::batch_normalize(x);
    }
  }

  /// Pre-nonlinearity RGB output for `m` fresh latents.
  detail::TensorF forward_raw(int m, Rng& rng) const {
    const int L = spec_.latent_dim, c0 = spec_.stage_channels[0];
    nn::MatrixR<float> z(m, L);
    for (int i = 0; i < z.size(); ++i) z.data()[i] = static_cast<float>(normal(rng));
    if (spec_.norm == Norm::pixel_norm) {
      for (int i = 0; i < m; ++i) z.row(i) /= std::sqrt(z.row(i).squaredNorm() / L + 1e-8f);
    }
    nn::ConstMapR<float> W(linear_w_.data(), c0 * 16, L);
    nn::MatrixR<float> h = z * W.transpose();
    for (int i = 0; i < m; ++i) {
      for (int k = 0; k < c0 * 16; ++k) h(i, k) += linear_b_[k];
    }
    detail::TensorF x(m, c0, 4, 4);
    std::copy(h.data(), h.data() + h.size(), x.data.begin());

    if (spec_.block_type == BlockType::dcgan) {
      detail::leaky_relu(x);
      normalize(x);
      x = pre_.forward(detail::reflect_pad1(x), false);
      detail::leaky_relu(x);
      normalize(x);
      for (auto& b : blocks_) {
        x = upsample(x);
        x = b.a.forward(detail::reflect_pad1(x), false);
        detail::leaky_relu(x);
        normalize(x);
        x = b.b.forward(detail::reflect_pad1(x), false);
        detail::leaky_relu(x);
        normalize(x);
      }
    } else {
      for (auto& b : blocks_) {
        const auto s = b.skip.forward(detail::reflect_pad1(upsample(x)), false);
        detail::TensorF hmain = x;
        normalize(hmain);
        detail::relu(hmain);
        hmain = b.a.forward(detail::reflect_pad1(upsample(hmain)), false);
        normalize(hmain);
        detail::relu(hmain);
        hmain = b.b.forward(detail::reflect_pad1(hmain), false);
        for (std::size_t k = 0; k < hmain.data.size(); ++k) hmain.data[k] += s.data[k];
        x = std::move(hmain);
      }
      normalize(x);
      detail::relu(x);
    }
    if (spec_.head == Head::conv3) return out_.forward(detail::reflect_pad1(x), false);
    return nn::conv_transpose2d(x, deconv_w_, deconv_geom_, 2 * x.h, 2 * x.w);
  }

  ImageBuffer finish(const detail::TensorF& raw, int i) const {
    const int R = raw.h;
    const std::size_t P = raw.plane();
    const float* s = raw.sample(i);
    std::vector<float> data(P * 3);
    for (std::size_t p = 0; p < P; ++p) {
      const Eigen::Vector3d v(s[p] - mean_[0], s[P + p] - mean_[1], s[2 * P + p] - mean_[2]);
      const Eigen::Vector3d w = whiten_ * v;
      for (int c = 0; c < 3; ++c) {
        double o;
        switch (spec_.output_nonlinearity) {
          case Nonlinearity::sigmoid: o = 1.0 / (1.0 + std::exp(-w[c])); break;
          case Nonlinearity::tanh: o = (std::tanh(w[c]) + 1.0) / 2.0; break;
          default: o = std::clamp((w[c] + 1.0) / 2.0, 0.0, 1.0); break;
        }
        data[p * 3 + c] = static_cast<float>(o);
      }
    }
    return ImageBuffer(R, R, std::move(data));
  }

  /// ZCA-whitens the raw RGB output over a fixed latent batch and scales it to
  /// `colour_std`, so that instances differ in artifacts rather than in palette.
  void calibrate() {
    mean_.setZero();
    whiten_.setIdentity();
    Rng rng = make_rng(kCalibrationLatentSeed, "latent");
    Eigen::Vector3d sum = Eigen::Vector3d::Zero();
    Eigen::Matrix3d outer = Eigen::Matrix3d::Zero();
    double count = 0;
    for (int first = 0; first < kCalibrationImages; first += kSampleChunk) {
      const int m = std::min(kSampleChunk, kCalibrationImages - first);
      const auto raw = forward_raw(m, rng);
      const std::size_t P = raw.plane();
      for (int i = 0; i < m; ++i) {
        const float* s = raw.sample(i);
        for (std::size_t p = 0; p < P; ++p) {
          const Eigen::Vector3d v(s[p], s[P + p], s[2 * P + p]);
          sum += v;
          outer += v * v.transpose();
          count += 1;
        }
      }
    }
    mean_ = sum / count;
    const Eigen::Matrix3d cov = (outer - count * mean_ * mean_.transpose()) / (count - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
    const Eigen::Vector3d inv = es.eigenvalues().cwiseMax(1e-12).cwiseSqrt().cwiseInverse();
    whiten_ = spec_.colour_std * es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
  }

  GeneratorSpec spec_;
  std::uint64_t seed_;
  std::vector<float> linear_w_, linear_b_;
  // Convolutions keep scratch buffers, so sampling mutates them; one instance
  // must not be sampled from two threads at once.
  mutable nn::Conv2d<float> pre_, out_;
  mutable std::vector<Block> blocks_;
  nn::ConvGeometry deconv_geom_;
  std::vector<float> deconv_w_;
  Eigen::Vector3d mean_;
  Eigen::Matrix3d whiten_;
};

inline GeneratorInstance build_generator(const GeneratorSpec& spec, std::uint64_t weight_seed) {
  return GeneratorInstance(spec, weight_seed);
}

inline std::vector<ImageBuffer> sample_images(const GeneratorInstance& inst, int n, std::uint64_t latent_seed) {
  return inst.sample(n, latent_seed);
}

inline std::string model_id(const GeneratorSpec& spec, std::uint64_t weight_seed) {
  return spec.name + "_seed" + std::to_string(weight_seed);
}

/// Latent stream for the images of one zoo model.
inline std::uint64_t zoo_latent_seed(std::uint64_t base, const std::string& model, std::string_view purpose) {
  return stream_seed(stream_seed(base, model), purpose);
}

/// Writes `n_per_model` images for every (spec, seed < seeds_per_arch) under
/// out_dir/images and a manifest at out_dir/manifest.csv. Seed-0 images are split
/// train/val (a seeded `val_fraction` held out); every other seed is test and
/// gets `n_test_per_model` images when that is positive. Batch-normalized
/// generators use chunk statistics, so a smaller test count yields different
/// images, not a prefix.
inline DatasetManifest make_zoo_dataset(const std::vector<GeneratorSpec>& specs, int seeds_per_arch,
                                        int n_per_model, const std::filesystem::path& out_dir,
                                        std::uint64_t latent_base = 0, double val_fraction = 0.1,
                                        int n_test_per_model = 0) {
  if (specs.empty()) throw InvalidArgument("make_zoo_dataset: no specs");
  if (seeds_per_arch < 1 || n_per_model < 1 || n_test_per_model < 0) {
    throw InvalidArgument("make_zoo_dataset: counts must be >= 1");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());
  DatasetManifest m;
  m.base_dir = out_dir;
  for (const auto& spec : specs) {
    for (int s = 0; s < seeds_per_arch; ++s) {
      const auto inst = build_generator(spec, static_cast<std::uint64_t>(s));
      const auto id = model_id(spec, s);
      const int n = s > 0 && n_test_per_model > 0 ? n_test_per_model : n_per_model;
      const auto images = inst.sample(n, zoo_latent_seed(latent_base, id, "dataset"));
      std::vector<int> order(n);
      for (int i = 0; i < n; ++i) order[i] = i;
      Rng rng = make_rng(latent_base, "zoo-val:" + id);
      shuffle(order.begin(), order.end(), rng);
      const int n_val = s == 0 ? static_cast<int>(std::lround(val_fraction * n)) : 0;
      std::vector<bool> is_val(n, false);
      for (int i = 0; i < n_val; ++i) is_val[order[i]] = true;
      for (int i = 0; i < n; ++i) {
        char name[128];
        std::snprintf(name, sizeof(name), "images/%s_%05d.png", id.c_str(), i);
        save_image(images[i], out_dir / name);
        const Split split = s == 0 ? (is_val[i] ? Split::val : Split::train) : Split::test;
        m.records.push_back({name, spec.name, spec.name, id, s, "zoo", split});
      }
    }
  }
  save_manifest(m, out_dir / "manifest.csv");
  return m;
}

/// Human-readable description of the specs, one block per generator.
inline void describe(const std::vector<GeneratorSpec>& specs, std::ostream& out) {
  for (const auto& s : specs) {
    out << s.name << ": block=" << to_string(s.block_type) << " skip=" << to_string(s.skip_connect)
        << " upsample=" << to_string(s.upsample) << " norm=" << to_string(s.norm)
        << " latent=" << s.latent_dim << " channels=";
    for (std::size_t i = 0; i < s.stage_channels.size(); ++i) out << (i ? "-" : "") << s.stage_channels[i];
    out << " head=" << to_string(s.head) << " output=" << to_string(s.output_nonlinearity)
        << " resolution=" << s.output_resolution << " colour_std=" << s.colour_std << '\n';
  }
}

/// Fraction of (mean-removed) spectral power at radial frequencies above
/// `cutoff` cycles/pixel, averaged over images and channels.
inline double high_frequency_energy(const std::vector<ImageBuffer>& images, double cutoff = 0.25) {
  double hi = 0.0, total = 0.0;
  for (const auto& img : images) {
    const int H = img.height(), W = img.width();
    for (int c = 0; c < 3; ++c) {
      cv::Mat plane(H, W, CV_32F);
      double mean = 0.0;
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) mean += img.at(y, x, c);
      }
      mean /= H * W;
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) plane.at<float>(y, x) = static_cast<float>(img.at(y, x, c) - mean);
      }
      cv::Mat spec;
      cv::dft(plane, spec, cv::DFT_COMPLEX_OUTPUT);
      for (int y = 0; y < H; ++y) {
        const double fy = (y <= H / 2 ? y : y - H) / static_cast<double>(H);
        for (int x = 0; x < W; ++x) {
          const double fx = (x <= W / 2 ? x : x - W) / static_cast<double>(W);
          const auto v = spec.at<cv::Vec2f>(y, x);
          const double p = static_cast<double>(v[0]) * v[0] + static_cast<double>(v[1]) * v[1];
          total += p;
          if (std::sqrt(fx * fx + fy * fy) > cutoff) hi += p;
        }
      }
    }
  }
  return total > 0 ? hi / total : 0.0;
}

}  // namespace dnadet::zoo
