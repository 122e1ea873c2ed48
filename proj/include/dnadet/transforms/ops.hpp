#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dnadet/core/error.hpp"
#include "dnadet/core/image.hpp"
#include "dnadet/core/rng.hpp"

// Primitive image operations shared by the transform bank and the attack suite.
// Every op returns a new buffer of the input's size with values clamped to [0,1].
namespace dnadet::ops {

enum class Kernel { nearest, bilinear, bicubic, lanczos4, area };

inline int cv_flag(Kernel k) {
  switch (k) {
    case Kernel::nearest: return cv::INTER_NEAREST;
    case Kernel::bilinear: return cv::INTER_LINEAR;
    case Kernel::bicubic: return cv::INTER_CUBIC;
    case Kernel::lanczos4: return cv::INTER_LANCZOS4;
    case Kernel::area: return cv::INTER_AREA;
  }
  return cv::INTER_LINEAR;
}

inline std::string to_string(Kernel k) {
  switch (k) {
    case Kernel::nearest: return "nearest";
    case Kernel::bilinear: return "bilinear";
    case Kernel::bicubic: return "bicubic";
    case Kernel::lanczos4: return "lanczos4";
    case Kernel::area: return "area";
  }
  return "?";
}

inline Kernel parse_kernel(const std::string& s) {
  for (auto k : {Kernel::nearest, Kernel::bilinear, Kernel::bicubic, Kernel::lanczos4, Kernel::area}) {
    if (to_string(k) == s) return k;
  }
  throw InvalidArgument("unknown resize kernel: " + s);
}

inline ImageBuffer resize(const ImageBuffer& img, int height, int width, Kernel k) {
  if (img.height() == height && img.width() == width) return img;
  cv::Mat out;
  cv::resize(to_mat(img), out, cv::Size(width, height), 0, 0, cv_flag(k));
  return from_mat(out);
}

/// Encodes to JPEG at `quality` and decodes. Quality 100 or more is treated as no compression.
inline ImageBuffer jpeg(const ImageBuffer& img, int quality) {
  if (quality >= 100) return img;
  std::vector<uchar> bytes;
  cv::imencode(".jpg", to_bgr8(img), bytes, {cv::IMWRITE_JPEG_QUALITY, quality});
  return from_bgr8(cv::imdecode(bytes, cv::IMREAD_COLOR));
}

/// Gaussian blur with odd kernel size `ksize`; sigma 0 is the identity.
inline ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma, int ksize) {
  if (sigma <= 0.0) return img;
  if (ksize < 1 || ksize % 2 == 0) throw InvalidArgument("gaussian_blur: kernel size must be odd");
  cv::Mat out;
  cv::GaussianBlur(to_mat(img), out, cv::Size(ksize, ksize), sigma, sigma, cv::BORDER_REFLECT_101);
  return from_mat(out);
}

/// Blur whose kernel covers +-3 sigma, as used by attacks with continuous sigma.
inline ImageBuffer gaussian_blur(const ImageBuffer& img, double sigma) {
  return gaussian_blur(img, sigma, 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1);
}

inline ImageBuffer median_blur(const ImageBuffer& img, int ksize) {
  // OpenCV only supports 8-bit data for kernels above 5.
  cv::Mat out;
  cv::medianBlur(to_bgr8(img), out, ksize);
  return from_bgr8(out);
}

/// Rescales by `factor` and restores the original size with the same kernel.
inline ImageBuffer rescale_roundtrip(const ImageBuffer& img, double factor, Kernel k) {
  const int h = std::max(1, static_cast<int>(std::lround(img.height() * factor)));
  const int w = std::max(1, static_cast<int>(std::lround(img.width() * factor)));
  if (h == img.height() && w == img.width()) return img;
  cv::Mat small, out;
  cv::resize(to_mat(img), small, cv::Size(w, h), 0, 0, cv_flag(k));
  cv::resize(small, out, cv::Size(img.width(), img.height()), 0, 0, cv_flag(k));
  return from_mat(out);
}

enum class ShuffleDown { phase_first, phase_last, box_mean };

inline std::string to_string(ShuffleDown d) {
  switch (d) {
    case ShuffleDown::phase_first: return "phase0";
    case ShuffleDown::phase_last: return "phaseN";
    case ShuffleDown::box_mean: return "box";
  }
  return "?";
}

/// Space-to-depth style reduction by `r` (keeping one sub-pixel phase or the
/// block mean) followed by interpolation back to the input size.
inline ImageBuffer pixel_shuffle_roundtrip(const ImageBuffer& img, int r, ShuffleDown down, Kernel up) {
  if (r < 2) throw InvalidArgument("pixel_shuffle_roundtrip: factor must be >= 2");
  const int h = img.height() / r, w = img.width() / r;
  cv::Mat small(h, w, CV_32FC3);
  const int phase = down == ShuffleDown::phase_last ? r - 1 : 0;
  for (int y = 0; y < h; ++y) {
    auto* row = small.ptr<float>(y);
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        if (down == ShuffleDown::box_mean) {
          float s = 0.0f;
          for (int dy = 0; dy < r; ++dy) {
            for (int dx = 0; dx < r; ++dx) s += img.at(y * r + dy, x * r + dx, c);
          }
          row[x * 3 + c] = s / static_cast<float>(r * r);
        } else {
          row[x * 3 + c] = img.at(y * r + phase, x * r + phase, c);
        }
      }
    }
  }
  cv::Mat out;
  cv::resize(small, out, cv::Size(img.width(), img.height()), 0, 0, cv_flag(up));
  return from_mat(out);
}

/// Additive i.i.d. Gaussian noise with standard deviation `sigma` (in [0,1] units).
inline ImageBuffer gaussian_noise(const ImageBuffer& img, double sigma, Rng& rng) {
  if (sigma <= 0.0) return img;
  ImageBuffer out = img;
  for (float& v : out.data()) {
    v = std::clamp(static_cast<float>(v + sigma * normal(rng)), 0.0f, 1.0f);
  }
  return out;
}

/// Shot noise: each value becomes Poisson(lambda * v) / lambda.
inline ImageBuffer poisson_noise(const ImageBuffer& img, double lambda, Rng& rng) {
  ImageBuffer out = img;
  for (float& v : out.data()) {
    const double mean = lambda * v;
    // Knuth's method for small means, normal approximation above.
    double k;
    if (mean < 30.0) {
      const double limit = std::exp(-mean);
      double p = uniform01(rng);
      k = 0.0;
      while (p > limit) {
        p *= uniform01(rng);
        k += 1.0;
      }
    } else {
      k = std::max(0.0, std::round(mean + std::sqrt(mean) * normal(rng)));
    }
    v = std::clamp(static_cast<float>(k / lambda), 0.0f, 1.0f);
  }
  return out;
}

/// Sets a `rate` fraction of pixels (all channels) to black or white with equal odds.
inline ImageBuffer salt_pepper(const ImageBuffer& img, double rate, Rng& rng) {
  ImageBuffer out = img;
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      if (uniform01(rng) >= rate) continue;
      const float v = uniform01(rng) < 0.5 ? 0.0f : 1.0f;
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = v;
    }
  }
  return out;
}

/// Keeps a randomly placed window covering `area_fraction` of the image and resizes it back.
inline ImageBuffer crop_resize(const ImageBuffer& img, double area_fraction, Rng& rng) {
  if (area_fraction >= 1.0) return img;
  const double side = std::sqrt(area_fraction);
  const int h = std::max(1, static_cast<int>(std::lround(img.height() * side)));
  const int w = std::max(1, static_cast<int>(std::lround(img.width() * side)));
  const int top = static_cast<int>(uniform_int(rng, 0, img.height() - h));
  const int left = static_cast<int>(uniform_int(rng, 0, img.width() - w));
  cv::Mat window = to_mat(img)(cv::Rect(left, top, w, h)).clone();
  cv::Mat out;
  cv::resize(window, out, cv::Size(img.width(), img.height()), 0, 0, cv::INTER_LINEAR);
  return from_mat(out);
}

/// Per-channel affine relighting v * gain[c] + bias[c].
inline ImageBuffer relight(const ImageBuffer& img, const std::array<double, 3>& gain,
                           const std::array<double, 3>& bias) {
  ImageBuffer out = img;
  auto d = out.data();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const int c = static_cast<int>(i % 3);
    d[i] = std::clamp(static_cast<float>(d[i] * gain[c] + bias[c]), 0.0f, 1.0f);
  }
  return out;
}

}  // namespace dnadet::ops
