#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "dnadet/core/error.hpp"

namespace dnadet {

/// H x W x 3 raster, row-major interleaved RGB, values in [0,1].
class ImageBuffer {
 public:
  static constexpr int kChannels = 3;
  static constexpr int kMinSide = 16;

  ImageBuffer() = default;

  /// Zero-filled image.
  ImageBuffer(int height, int width)
      : height_(height), width_(width),
        data_(static_cast<std::size_t>(height) * width * kChannels, 0.0f) {
    check_shape(height, width);
  }

  ImageBuffer(int height, int width, std::vector<float> data)
      : height_(height), width_(width), data_(std::move(data)) {
    check_shape(height, width);
    if (data_.size() != static_cast<std::size_t>(height) * width * kChannels) {
      throw InvalidArgument("ImageBuffer: data size does not match shape");
    }
    validate();
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return kChannels; }
  bool empty() const noexcept { return data_.empty(); }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  float at(int y, int x, int c) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }
  float& at(int y, int x, int c) noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * kChannels + c];
  }

  /// Throws unless every value is finite and inside [0,1].
  void validate() const {
    for (float v : data_) {
      if (!std::isfinite(v) || v < 0.0f || v > 1.0f) {
        throw InvalidArgument("ImageBuffer: value outside [0,1] or non-finite");
      }
    }
  }

  /// Sub-image copy; the crop itself must satisfy the minimum size.
  ImageBuffer crop(int top, int left, int height, int width) const {
    if (top < 0 || left < 0 || top + height > height_ || left + width > width_) {
      throw InvalidArgument("ImageBuffer::crop: window out of bounds");
    }
    ImageBuffer out(height, width);
    for (int y = 0; y < height; ++y) {
      const float* src = &data_[(static_cast<std::size_t>(top + y) * width_ + left) * kChannels];
      std::copy(src, src + static_cast<std::size_t>(width) * kChannels,
                &out.data_[static_cast<std::size_t>(y) * width * kChannels]);
    }
    return out;
  }

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

 private:
  static void check_shape(int height, int width) {
    if (height < kMinSide || width < kMinSide) {
      throw InvalidArgument("ImageBuffer: sides must be >= " + std::to_string(kMinSide) +
                            " (got " + std::to_string(height) + "x" +
                            std::to_string(width) + ")");
    }
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> data_;
};

/// RGB float buffer -> CV_32FC3 (RGB channel order kept).
inline cv::Mat to_mat(const ImageBuffer& img) {
  cv::Mat m(img.height(), img.width(), CV_32FC3);
  std::copy(img.data().begin(), img.data().end(), m.ptr<float>());
  return m;
}

/// CV_32FC3 -> ImageBuffer, clamping into [0,1] and mapping NaN to 0.
inline ImageBuffer from_mat(const cv::Mat& m) {
  cv::Mat f;
  if (m.type() == CV_32FC3) {
    f = m.isContinuous() ? m : m.clone();
  } else {
    m.convertTo(f, CV_32FC3);
  }
  std::vector<float> data(f.ptr<float>(), f.ptr<float>() + f.total() * 3);
  for (float& v : data) {
    v = std::isfinite(v) ? std::clamp(v, 0.0f, 1.0f) : 0.0f;
  }
  return ImageBuffer(f.rows, f.cols, std::move(data));
}

/// Quantize to 8-bit BGR for codecs.
inline cv::Mat to_bgr8(const ImageBuffer& img) {
  cv::Mat rgb = to_mat(img);
  cv::Mat u8;
  rgb.convertTo(u8, CV_8UC3, 255.0);
  cv::Mat bgr;
  cv::cvtColor(u8, bgr, cv::COLOR_RGB2BGR);
  return bgr;
}

inline ImageBuffer from_bgr8(const cv::Mat& bgr) {
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  cv::Mat f;
  rgb.convertTo(f, CV_32FC3, 1.0 / 255.0);
  return from_mat(f);
}

inline ImageBuffer load_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) {
    throw IoError("cannot read image: " + path.string());
  }
  return from_bgr8(bgr);
}

/// Writes PNG (lossless, compression level fixed) or JPEG depending on extension.
inline void save_image(const ImageBuffer& img, const std::filesystem::path& path,
                       int jpeg_quality = 95) {
  std::vector<int> params;
  const auto ext = path.extension().string();
  if (ext == ".jpg" || ext == ".jpeg") {
    params = {cv::IMWRITE_JPEG_QUALITY, jpeg_quality};
  } else {
    params = {cv::IMWRITE_PNG_COMPRESSION, 6};
  }
  if (!cv::imwrite(path.string(), to_bgr8(img), params)) {
    throw IoError("cannot write image: " + path.string());
  }
}

/// Round-trips through 8-bit quantization, which is what a saved image holds.
inline ImageBuffer quantize8(const ImageBuffer& img) {
  std::vector<float> data(img.data().begin(), img.data().end());
  // Ties go to even, as in the codec conversion.
  for (float& v : data) v = std::nearbyint(v * 255.0f) / 255.0f;
  return ImageBuffer(img.height(), img.width(), std::move(data));
}

inline double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw InvalidArgument("psnr: shape mismatch");
  }
  double mse = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.data().size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / mse);
}

}  // namespace dnadet
