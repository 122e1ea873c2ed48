#pragma once

#include <cmath>
#include <vector>

#include <opencv2/imgproc.hpp>

#include "dnadet/core/image.hpp"
#include "dnadet/core/rng.hpp"

namespace dnadet::transforms {

/// Synthetic stand-in for natural photographs: an occlusion ("dead leaves")
/// model with power-law disk sizes, per-disk colour gradients, soft lighting,
/// mild optical blur and sensor grain. Deterministic in (size, seed, index).
inline ImageBuffer dead_leaves_image(int size, std::uint64_t seed, std::uint64_t index) {
  Rng rng = make_rng(seed, "dead-leaves", index);
  cv::Mat canvas(size, size, CV_32FC3);
  const cv::Scalar bg(uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8), uniform(rng, 0.2, 0.8));
  canvas.setTo(bg);

  // Radii follow p(r) ~ r^-3 on [rmin, rmax], the scale-invariant choice.
  const double rmin = 1.5, rmax = size * 0.35;
  const int leaves = 40 + size * size / 60;
  for (int i = 0; i < leaves; ++i) {
    const double u = uniform01(rng);
    const double r = 1.0 / std::sqrt(1.0 / (rmin * rmin) - u * (1.0 / (rmin * rmin) - 1.0 / (rmax * rmax)));
    const cv::Point2d c(uniform(rng, -0.1, 1.1) * size, uniform(rng, -0.1, 1.1) * size);
    const cv::Vec3f base(static_cast<float>(uniform01(rng)), static_cast<float>(uniform01(rng)),
                         static_cast<float>(uniform01(rng)));
    const double gx = uniform(rng, -0.3, 0.3) / std::max(r, 1.0);
    const double gy = uniform(rng, -0.3, 0.3) / std::max(r, 1.0);
    cv::Mat mask = cv::Mat::zeros(size, size, CV_8U);
    cv::circle(mask, cv::Point(static_cast<int>(std::lround(c.x * 16)), static_cast<int>(std::lround(c.y * 16))),
               static_cast<int>(std::lround(r * 16)), cv::Scalar(255), cv::FILLED, cv::LINE_AA, 4);
    for (int y = 0; y < size; ++y) {
      const auto* m = mask.ptr<uchar>(y);
      auto* row = canvas.ptr<cv::Vec3f>(y);
      for (int x = 0; x < size; ++x) {
        if (!m[x]) continue;
        const float a = m[x] / 255.0f;
        const float shade = static_cast<float>(1.0 + gx * (x - c.x) + gy * (y - c.y));
        const cv::Vec3f col = base * shade;
        row[x] = row[x] * (1.0f - a) + col * a;
      }
    }
  }

  // Smooth illumination falloff, optics, and grain.
  const double lx = uniform(rng, -0.25, 0.25), ly = uniform(rng, -0.25, 0.25);
  for (int y = 0; y < size; ++y) {
    auto* row = canvas.ptr<cv::Vec3f>(y);
    for (int x = 0; x < size; ++x) {
      const float light = static_cast<float>(1.0 + lx * (x / double(size) - 0.5) + ly * (y / double(size) - 0.5));
      row[x] *= light;
    }
  }
  cv::GaussianBlur(canvas, canvas, cv::Size(3, 3), 0.6, 0.6, cv::BORDER_REFLECT_101);
  ImageBuffer out = from_mat(canvas);
  for (float& v : out.data()) v = std::clamp(static_cast<float>(v + 0.004 * normal(rng)), 0.0f, 1.0f);
  return out;
}

inline std::vector<ImageBuffer> dead_leaves_images(int count, int size, std::uint64_t seed) {
  std::vector<ImageBuffer> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) out.push_back(dead_leaves_image(size, seed, static_cast<std::uint64_t>(i)));
  return out;
}

}  // namespace dnadet::transforms
