#pragma once

#include <algorithm>
#include <vector>

#include "dnadet/core/config.hpp"
#include "dnadet/core/image.hpp"
#include "dnadet/core/rng.hpp"
#include "dnadet/transforms/ops.hpp"

namespace dnadet::sampler {

/// Side of the crop applied by the celeba and center preprocessing rules.
inline constexpr int kCropSize = 128;
inline constexpr int kCelebaCenterX = 89;
inline constexpr int kCelebaCenterY = 121;
/// Kernel of every magnifying or equalizing resize.
inline constexpr ops::Kernel kResizeKernel = ops::Kernel::bilinear;

struct PatchPlan {
  int resize_size = 512;
  int patch_size = 64;
  int patches_per_image = 16;
  int low_res_equalize = 0;  // 0: no equalizing resize

  static PatchPlan from_config(const ExperimentConfig& cfg) {
    PatchPlan p{cfg.resize_size, cfg.patch_size, cfg.patches_per_image, cfg.low_res_equalize};
    p.validate();
    return p;
  }

  void validate() const {
    if (patch_size < ImageBuffer::kMinSide || patch_size > resize_size) {
      throw InvalidArgument("patch plan: need 16 <= patch_size <= resize_size");
    }
    if (patches_per_image < 1) throw InvalidArgument("patch plan: patches_per_image must be >= 1");
    if (low_res_equalize < 0) throw InvalidArgument("patch plan: low_res_equalize must be >= 0");
  }
};

/// Dataset-specific crop to 128x128: celeba crops around (89,121), center crops
/// the middle, native passes the image through.
inline ImageBuffer preprocess(const ImageBuffer& img, SourceKind source) {
  if (source == SourceKind::native) return img;
  if (img.height() < kCropSize || img.width() < kCropSize) {
    throw InvalidArgument("preprocess: image " + std::to_string(img.width()) + "x" +
                          std::to_string(img.height()) + " is smaller than the 128px crop");
  }
  int top, left;
  if (source == SourceKind::celeba) {
    top = kCelebaCenterY - kCropSize / 2;
    left = kCelebaCenterX - kCropSize / 2;
    if (top < 0 || left < 0 || top + kCropSize > img.height() || left + kCropSize > img.width()) {
      throw InvalidArgument("preprocess: celeba crop window falls outside the image");
    }
  } else {
    top = (img.height() - kCropSize) / 2;
    left = (img.width() - kCropSize) / 2;
  }
  return img.crop(top, left, kCropSize, kCropSize);
}

/// Optional resize to low_res_equalize, then resize to resize_size (bilinear).
inline ImageBuffer equalize_then_magnify(const ImageBuffer& img, const PatchPlan& plan) {
  ImageBuffer out = img;
  if (plan.low_res_equalize > 0) {
    out = ops::resize(out, plan.low_res_equalize, plan.low_res_equalize, kResizeKernel);
  }
  return ops::resize(out, plan.resize_size, plan.resize_size, kResizeKernel);
}

struct PatchOffset {
  int top = 0;
  int left = 0;
  friend bool operator==(const PatchOffset&, const PatchOffset&) = default;
};

/// Independent uniform offsets (with replacement) over all valid positions.
inline std::vector<PatchOffset> sample_offsets(int height, int width, const PatchPlan& plan, Rng& rng) {
  if (height < plan.patch_size || width < plan.patch_size) {
    throw InvalidArgument("sample_patches: image smaller than patch");
  }
  std::vector<PatchOffset> out(plan.patches_per_image);
  for (auto& o : out) {
    o.top = static_cast<int>(uniform_int(rng, 0, height - plan.patch_size));
    o.left = static_cast<int>(uniform_int(rng, 0, width - plan.patch_size));
  }
  return out;
}

inline std::vector<ImageBuffer> sample_patches(const ImageBuffer& img, const PatchPlan& plan, Rng& rng) {
  std::vector<ImageBuffer> out;
  for (const auto& o : sample_offsets(img.height(), img.width(), plan, rng)) {
    out.push_back(img.crop(o.top, o.left, plan.patch_size, plan.patch_size));
  }
  return out;
}

/// Offset of tile `position` (1-based, row-major from the top-left).
inline PatchOffset grid_offset(int side, int grid, int position) {
  if (position < 1 || position > grid * grid) {
    throw InvalidArgument("grid position must be in [1," + std::to_string(grid * grid) + "]");
  }
  const int tile = side / grid;
  return {((position - 1) / grid) * tile, ((position - 1) % grid) * tile};
}

inline ImageBuffer grid_tile(const ImageBuffer& img, int grid, int position) {
  if (img.height() != img.width() || img.height() % grid != 0) {
    throw InvalidArgument("grid_patches: image side must be square and divisible by the grid");
  }
  const auto o = grid_offset(img.height(), grid, position);
  const int tile = img.height() / grid;
  return img.crop(o.top, o.left, tile, tile);
}

/// Non-overlapping grid x grid tiling; element k is tile position k+1.
inline std::vector<ImageBuffer> grid_patches(const ImageBuffer& img, int grid = 4) {
  std::vector<ImageBuffer> out;
  for (int p = 1; p <= grid * grid; ++p) out.push_back(grid_tile(img, grid, p));
  return out;
}

/// Inverse of grid_patches.
inline ImageBuffer reassemble(const std::vector<ImageBuffer>& tiles, int grid = 4) {
  if (tiles.size() != static_cast<std::size_t>(grid * grid)) throw InvalidArgument("reassemble: wrong tile count");
  const int tile = tiles[0].height();
  ImageBuffer out(tile * grid, tile * grid);
  for (int p = 1; p <= grid * grid; ++p) {
    const auto& t = tiles[p - 1];
    if (t.height() != tile || t.width() != tile) throw InvalidArgument("reassemble: tiles differ in size");
    const auto o = grid_offset(tile * grid, grid, p);
    for (int y = 0; y < tile; ++y) {
      for (int x = 0; x < tile; ++x) {
        for (int c = 0; c < 3; ++c) out.at(o.top + y, o.left + x, c) = t.at(y, x, c);
      }
    }
  }
  return out;
}

/// Endless stream of class-balanced index batches. Each class walks its own
/// shuffled order and reshuffles when exhausted.
class BalancedBatchStream {
 public:
  BalancedBatchStream(const std::vector<int>& labels, int num_classes, int per_class, std::uint64_t seed)
      : per_class_(per_class), rng_(make_rng(seed, "balanced-batches")) {
    if (per_class < 1) throw InvalidArgument("balanced_batches: per_class must be >= 1");
    members_.resize(num_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] < 0 || labels[i] >= num_classes) throw InvalidArgument("balanced_batches: label out of range");
      members_[labels[i]].push_back(i);
    }
    for (int c = 0; c < num_classes; ++c) {
      if (members_[c].empty()) {
        throw InvalidArgument("balanced_batches: class " + std::to_string(c) + " has no records");
      }
    }
    order_ = members_;
    cursor_.assign(num_classes, 0);
    for (auto& o : order_) shuffle(o.begin(), o.end(), rng_);
  }

  int num_classes() const noexcept { return static_cast<int>(members_.size()); }
  int per_class() const noexcept { return per_class_; }

  /// Batches needed for the smallest class to be seen once.
  long long batches_per_epoch() const {
    std::size_t smallest = members_[0].size();
    for (const auto& m : members_) smallest = std::min(smallest, m.size());
    return static_cast<long long>((smallest + per_class_ - 1) / per_class_);
  }

  /// Class-major: per_class indices of class 0, then class 1, ...
  std::vector<std::size_t> next() {
    std::vector<std::size_t> batch;
    batch.reserve(static_cast<std::size_t>(per_class_) * members_.size());
    for (std::size_t c = 0; c < members_.size(); ++c) {
      for (int k = 0; k < per_class_; ++k) {
        if (cursor_[c] == order_[c].size()) {
          order_[c] = members_[c];
          shuffle(order_[c].begin(), order_[c].end(), rng_);
          cursor_[c] = 0;
        }
        batch.push_back(order_[c][cursor_[c]++]);
      }
    }
    return batch;
  }

 private:
  int per_class_;
  Rng rng_;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::vector<std::size_t>> order_;
  std::vector<std::size_t> cursor_;
};

inline BalancedBatchStream balanced_batches(const std::vector<int>& labels, int num_classes, int per_class,
                                            std::uint64_t seed) {
  return BalancedBatchStream(labels, num_classes, per_class, seed);
}

}  // namespace dnadet::sampler
