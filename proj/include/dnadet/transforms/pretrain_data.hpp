#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include <opencv2/imgcodecs.hpp>

#include "dnadet/core/manifest.hpp"
#include "dnadet/transforms/bank.hpp"

namespace dnadet::transforms {

struct PretrainSample {
  ImageBuffer image;
  int class_index = 0;
  std::size_t natural_index = 0;
};

/// `per_class` transformed naturals for every bank class, class-major order.
/// Which natural is used and every random draw depend only on (seed, class, slot).
inline std::vector<PretrainSample> make_pretrain_samples(const std::vector<ImageBuffer>& naturals,
                                                         const TransformBank& bank, int per_class,
                                                         std::uint64_t seed) {
  if (naturals.empty()) throw InvalidArgument("pretrain dataset: no natural images");
  if (per_class < 1) throw InvalidArgument("pretrain dataset: per_class must be >= 1");
  std::vector<PretrainSample> out;
  out.reserve(bank.size() * per_class);
  for (const auto& spec : bank.specs) {
    for (int j = 0; j < per_class; ++j) {
      const std::uint64_t slot = static_cast<std::uint64_t>(spec.class_index) * per_class + j;
      Rng pick = make_rng(seed, "pretrain-pick", slot);
      const auto n = static_cast<std::size_t>(uniform_int(pick, 0, static_cast<long long>(naturals.size()) - 1));
      // Stored images are 8-bit, so transforms act on the quantized natural.
      const ImageBuffer src = quantize8(naturals[n]);
      out.push_back({apply_transform(src, spec, stream_seed(seed, "pretrain", slot), bank),
                     spec.class_index, n});
    }
  }
  return out;
}

/// Writes the transformed dataset under `out_dir` (images/ plus manifest.csv) and
/// returns its manifest. Compression classes are stored as the JPEG stream itself.
inline DatasetManifest generate_pretrain_dataset(const std::vector<ImageBuffer>& naturals,
                                                 const TransformBank& bank,
                                                 const std::filesystem::path& out_dir, int per_class,
                                                 std::uint64_t seed) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "images", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "images").string() + ": " + ec.message());
  const auto samples = make_pretrain_samples(naturals, bank, per_class, seed);
  DatasetManifest m;
  m.base_dir = out_dir;
  std::vector<int> slot(bank.size(), 0);
  for (const auto& s : samples) {
    const auto& spec = bank[s.class_index];
    char name[64];
    const bool jpeg = spec.family == Family::compression;
    std::snprintf(name, sizeof(name), "images/%03d_%04d.%s", s.class_index, slot[s.class_index]++,
                  jpeg ? "jpg" : "png");
    const auto path = out_dir / name;
    if (jpeg) {
      std::vector<uchar> bytes;
      cv::imencode(".jpg", to_bgr8(quantize8(naturals[s.natural_index])), bytes,
                   {cv::IMWRITE_JPEG_QUALITY, static_cast<int>(spec.params[0])});
      std::ofstream f(path, std::ios::binary);
      f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
      if (!f) throw IoError("cannot write image: " + path.string());
    } else {
      save_image(s.image, path);
    }
    m.records.push_back({name, std::to_string(s.class_index), spec.name(), to_string(spec.family),
                         static_cast<long long>(seed), "transforms", Split::train});
  }
  save_manifest(m, out_dir / "manifest.csv");
  return m;
}

/// Variant reading the naturals listed in a manifest (labels are ignored).
inline DatasetManifest generate_pretrain_dataset(const DatasetManifest& naturals, const TransformBank& bank,
                                                 const std::filesystem::path& out_dir, int per_class,
                                                 std::uint64_t seed) {
  if (naturals.empty()) throw InvalidArgument("pretrain dataset: naturals manifest is empty");
  std::vector<ImageBuffer> images;
  for (const auto& r : naturals.records) images.push_back(load_image(naturals.resolve(r)));
  return generate_pretrain_dataset(images, bank, out_dir, per_class, seed);
}

}  // namespace dnadet::transforms
