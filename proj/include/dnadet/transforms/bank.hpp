#pragma once

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "dnadet/core/error.hpp"
#include "dnadet/core/image.hpp"
#include "dnadet/core/label_space.hpp"
#include "dnadet/core/rng.hpp"
#include "dnadet/transforms/ops.hpp"

namespace dnadet::transforms {

enum class Family { compression, blur, resample, noise };

inline std::string to_string(Family f) {
  switch (f) {
    case Family::compression: return "compression";
    case Family::blur: return "blur";
    case Family::resample: return "resample";
    case Family::noise: return "noise";
  }
  return "?";
}

/// One class of the transform bank. `params` are numeric settings and
/// `options` the kernel or mode names, both in the order the operation expects.
struct TransformSpec {
  Family family = Family::compression;
  std::string operation;
  std::vector<double> params;
  std::vector<std::string> options;
  int class_index = 0;

  /// Stable human-readable identifier, e.g. "gaussian_blur_s1.25_k5".
  std::string name() const;

  friend bool operator==(const TransformSpec&, const TransformSpec&) = default;
};

inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

inline std::string TransformSpec::name() const {
  std::string out = operation;
  if (operation == "jpeg") return out + "_q" + format_number(params.at(0));
  if (operation == "gaussian_blur") {
    return out + "_s" + format_number(params.at(0)) + "_k" + format_number(params.at(1));
  }
  if (operation == "median_blur") return out + "_k" + format_number(params.at(0));
  if (operation == "rescale") return out + "_x" + format_number(params.at(0)) + "_" + options.at(0);
  if (operation == "pixel_shuffle") {
    return out + "_r" + format_number(params.at(0)) + "_" + options.at(0) + "_" + options.at(1);
  }
  if (operation == "gaussian_noise") return out + "_s" + format_number(params.at(0) * 255.0);
  if (operation == "poisson_noise") return out + "_l" + format_number(params.at(0));
  if (operation == "salt_pepper") return out + "_p" + format_number(params.at(0));
  return out;
}

inline constexpr int kBankSize = 170;

struct TransformBank {
  std::vector<TransformSpec> specs;

  std::size_t size() const noexcept { return specs.size(); }
  const TransformSpec& operator[](std::size_t i) const { return specs.at(i); }

  bool contains(const TransformSpec& s) const {
    return s.class_index >= 0 && static_cast<std::size_t>(s.class_index) < specs.size() &&
           specs[s.class_index] == s;
  }

  LabelSpace label_space() const { return LabelSpace::numbered(static_cast<int>(specs.size())); }
};

/// The fixed 170-class grid:
///   compression  JPEG quality 30,32,...,98                                   35
///   blur         Gaussian sigma 0.5..3.0 step 0.25 x kernel {3,5,7}          33
///                median filter {3,5,7}                                        3
///   resample     rescale {0.5,0.67,0.8,1.25,1.5,2} x {nearest,bilinear,bicubic} 18
///                pixel-shuffle r {2,3,4} x down {phase0,phaseN,box}
///                  x up {nearest,bilinear,bicubic,lanczos4}                  36
///   noise        Gaussian sigma {2,4,...,30}/255                             15
///                Poisson lambda {10,20,...,150}                              15
///                salt-and-pepper rate {0.002,0.004,...,0.030}                15
inline TransformBank build_bank() {
  TransformBank bank;
  auto add = [&](Family f, std::string op, std::vector<double> p, std::vector<std::string> o = {}) {
    bank.specs.push_back({f, std::move(op), std::move(p), std::move(o),
                          static_cast<int>(bank.specs.size())});
  };
  for (int q = 30; q <= 98; q += 2) add(Family::compression, "jpeg", {double(q)});
  for (int i = 0; i <= 10; ++i) {
    for (int k : {3, 5, 7}) add(Family::blur, "gaussian_blur", {0.5 + 0.25 * i, double(k)});
  }
  for (int k : {3, 5, 7}) add(Family::blur, "median_blur", {double(k)});
  for (double f : {0.5, 0.67, 0.8, 1.25, 1.5, 2.0}) {
    for (const char* k : {"nearest", "bilinear", "bicubic"}) add(Family::resample, "rescale", {f}, {k});
  }
  for (int r : {2, 3, 4}) {
    for (const char* d : {"phase0", "phaseN", "box"}) {
      for (const char* k : {"nearest", "bilinear", "bicubic", "lanczos4"}) {
        add(Family::resample, "pixel_shuffle", {double(r)}, {d, k});
      }
    }
  }
  for (int i = 1; i <= 15; ++i) add(Family::noise, "gaussian_noise", {2.0 * i / 255.0});
  for (int i = 1; i <= 15; ++i) add(Family::noise, "poisson_noise", {10.0 * i});
  for (int i = 1; i <= 15; ++i) add(Family::noise, "salt_pepper", {0.002 * i});
  return bank;
}

inline ops::ShuffleDown parse_shuffle_down(const std::string& s) {
  for (auto d : {ops::ShuffleDown::phase_first, ops::ShuffleDown::phase_last, ops::ShuffleDown::box_mean}) {
    if (ops::to_string(d) == s) return d;
  }
  throw InvalidArgument("unknown pixel-shuffle mode: " + s);
}

/// Applies one bank transform; output has the input's size. Randomized
/// operations draw from a stream derived from `seed` only.
inline ImageBuffer apply_transform(const ImageBuffer& img, const TransformSpec& spec,
                                   std::uint64_t seed, const TransformBank& bank) {
  if (!bank.contains(spec)) throw InvalidArgument("transform is not part of the bank: " + spec.name());
  Rng rng = make_rng(seed, "transform", static_cast<std::uint64_t>(spec.class_index));
  const auto& op = spec.operation;
  const auto& p = spec.params;
  if (op == "jpeg") return ops::jpeg(img, static_cast<int>(p[0]));
  if (op == "gaussian_blur") return ops::gaussian_blur(img, p[0], static_cast<int>(p[1]));
  if (op == "median_blur") return ops::median_blur(img, static_cast<int>(p[0]));
  if (op == "rescale") return ops::rescale_roundtrip(img, p[0], ops::parse_kernel(spec.options[0]));
  if (op == "pixel_shuffle") {
    return ops::pixel_shuffle_roundtrip(img, static_cast<int>(p[0]), parse_shuffle_down(spec.options[0]),
                                        ops::parse_kernel(spec.options[1]));
  }
  if (op == "gaussian_noise") return ops::gaussian_noise(img, p[0], rng);
  if (op == "poisson_noise") return ops::poisson_noise(img, p[0], rng);
  if (op == "salt_pepper") return ops::salt_pepper(img, p[0], rng);
  throw InvalidArgument("unknown transform operation: " + op);
}

inline ImageBuffer apply_transform(const ImageBuffer& img, const TransformSpec& spec, std::uint64_t seed) {
  static const TransformBank bank = build_bank();
  return apply_transform(img, spec, seed, bank);
}

/// Tab-separated table: class_index, family, operation, name, params, options.
inline void write_bank_table(const TransformBank& bank, std::ostream& out) {
  out << "class_index\tfamily\toperation\tname\tparams\toptions\n";
  for (const auto& s : bank.specs) {
    std::string params, options;
    for (std::size_t i = 0; i < s.params.size(); ++i) params += (i ? ";" : "") + format_number(s.params[i]);
    for (std::size_t i = 0; i < s.options.size(); ++i) options += (i ? ";" : "") + s.options[i];
    out << s.class_index << '\t' << to_string(s.family) << '\t' << s.operation << '\t' << s.name()
        << '\t' << params << '\t' << (options.empty() ? "-" : options) << '\n';
  }
}

}  // namespace dnadet::transforms
