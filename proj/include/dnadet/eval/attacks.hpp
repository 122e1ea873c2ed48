#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dnadet/core/image.hpp"
#include "dnadet/core/rng.hpp"
#include "dnadet/eval/metrics.hpp"
#include "dnadet/transforms/ops.hpp"

namespace dnadet::eval {

enum class AttackKind { none, noise, blur, crop, jpeg, relight, combination };

inline std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::noise: return "noise";
    case AttackKind::blur: return "blur";
    case AttackKind::crop: return "crop";
    case AttackKind::jpeg: return "jpeg";
    case AttackKind::relight: return "relight";
    case AttackKind::combination: return "combination";
  }
  return "?";
}

inline AttackKind parse_attack(const std::string& s) {
  for (auto k : {AttackKind::none, AttackKind::noise, AttackKind::blur, AttackKind::crop, AttackKind::jpeg,
                 AttackKind::relight, AttackKind::combination}) {
    if (to_string(k) == s) return k;
  }
  throw InvalidArgument("unknown attack kind: " + s);
}

/// Canonical order in which a combination applies its members.
inline constexpr std::array<AttackKind, 5> kBaseAttacks = {AttackKind::crop, AttackKind::blur, AttackKind::noise,
                                                           AttackKind::jpeg, AttackKind::relight};

/// Parameter ranges:
///   noise   sigma ~ U[0, 5/255]
///   blur    sigma ~ U[0, 3]
///   crop    kept area ~ U[0.8, 1], resized back
///   jpeg    quality ~ U{50..100}
///   relight gain ~ U[0.8, 1.2], bias ~ U[-0.05, 0.05], per channel
struct AttackParams {
  double noise_sigma = 0.0;
  double blur_sigma = 0.0;
  double crop_area = 1.0;
  int jpeg_quality = 100;
  std::array<double, 3> gain{1.0, 1.0, 1.0};
  std::array<double, 3> bias{0.0, 0.0, 0.0};

  /// Every parameter at its identity end of the range.
  static AttackParams zero_strength() { return {}; }

  void validate() const {
    auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
    bool ok = in(noise_sigma, 0.0, 5.0 / 255.0) && in(blur_sigma, 0.0, 3.0) && in(crop_area, 0.8, 1.0) &&
              in(jpeg_quality, 50, 100);
    for (int c = 0; c < 3; ++c) ok = ok && in(gain[c], 0.8, 1.2) && in(bias[c], -0.05, 0.05);
    if (!ok) throw InvalidArgument("attack parameters outside the documented ranges");
  }

  static AttackParams sample(Rng& rng) {
    AttackParams p;
    p.noise_sigma = uniform(rng, 0.0, 5.0 / 255.0);
    p.blur_sigma = uniform(rng, 0.0, 3.0);
    p.crop_area = uniform(rng, 0.8, 1.0);
    p.jpeg_quality = static_cast<int>(uniform_int(rng, 50, 100));
    for (int c = 0; c < 3; ++c) p.gain[c] = uniform(rng, 0.8, 1.2);
    for (int c = 0; c < 3; ++c) p.bias[c] = uniform(rng, -0.05, 0.05);
    return p;
  }
};

/// An attack kind with its seed. Parameters are drawn from the ranges per call
/// unless `fixed` pins them.
struct AttackSpec {
  AttackKind kind = AttackKind::none;
  std::uint64_t seed = 0;
  std::optional<AttackParams> fixed;
};

inline ImageBuffer apply_single(const ImageBuffer& img, AttackKind kind, const AttackParams& p, Rng& rng) {
  switch (kind) {
    case AttackKind::none: return img;
    case AttackKind::noise: return ops::gaussian_noise(img, p.noise_sigma, rng);
    case AttackKind::blur: return ops::gaussian_blur(img, p.blur_sigma);
    case AttackKind::crop: return ops::crop_resize(img, p.crop_area, rng);
    case AttackKind::jpeg: return ops::jpeg(img, p.jpeg_quality);
    case AttackKind::relight: return ops::relight(img, p.gain, p.bias);
    case AttackKind::combination: break;
  }
  throw InvalidArgument("apply_single: combination is not a single attack");
}

/// Members of a combination: a uniformly drawn non-empty subset of the five
/// base attacks, in canonical order.
inline std::vector<AttackKind> combination_members(Rng& rng) {
  const auto mask = static_cast<unsigned>(uniform_int(rng, 1, 31));
  std::vector<AttackKind> out;
  for (std::size_t i = 0; i < kBaseAttacks.size(); ++i) {
    if (mask & (1u << i)) out.push_back(kBaseAttacks[i]);
  }
  return out;
}

/// Deterministic in (img, spec); output keeps the input size.
inline ImageBuffer attack(const ImageBuffer& img, const AttackSpec& spec) {
  Rng rng = make_rng(spec.seed, "attack:" + to_string(spec.kind));
  const AttackParams p = spec.fixed ? *spec.fixed : AttackParams::sample(rng);
  p.validate();
  if (spec.kind != AttackKind::combination) return apply_single(img, spec.kind, p, rng);
  ImageBuffer out = img;
  for (auto k : combination_members(rng)) out = apply_single(out, k, p, rng);
  return out;
}

/// Per-attack full-image evaluation. Image i is attacked with seed
/// stream_seed(seed, kind, i) before preprocessing and magnification.
inline std::map<std::string, EvalReport> robustness_eval(model::ModelState<float>& m, const DatasetManifest& manifest,
                                                         const LabelSpace& labels,
                                                         const std::vector<AttackKind>& kinds, std::uint64_t seed,
                                                         SourceKind source, const sampler::PatchPlan& plan) {
  if (kinds.empty()) throw InvalidArgument("robustness_eval: no attacks requested");
  check_labels(m, labels);
  std::vector<ImageBuffer> raw;
  std::vector<int> truth;
  for (const auto& r : manifest.records) {
    raw.push_back(load_image(manifest.resolve(r)));
    truth.push_back(labels.index_of(r.class_label));
  }
  std::map<std::string, EvalReport> out;
  for (auto kind : kinds) {
    std::vector<ImageBuffer> views;
    views.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      const AttackSpec spec{kind, stream_seed(seed, to_string(kind), i), std::nullopt};
      views.push_back(sampler::equalize_then_magnify(sampler::preprocess(attack(raw[i], spec), source), plan));
    }
    out[to_string(kind)] = evaluate_predictions(truth, predict_views(m, views), labels, to_string(kind));
  }
  return out;
}

}  // namespace dnadet::eval
