#pragma once

#include <array>
#include <string>
#include <vector>

#include "dnadet/eval/metrics.hpp"
#include "dnadet/synth_zoo/zoo.hpp"
#include "dnadet/trainer/trainer.hpp"

namespace dnadet::eval {

enum class StudyTask { architecture, weight };

inline std::string to_string(StudyTask t) { return t == StudyTask::architecture ? "architecture" : "weight"; }

inline StudyTask parse_task(const std::string& s) {
  if (s == "architecture") return StudyTask::architecture;
  if (s == "weight") return StudyTask::weight;
  throw InvalidArgument("unknown study task: " + s + " (expected architecture|weight)");
}

inline constexpr int kGrid = 4;
inline constexpr int kPositions = kGrid * kGrid;

/// Settings of the position study. Training reads only grid tile
/// `train_position` of each magnified image and crops `patch_size` patches
/// inside it; testing classifies whole tiles at every position.
struct StudyConfig {
  ExperimentConfig train;           // optimizer, batch, patch and model settings
  int resolution = 64;              // zoo output size
  int train_per_class = 1000;
  int test_per_class = 200;
  std::string weight_spec = "ProGAN";  // generator whose seeds form the weight task
  std::uint64_t data_seed = 0;        // latent streams of the study images
};

struct StudyResult {
  StudyTask task = StudyTask::architecture;
  int train_position = 1;
  std::array<double, kPositions> accuracy{};

  double on_position() const { return accuracy[train_position - 1]; }
  double mean_off_position() const {
    double s = 0.0;
    for (int p = 0; p < kPositions; ++p) {
      if (p != train_position - 1) s += accuracy[p];
    }
    return s / (kPositions - 1);
  }
  double min() const { return *std::min_element(accuracy.begin(), accuracy.end()); }
};

/// The generators of a task: four architectures at weight seed 0, or four
/// weight seeds of one architecture.
inline std::vector<zoo::GeneratorInstance> study_generators(StudyTask task, const StudyConfig& cfg) {
  const auto specs = zoo::builtin_specs(cfg.resolution);
  std::vector<zoo::GeneratorInstance> out;
  if (task == StudyTask::architecture) {
    for (const auto& s : specs) out.push_back(zoo::build_generator(s, 0));
  } else {
    const auto spec = zoo::find_spec(specs, cfg.weight_spec);
    for (int seed = 0; seed < 4; ++seed) out.push_back(zoo::build_generator(spec, seed));
  }
  return out;
}

/// Tiles at `position` of the magnified images.
inline trainer::TrainSet tile_set(const std::vector<std::vector<ImageBuffer>>& per_class_views, int position) {
  trainer::TrainSet s;
  s.magnify = false;
  for (std::size_t c = 0; c < per_class_views.size(); ++c) {
    for (const auto& v : per_class_views[c]) {
      s.images.push_back(sampler::grid_tile(v, kGrid, position));
      s.labels.push_back(static_cast<int>(c));
    }
  }
  return s;
}

/// Trains on one grid position and reports accuracy at all 16. A non-empty
/// `cfg.train.init_checkpoint` initializes the encoder from transform pretraining.
inline StudyResult patch_position_study(StudyTask task, int train_position, const StudyConfig& cfg,
                                        const trainer::TrainOptions& opt = {}) {
  if (train_position < 1 || train_position > kPositions) {
    throw InvalidArgument("patch study: train position must be in [1,16], got " + std::to_string(train_position));
  }
  auto gens = study_generators(task, cfg);
  const int C = static_cast<int>(gens.size());
  sampler::PatchPlan magnify{cfg.train.resize_size, cfg.train.resize_size, 1, cfg.train.low_res_equalize};
  if (cfg.train.resize_size % kGrid != 0) throw InvalidArgument("patch study: resize_size must divide into a 4x4 grid");

  std::vector<std::vector<ImageBuffer>> train_views(C), test_views(C);
  std::vector<std::string> names;
  for (int c = 0; c < C; ++c) {
    const auto id = zoo::model_id(gens[c].spec(), gens[c].weight_seed());
    names.push_back(id);
    for (const auto& img : gens[c].sample(cfg.train_per_class, zoo::zoo_latent_seed(cfg.data_seed, id, "study-train"))) {
      train_views[c].push_back(sampler::equalize_then_magnify(quantize8(img), magnify));
    }
    for (const auto& img : gens[c].sample(cfg.test_per_class, zoo::zoo_latent_seed(cfg.data_seed, id, "study-test"))) {
      test_views[c].push_back(sampler::equalize_then_magnify(quantize8(img), magnify));
    }
  }

  ExperimentConfig tcfg = cfg.train;
  tcfg.labels = LabelSpace(names);
  const int tile = cfg.train.resize_size / kGrid;
  tcfg.resize_size = tile;
  tcfg.patch_size = std::min(cfg.train.patch_size, tile);
  tcfg.low_res_equalize = 0;
  tcfg.checkpoint_epoch = std::min(tcfg.checkpoint_epoch, tcfg.max_epochs);
  auto model = tcfg.init_checkpoint.empty()
                   ? model::ModelState<float>::create(model::EncoderConfig::with_width(tcfg.encoder_width),
                                                      tcfg.labels, tcfg.rng_seed)
                   : [&] {
                       auto m = model::load_checkpoint<float>(tcfg.init_checkpoint);
                       m.reset_head(tcfg.labels, stream_seed(tcfg.rng_seed, "head"));
                       return m;
                     }();
  auto trained = trainer::run_step(std::move(model), tile_set(train_views, train_position), trainer::TrainSet{},
                                   tcfg, opt);

  StudyResult r;
  r.task = task;
  r.train_position = train_position;
  const auto plan = sampler::PatchPlan::from_config(tcfg);
  for (int p = 1; p <= kPositions; ++p) {
    r.accuracy[p - 1] = trainer::set_accuracy(trained.model, tile_set(test_views, p), plan);
  }
  return r;
}

inline EvalReport to_report(const StudyResult& r) {
  EvalReport rep;
  rep.split_name = "patch_study_" + to_string(r.task) + "_p" + std::to_string(r.train_position);
  rep.accuracy = r.on_position();
  rep.per_position = std::vector<double>(r.accuracy.begin(), r.accuracy.end());
  return rep;
}

}  // namespace dnadet::eval
