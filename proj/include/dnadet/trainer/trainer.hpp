#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dnadet/core/config.hpp"
#include "dnadet/core/manifest.hpp"
#include "dnadet/model/checkpoint.hpp"
#include "dnadet/nn/adam.hpp"
#include "dnadet/sampler/sampler.hpp"
#include "dnadet/trainer/objective.hpp"
#include "dnadet/transforms/bank.hpp"

namespace dnadet::trainer {

/// Which manifest column supplies the class of a record.
enum class LabelField { class_label, architecture_id, model_id };

inline const std::string& label_of(const ManifestRecord& r, LabelField f) {
  switch (f) {
    case LabelField::architecture_id: return r.architecture_id;
    case LabelField::model_id: return r.model_id;
    default: return r.class_label;
  }
}

/// Images ready for patch sampling plus integer labels. With `magnify` set the
/// equalize-then-magnify resize runs on the fly, so images stay at their
/// preprocessed size in memory.
struct TrainSet {
  std::vector<ImageBuffer> images;
  std::vector<int> labels;
  bool magnify = true;

  std::size_t size() const noexcept { return images.size(); }
  bool empty() const noexcept { return images.empty(); }

  ImageBuffer view(std::size_t i, const sampler::PatchPlan& plan) const {
    return magnify ? sampler::equalize_then_magnify(images[i], plan) : images[i];
  }
};

/// Loads and preprocesses every record of `m`; labels come from `field`.
inline TrainSet load_set(const DatasetManifest& m, const LabelSpace& labels, SourceKind source,
                         LabelField field = LabelField::class_label) {
  TrainSet s;
  for (const auto& r : m.records) {
    const auto idx = labels.find(label_of(r, field));
    if (!idx) throw ManifestError("record " + r.image_path + ": label '" + label_of(r, field) + "' not in label space");
    s.images.push_back(sampler::preprocess(load_image(m.resolve(r)), source));
    s.labels.push_back(*idx);
  }
  return s;
}

/// Train and validation manifests for a config: an explicit val manifest wins,
/// then records marked val in the train manifest, then a seeded val_fraction
/// hold-out of the train records.
inline std::pair<DatasetManifest, DatasetManifest> train_val_split(const DatasetManifest& train_file,
                                                                   const ExperimentConfig& cfg,
                                                                   const std::optional<DatasetManifest>& val_file = {}) {
  auto train = filter_split(train_file, Split::train);
  if (val_file) {
    auto marked = filter_split(*val_file, Split::val);
    return {train, marked.empty() ? *val_file : marked};
  }
  auto val = filter_split(train_file, Split::val);
  if (!val.empty() || cfg.val_fraction <= 0.0) return {train, val};
  std::vector<std::size_t> order(train.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = make_rng(cfg.rng_seed, "val-split");
  shuffle(order.begin(), order.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::lround(cfg.val_fraction * static_cast<double>(train.size())));
  std::vector<bool> is_val(train.size(), false);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
  DatasetManifest t{{}, train.base_dir}, v{{}, train.base_dir};
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto r = train.records[i];
    if (is_val[i]) {
      r.split = Split::val;
      v.records.push_back(r);
    } else {
      t.records.push_back(r);
    }
  }
  return {t, v};
}

struct IterationRecord {
  long long iteration = 0;  // 1-based count of completed optimizer steps
  double lr = 0.0;
  ObjectiveResult objective;
};

struct EpochRecord {
  int epoch = 0;
  long long iteration = 0;
  double l_con = 0.0;  // means over the epoch's iterations
  double l_ce = 0.0;
  double total = 0.0;
  double w_con = 0.0;
  double w_ce = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = std::nan("");
};

struct TrainOptions {
  /// Output directory for checkpoints and history files; empty keeps everything in memory.
  std::filesystem::path out_dir;
  /// Recorded in checkpoint metadata (e.g. "DNA-Det", "Base+PCL").
  std::string tag;
  std::function<void(const IterationRecord&)> on_iteration;
  std::function<void(const EpochRecord&)> on_epoch;
  /// Optional per-image augmentation applied to the magnified view before cropping.
  std::function<ImageBuffer(const ImageBuffer&, Rng&)> augment;
};

struct TrainResult {
  model::ModelState<float> model;  // snapshot at checkpoint_epoch, or the last epoch if fewer ran
  int selected_epoch = 0;
  std::vector<EpochRecord> history;
  std::vector<IterationRecord> iterations;
  std::filesystem::path final_checkpoint;
};

/// Accuracy of full-view inference over a set, in batches.
inline double set_accuracy(model::ModelState<float>& m, const TrainSet& s, const sampler::PatchPlan& plan,
                           int batch = 32) {
  if (s.empty()) return std::nan("");
  std::size_t correct = 0;
  for (std::size_t first = 0; first < s.size(); first += batch) {
    const std::size_t last = std::min(s.size(), first + batch);
    std::vector<ImageBuffer> views;
    for (std::size_t i = first; i < last; ++i) views.push_back(s.view(i, plan));
    const auto pred = model::predict(m, std::span<const ImageBuffer>(views));
    for (std::size_t i = first; i < last; ++i) correct += pred[i - first] == s.labels[i];
  }
  m.encoder.release();
  return static_cast<double>(correct) / static_cast<double>(s.size());
}

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline void write_history(const std::vector<EpochRecord>& h, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "epoch,iteration,l_con,l_ce,total,w_con,w_ce,train_accuracy,val_accuracy\n";
  for (const auto& e : h) {
    out << e.epoch << ',' << e.iteration << ',' << fmt(e.l_con) << ',' << fmt(e.l_ce) << ',' << fmt(e.total)
        << ',' << fmt(e.w_con) << ',' << fmt(e.w_ce) << ',' << fmt(e.train_accuracy) << ','
        << (std::isnan(e.val_accuracy) ? std::string() : fmt(e.val_accuracy)) << '\n';
  }
  if (!out) throw IoError("cannot write " + path.string());
}

inline void write_iterations(const std::vector<IterationRecord>& its, const std::filesystem::path& path) {
  std::ofstream out(path);
  out << "iteration,lr,l_con,l_ce,total,w_con,w_ce,batch_accuracy\n";
  for (const auto& r : its) {
    const auto& o = r.objective;
    out << r.iteration << ',' << fmt(r.lr) << ',' << fmt(o.l_con) << ',' << fmt(o.l_ce) << ',' << fmt(o.total)
        << ',' << fmt(o.w_con) << ',' << fmt(o.w_ce) << ','
        << fmt(o.count ? static_cast<double>(o.correct) / o.count : 0.0) << '\n';
  }
  if (!out) throw IoError("cannot write " + path.string());
}

/// One training step of the pipeline (transform pretraining or architecture
/// training): balanced batches -> random patches -> objective -> Adam with the
/// step-decay schedule, validation and a checkpoint at the end of every epoch.
/// An epoch is the number of batches needed to visit the smallest class once.
/// Without PCL the classifier trains on whole views instead of patches.
inline TrainResult run_step(model::ModelState<float> state, const TrainSet& train, const TrainSet& val,
                            const ExperimentConfig& cfg, const TrainOptions& opt = {}) {
  cfg.validate();
  const auto plan = sampler::PatchPlan::from_config(cfg);
  if (train.empty()) throw InvalidArgument("run_step: empty training set");
  sampler::BalancedBatchStream stream(train.labels, state.num_classes(), cfg.per_class_batch,
                                      stream_seed(cfg.rng_seed, "batches"));
  Rng patch_rng = make_rng(cfg.rng_seed, "patches");
  Rng aug_rng = make_rng(cfg.rng_seed, "augment");
  const long long per_epoch = stream.batches_per_epoch();
  const long long total_iters = cfg.max_iterations > 0 ? cfg.max_iterations : per_epoch * cfg.max_epochs;
  const ObjectiveOptions objective{cfg.pcl, cfg.temperature};

  if (!opt.out_dir.empty()) std::filesystem::create_directories(opt.out_dir);
  nlohmann::json meta = {{"tag", opt.tag}, {"config_hash", std::to_string(cfg.hash())}};

  TrainResult result;
  std::optional<model::ModelState<float>> snapshot;
  nn::Adam<float> adam(state.params());
  EpochRecord acc;
  long long in_epoch = 0;
  int epoch = 0;

  for (long long it = 0; it < total_iters; ++it) {
    const auto batch = stream.next();
    std::vector<ImageBuffer> inputs;
    std::vector<int> labels;
    for (auto idx : batch) {
      auto view = train.view(idx, plan);
      if (opt.augment) view = opt.augment(view, aug_rng);
      if (cfg.pcl) {
        for (auto& p : sampler::sample_patches(view, plan, patch_rng)) {
          inputs.push_back(std::move(p));
          labels.push_back(train.labels[idx]);
        }
      } else {
        inputs.push_back(std::move(view));
        labels.push_back(train.labels[idx]);
      }
    }
    const double lr = scheduled_lr(cfg, it);
    adam.zero_grad();
    const auto r = compute_objective(state, model::to_tensor<float>(inputs), labels, objective, true);
    if (!std::isfinite(r.total)) {
      throw DivergenceError(it + 1, "non-finite loss");
    }
    adam.step(lr);
    state.encoder.release();
    ++state.iteration;

    IterationRecord rec{it + 1, lr, r};
    result.iterations.push_back(rec);
    if (opt.on_iteration) opt.on_iteration(rec);
    acc.l_con += r.l_con;
    acc.l_ce += r.l_ce;
    acc.total += r.total;
    acc.w_con += r.w_con;
    acc.w_ce += r.w_ce;
    acc.train_accuracy += static_cast<double>(r.correct) / r.count;
    ++in_epoch;

    if (in_epoch == per_epoch || it + 1 == total_iters) {
      ++epoch;
      EpochRecord e = acc;
      const double n = static_cast<double>(in_epoch);
      e.epoch = epoch;
      e.iteration = it + 1;
      e.l_con /= n;
      e.l_ce /= n;
      e.total /= n;
      e.w_con /= n;
      e.w_ce /= n;
      e.train_accuracy /= n;
      e.val_accuracy = set_accuracy(state, val, plan);
      result.history.push_back(e);
      if (opt.on_epoch) opt.on_epoch(e);
      if (!opt.out_dir.empty()) {
        char name[32];
        std::snprintf(name, sizeof(name), "epoch_%03d.ckpt", epoch);
        auto m = meta;
        m["epoch"] = epoch;
        model::save_checkpoint(state, opt.out_dir / name, m);
      }
      if (epoch == cfg.checkpoint_epoch) {
        snapshot = state;
        result.selected_epoch = epoch;
      }
      acc = EpochRecord{};
      in_epoch = 0;
    }
  }
  if (!snapshot) {
    snapshot = state;
    result.selected_epoch = epoch;
  }
  result.model = std::move(*snapshot);
  if (!opt.out_dir.empty()) {
    auto m = meta;
    m["epoch"] = result.selected_epoch;
    result.final_checkpoint = opt.out_dir / "final.ckpt";
    model::save_checkpoint(result.model, result.final_checkpoint, m);
    write_history(result.history, opt.out_dir / "history.csv");
    write_iterations(result.iterations, opt.out_dir / "iterations.csv");
  }
  return result;
}

/// Fresh or checkpoint-initialized model for architecture training. With
/// pretraining enabled an init checkpoint is required; its encoder and
/// projection are kept and the classifier and loss weights are re-initialized.
inline model::ModelState<float> init_architecture_model(const ExperimentConfig& cfg) {
  if (cfg.labels.size() < 2) throw ConfigError("config key 'labels': need at least two classes");
  if (cfg.pretrain) {
    if (cfg.init_checkpoint.empty()) {
      throw ConfigError("config key 'init_checkpoint' is required when pretrain = true");
    }
    auto m = model::load_checkpoint<float>(cfg.init_checkpoint);
    m.reset_head(cfg.labels, stream_seed(cfg.rng_seed, "head"));
    return m;
  }
  return model::ModelState<float>::create(model::EncoderConfig::with_width(cfg.encoder_width), cfg.labels,
                                          cfg.rng_seed);
}

/// Step 1: transform-classification training over the full 170-class bank.
inline TrainResult pretrain_transforms(const TrainSet& train, const TrainSet& val, const LabelSpace& labels,
                                       const ExperimentConfig& cfg, const TrainOptions& opt = {}) {
  if (labels.size() != transforms::kBankSize) {
    throw InvalidArgument("pretrain_transforms: label space must have 170 classes, got " +
                          std::to_string(labels.size()));
  }
  auto m = model::ModelState<float>::create(model::EncoderConfig::with_width(cfg.encoder_width), labels,
                                            cfg.rng_seed);
  return run_step(std::move(m), train, val, cfg, opt);
}

/// Report tag for an architecture run: Base, Base+PT, Base+PCL, or DNA-Det.
inline std::string ablation_tag(const ExperimentConfig& cfg) {
  if (cfg.pretrain && cfg.pcl) return "DNA-Det";
  if (cfg.pretrain) return "Base+PT";
  if (cfg.pcl) return "Base+PCL";
  return "Base";
}

}  // namespace dnadet::trainer
