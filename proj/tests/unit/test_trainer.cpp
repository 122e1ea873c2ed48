#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

#include <gtest/gtest.h>

#include "dnadet/trainer/trainer.hpp"
#include "dnadet/transforms/naturals.hpp"
#include "support/oracles.hpp"

namespace {

using namespace dnadet;
using model::EncoderConfig;
using model::ModelState;

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dnadet_test_trainer" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

/// Two texture classes: smooth (blurred noise) and raw noise.
trainer::TrainSet two_class_set(int per_class, int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  trainer::TrainSet s;
  for (int c = 0; c < 2; ++c) {
    for (int i = 0; i < per_class; ++i) {
      ImageBuffer img(size, size);
      for (auto& v : img.data()) v = u(rng);
      if (c == 0) img = ops::gaussian_blur(img, 1.5, 7);
      s.images.push_back(img);
      s.labels.push_back(c);
    }
  }
  return s;
}

ExperimentConfig smoke_config() {
  ExperimentConfig cfg;
  cfg.labels = LabelSpace({"smooth", "noise"});
  cfg.resize_size = 32;
  cfg.patch_size = 16;
  cfg.patches_per_image = 2;
  cfg.per_class_batch = 5;
  cfg.learning_rate = 1e-3;
  cfg.encoder_width = 0.125;
  cfg.pretrain = false;
  cfg.rng_seed = 3;
  return cfg;
}

TEST(Schedule, StepDecay) {
  ExperimentConfig cfg;
  cfg.learning_rate = 1e-4;
  cfg.lr_decay_interval = 500;
  EXPECT_DOUBLE_EQ(scheduled_lr(cfg, 0), 1e-4);
  EXPECT_DOUBLE_EQ(scheduled_lr(cfg, 499), 1e-4);
  EXPECT_NEAR(scheduled_lr(cfg, 500), 9e-5, 1e-18);
  EXPECT_NEAR(scheduled_lr(cfg, 1000), 8.1e-5, 1e-18);
}

TEST(Schedule, RunStepRecordsScheduledRates) {
  auto cfg = smoke_config();
  cfg.lr_decay_interval = 3;
  cfg.max_iterations = 7;
  const auto set = two_class_set(5, 32, 1);
  const auto r = trainer::run_step(trainer::init_architecture_model(cfg), set, {}, cfg);
  ASSERT_EQ(r.iterations.size(), 7u);
  for (const auto& rec : r.iterations) EXPECT_DOUBLE_EQ(rec.lr, scheduled_lr(cfg, rec.iteration - 1));
}

TEST(Objective, FullModelGradientMatchesFiniteDifferences) {
  // Eight 16px patches, two classes, every parameter group including the loss
  // log-variances.
  auto m = ModelState<double>::create(EncoderConfig::with_width(0.0625), LabelSpace::numbered(2), 5);
  m.loss_log_vars.value = {0.3, -0.2};
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  nn::Tensor<double> x(8, 3, 16, 16);
  for (auto& v : x.data) v = u(rng);
  const std::vector<int> labels = {0, 0, 0, 0, 1, 1, 1, 1};
  const trainer::ObjectiveOptions opt{true, 0.5};

  const auto buffers = m.buffers();
  std::vector<std::vector<double>> saved;
  for (auto* b : buffers) saved.push_back(b->value);
  auto restore = [&] {
    for (std::size_t i = 0; i < buffers.size(); ++i) buffers[i]->value = saved[i];
  };
  auto loss = [&] {
    const double t = trainer::compute_objective(m, x, labels, opt, false).total;
    restore();
    return t;
  };

  m.zero_grad();
  trainer::compute_objective(m, x, labels, opt, true);
  restore();

  int checked = 0;
  for (auto* p : m.params()) {
    const int samples = p->size() < 4 ? static_cast<int>(p->size()) : 3;
    for (int s = 0; s < samples; ++s) {
      const std::size_t k = p->size() < 4 ? static_cast<std::size_t>(s)
                                          : static_cast<std::size_t>(u(rng) * p->size());
      const double x0 = p->value[k];
      const double h = 1e-6;
      p->value[k] = x0 + h;
      const double fp = loss();
      p->value[k] = x0 - h;
      const double fm = loss();
      p->value[k] = x0;
      const double fd = (fp - fm) / (2 * h);
      if (p->name.find("conv.bias") != std::string::npos) {
        // Batch norm in training mode cancels a preceding bias exactly.
        EXPECT_LE(std::abs(p->grad[k]), 1e-9) << p->name << "[" << k << "]";
        EXPECT_LE(std::abs(fd), 1e-7) << p->name << "[" << k << "]";
      } else {
        EXPECT_LE(oracle::relative_error(p->grad[k], fd, 1e-6), 1e-3) << p->name << "[" << k << "]";
      }
      ++checked;
    }
  }
  EXPECT_GE(checked, 50);
}

TEST(Objective, WithoutPclTotalIsCrossEntropy) {
  auto m = ModelState<double>::create(EncoderConfig::with_width(0.0625), LabelSpace::numbered(2), 5);
  nn::Tensor<double> x(4, 3, 16, 16);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (auto& v : x.data) v = u(rng);
  const auto r = trainer::compute_objective(m, x, {0, 1, 0, 1}, {false, 0.07}, true);
  EXPECT_EQ(r.l_con, 0.0);
  EXPECT_EQ(r.total, r.l_ce);
  EXPECT_EQ(m.loss_log_vars.grad[0], 0.0);
  EXPECT_EQ(m.loss_log_vars.grad[1], 0.0);
}

TEST(Objective, RejectsLabelCountMismatch) {
  auto m = ModelState<double>::create(EncoderConfig::with_width(0.0625), LabelSpace::numbered(2), 5);
  nn::Tensor<double> x(4, 3, 16, 16);
  EXPECT_THROW(trainer::compute_objective(m, x, {0, 1}, {}, false), InvalidArgument);
}

TEST(Training, SmokeRunReachesFullTrainAccuracy) {
  auto cfg = smoke_config();
  cfg.max_iterations = 200;
  const auto set = two_class_set(10, 32, 4);
  const auto plan = sampler::PatchPlan::from_config(cfg);
  auto model = trainer::init_architecture_model(cfg);
  bool reached = false;
  trainer::TrainOptions opt;
  long long at = 0;
  opt.on_epoch = [&](const trainer::EpochRecord& e) {
    if (!reached && e.train_accuracy == 1.0) {
      reached = true;
      at = e.iteration;
    }
  };
  auto r = trainer::run_step(std::move(model), set, {}, cfg, opt);
  EXPECT_TRUE(reached);
  EXPECT_LE(at, 200);
  EXPECT_EQ(trainer::set_accuracy(r.model, set, plan), 1.0);
}

TEST(Training, MovingAverageLossDecreases) {
  auto cfg = smoke_config();
  cfg.max_iterations = 1000;
  const auto set = two_class_set(10, 32, 5);
  const auto r = trainer::run_step(trainer::init_architecture_model(cfg), set, {}, cfg);
  auto window = [&](long long end) {
    double s = 0.0;
    for (long long i = end - 50; i < end; ++i) s += r.iterations[i].objective.total;
    return s / 50.0;
  };
  EXPECT_LT(window(1000), window(50));
}

TEST(Training, WithoutPclTrainsOnWholeViews) {
  auto cfg = smoke_config();
  cfg.pcl = false;
  cfg.max_iterations = 2;
  const auto set = two_class_set(5, 32, 6);
  const auto r = trainer::run_step(trainer::init_architecture_model(cfg), set, {}, cfg);
  EXPECT_EQ(r.iterations[0].objective.count, 2 * cfg.per_class_batch);
  EXPECT_EQ(r.iterations[0].objective.l_con, 0.0);
}

TEST(Training, CheckpointEpochSelectsThatSnapshot) {
  auto cfg = smoke_config();
  cfg.max_epochs = 4;
  cfg.checkpoint_epoch = 2;
  const auto set = two_class_set(10, 32, 7);
  const auto dir = temp_dir("ckpt");
  trainer::TrainOptions opt;
  opt.out_dir = dir;
  opt.tag = "Base+PCL";
  const auto r = trainer::run_step(trainer::init_architecture_model(cfg), set, set, cfg, opt);
  EXPECT_EQ(r.history.size(), 4u);
  EXPECT_EQ(r.selected_epoch, 2);
  EXPECT_EQ(r.history[1].iteration, 2 * 2);
  for (int e = 1; e <= 4; ++e) EXPECT_TRUE(std::filesystem::exists(dir / ("epoch_00" + std::to_string(e) + ".ckpt")));
  EXPECT_TRUE(read_bytes(dir / "final.ckpt") == read_bytes(dir / "epoch_002.ckpt"));
  EXPECT_TRUE(read_bytes(dir / "final.ckpt") != read_bytes(dir / "epoch_004.ckpt"));
  EXPECT_TRUE(std::filesystem::exists(dir / "history.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir / "iterations.csv"));
  for (const auto& e : r.history) {
    EXPECT_GE(e.val_accuracy, 0.0);
    EXPECT_LE(e.val_accuracy, 1.0);
  }
}

TEST(Training, FewerEpochsThanCheckpointEpochKeepsTheLast) {
  auto cfg = smoke_config();
  cfg.max_iterations = 3;
  const auto set = two_class_set(10, 32, 8);
  const auto r = trainer::run_step(trainer::init_architecture_model(cfg), set, {}, cfg);
  EXPECT_EQ(r.history.size(), 2u);
  EXPECT_EQ(r.selected_epoch, 2);
  EXPECT_EQ(r.model.iteration, 3);
}

TEST(Training, SameSeedGivesIdenticalHistories) {
  auto cfg = smoke_config();
  cfg.max_iterations = 6;
  const auto set = two_class_set(6, 32, 9);
  const auto a = temp_dir("ra"), b = temp_dir("rb");
  trainer::TrainOptions oa, ob;
  oa.out_dir = a;
  ob.out_dir = b;
  trainer::run_step(trainer::init_architecture_model(cfg), set, set, cfg, oa);
  trainer::run_step(trainer::init_architecture_model(cfg), set, set, cfg, ob);
  EXPECT_TRUE(read_bytes(a / "iterations.csv") == read_bytes(b / "iterations.csv"));
  EXPECT_TRUE(read_bytes(a / "history.csv") == read_bytes(b / "history.csv"));
  EXPECT_TRUE(read_bytes(a / "final.ckpt") == read_bytes(b / "final.ckpt"));
}

TEST(Training, NonFiniteLossReportsTheIteration) {
  auto cfg = smoke_config();
  cfg.max_iterations = 5;
  auto m = trainer::init_architecture_model(cfg);
  m.classifier.weight().value[0] = std::nanf("");
  try {
    trainer::run_step(std::move(m), two_class_set(5, 32, 10), {}, cfg);
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.iteration(), 1);
  }
}

TEST(Surgery, PretrainedEncoderIsKeptBitForBit) {
  ExperimentConfig pt = smoke_config();
  pt.labels = LabelSpace::numbered(170);
  pt.per_class_batch = 1;
  pt.patches_per_image = 1;
  pt.max_iterations = 1;
  trainer::TrainSet set;
  const auto naturals = transforms::dead_leaves_images(4, 32, 1);
  for (int c = 0; c < 170; ++c) {
    set.images.push_back(naturals[c % 4]);
    set.labels.push_back(c);
  }
  const auto dir = temp_dir("surgery");
  trainer::TrainOptions opt;
  opt.out_dir = dir;
  auto step1 = trainer::pretrain_transforms(set, {}, pt.labels, pt, opt);
  EXPECT_EQ(step1.model.num_classes(), 170);

  auto cfg = smoke_config();
  cfg.labels = LabelSpace({"ProGAN", "MMDGAN", "SNGAN", "InfoMaxGAN", "real"});
  cfg.pretrain = true;
  cfg.init_checkpoint = (dir / "final.ckpt").string();
  auto step2 = trainer::init_architecture_model(cfg);
  EXPECT_EQ(step2.num_classes(), 5);
  EXPECT_EQ(step2.loss_log_vars.value[0], 0.0f);
  EXPECT_EQ(step2.loss_log_vars.value[1], 0.0f);
  nn::ParamRefs<float> a, b;
  step1.model.encoder.collect(a);
  step2.encoder.collect(b);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i]->value, b[i]->value) << a[i]->name;
  EXPECT_EQ(step1.model.proj_out.weight().value, step2.proj_out.weight().value);
}

TEST(Surgery, PretrainingNeeds170Classes) {
  auto cfg = smoke_config();
  EXPECT_THROW(trainer::pretrain_transforms(two_class_set(2, 32, 1), {}, cfg.labels, cfg), InvalidArgument);
}

TEST(Surgery, PretrainWithoutCheckpointIsAConfigError) {
  auto cfg = smoke_config();
  cfg.pretrain = true;
  EXPECT_THROW(trainer::init_architecture_model(cfg), ConfigError);
}

TEST(Ablation, Tags) {
  ExperimentConfig cfg;
  cfg.pretrain = false;
  cfg.pcl = true;
  EXPECT_EQ(trainer::ablation_tag(cfg), "Base+PCL");
  cfg.pcl = false;
  EXPECT_EQ(trainer::ablation_tag(cfg), "Base");
  cfg.pretrain = true;
  EXPECT_EQ(trainer::ablation_tag(cfg), "Base+PT");
  cfg.pcl = true;
  EXPECT_EQ(trainer::ablation_tag(cfg), "DNA-Det");
}

DatasetManifest fake_manifest(int n, Split split) {
  DatasetManifest m;
  for (int i = 0; i < n; ++i) {
    m.records.push_back({"img" + std::to_string(i) + ".png", i % 2 ? "a" : "b", "x", "x_seed0", 0, "zoo", split});
  }
  return m;
}

TEST(ValSplit, SeededFractionHoldOut) {
  ExperimentConfig cfg;
  cfg.rng_seed = 4;
  const auto [train, val] = trainer::train_val_split(fake_manifest(50, Split::train), cfg);
  EXPECT_EQ(train.size(), 45u);
  EXPECT_EQ(val.size(), 5u);
  const auto [train2, val2] = trainer::train_val_split(fake_manifest(50, Split::train), cfg);
  EXPECT_EQ(val.records[0].image_path, val2.records[0].image_path);
}

TEST(ValSplit, MarkedRecordsAndExplicitFileWin) {
  ExperimentConfig cfg;
  auto m = fake_manifest(10, Split::train);
  const auto marked = fake_manifest(3, Split::val);
  m.records.insert(m.records.end(), marked.records.begin(), marked.records.end());
  const auto [t1, v1] = trainer::train_val_split(m, cfg);
  EXPECT_EQ(t1.size(), 10u);
  EXPECT_EQ(v1.size(), 3u);
  const auto [t2, v2] = trainer::train_val_split(m, cfg, fake_manifest(7, Split::test));
  EXPECT_EQ(t2.size(), 10u);
  EXPECT_EQ(v2.size(), 7u);
}

TEST(Pretraining, ReducedBankLearnsWithinFiveEpochs) {
  // Every 17th bank class. Frozen desk setup; the bar is 5x chance.
  const auto bank = transforms::build_bank();
  constexpr int kTrain = 192, kVal = 40;
  const auto naturals = transforms::dead_leaves_images(kTrain + kVal, 40, 21);
  trainer::TrainSet train, val;
  for (int c = 0; c < 10; ++c) {
    for (int i = 0; i < kTrain + kVal; ++i) {
      auto& dst = i < kTrain ? train : val;
      dst.images.push_back(transforms::apply_transform(quantize8(naturals[i]), bank[c * 17],
                                                       stream_seed(5, "t", c * (kTrain + kVal) + i), bank));
      dst.labels.push_back(c);
    }
  }
  ExperimentConfig cfg;
  cfg.labels = LabelSpace::numbered(10);
  cfg.resize_size = 40;
  cfg.patch_size = 32;
  cfg.patches_per_image = 4;
  cfg.per_class_batch = 4;
  cfg.learning_rate = 3e-3;
  cfg.encoder_width = 0.125;
  cfg.max_epochs = 5;
  cfg.checkpoint_epoch = 5;
  cfg.pretrain = false;
  auto m = ModelState<float>::create(EncoderConfig::with_width(cfg.encoder_width), cfg.labels, 1);
  const auto r = trainer::run_step(std::move(m), train, val, cfg);
  ASSERT_EQ(r.history.size(), 5u);
  EXPECT_GT(r.history.back().val_accuracy, 0.5);
}

}  // namespace
