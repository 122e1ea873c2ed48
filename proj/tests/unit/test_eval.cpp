#include <algorithm>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "dnadet/eval/attacks.hpp"
#include "dnadet/eval/study.hpp"
#include "dnadet/transforms/naturals.hpp"
#include "support/oracles.hpp"

namespace {

using namespace dnadet;
using namespace dnadet::eval;

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dnadet_test_eval" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

TEST(Metrics, OraclePredictorScoresOne) {
  const std::vector<int> truth = {0, 1, 2, 3, 3, 2, 1, 0, 4};
  const auto r = evaluate_predictions(truth, truth, LabelSpace::numbered(5));
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_EQ(r.macro_f1, 1.0);
  EXPECT_TRUE(r.absent_classes.empty());
}

TEST(Metrics, ConstantPredictor) {
  const std::vector<int> truth = {0, 0, 0, 1, 1, 2};
  const std::vector<int> pred(truth.size(), 0);
  const auto r = evaluate_predictions(truth, pred, LabelSpace::numbered(3));
  EXPECT_DOUBLE_EQ(r.accuracy, 0.5);
  // Class 0: tp 3, fp 3 -> F1 = 6/9; the other two score 0.
  EXPECT_DOUBLE_EQ(r.macro_f1, (6.0 / 9.0) / 3.0);
  EXPECT_EQ(r.confusion[1][0], 2);
  EXPECT_EQ(r.confusion[2][0], 1);
}

TEST(Metrics, MatchesIndependentRecomputation) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const int C = 2 + static_cast<int>(rng() % 7);
    const int n = 1 + static_cast<int>(rng() % 200);
    std::vector<int> truth(n), pred(n);
    for (int i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng() % C);
      pred[i] = rng() % 3 == 0 ? truth[i] : static_cast<int>(rng() % C);
    }
    const auto r = evaluate_predictions(truth, pred, LabelSpace::numbered(C));
    int hits = 0;
    std::vector<std::vector<long long>> conf(C, std::vector<long long>(C, 0));
    for (int i = 0; i < n; ++i) {
      hits += truth[i] == pred[i];
      ++conf[truth[i]][pred[i]];
    }
    ASSERT_DOUBLE_EQ(r.accuracy, static_cast<double>(hits) / n) << trial;
    ASSERT_NEAR(r.macro_f1, oracle::macro_f1(truth, pred, C), 1e-12) << trial;
    ASSERT_EQ(r.confusion, conf) << trial;
    ASSERT_EQ(r.total, n);
  }
}

TEST(Metrics, InvariantUnderSamplePermutation) {
  std::mt19937_64 rng(5);
  std::vector<int> truth(80), pred(80);
  for (int i = 0; i < 80; ++i) {
    truth[i] = static_cast<int>(rng() % 4);
    pred[i] = static_cast<int>(rng() % 4);
  }
  const auto a = evaluate_predictions(truth, pred, LabelSpace::numbered(4));
  std::vector<std::size_t> order(80);
  for (std::size_t i = 0; i < 80; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<int> t2, p2;
  for (auto i : order) {
    t2.push_back(truth[i]);
    p2.push_back(pred[i]);
  }
  const auto b = evaluate_predictions(t2, p2, LabelSpace::numbered(4));
  EXPECT_EQ(a.accuracy, b.accuracy);
  EXPECT_EQ(a.macro_f1, b.macro_f1);
  EXPECT_EQ(a.confusion, b.confusion);
}

TEST(Metrics, AbsentClassesAreListedAndExcluded) {
  const auto r = evaluate_predictions({0, 0, 1}, {0, 2, 1}, LabelSpace({"a", "b", "c"}));
  ASSERT_EQ(r.absent_classes, std::vector<std::string>{"c"});
  EXPECT_TRUE(std::isnan(r.per_class_f1[2]));
  EXPECT_DOUBLE_EQ(r.macro_f1, oracle::macro_f1({0, 0, 1}, {0, 2, 1}, 3));
}

TEST(Metrics, RejectsMismatchedOrOutOfRangeInput) {
  EXPECT_THROW(evaluate_predictions({0, 1}, {0}, LabelSpace::numbered(2)), InvalidArgument);
  EXPECT_THROW(evaluate_predictions({0, 2}, {0, 1}, LabelSpace::numbered(2)), InvalidArgument);
}

TEST(Reports, JsonKeysAndRoundTrip) {
  auto r = evaluate_predictions({0, 1, 1, 0}, {0, 1, 0, 0}, LabelSpace({"ProGAN", "SNGAN", "MMDGAN"}), "cross_seed");
  r.per_position = std::vector<double>(16, 0.25);
  const auto j = to_json(r);
  for (const char* key : {"split", "labels", "total", "accuracy", "macro_f1", "confusion", "per_class_f1",
                          "absent_classes", "per_position"}) {
    EXPECT_TRUE(j.contains(key)) << key;
  }
  const auto back = report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.split_name, "cross_seed");
  EXPECT_TRUE(back.labels == r.labels);
  EXPECT_EQ(back.confusion, r.confusion);
  EXPECT_EQ(back.accuracy, r.accuracy);
  EXPECT_EQ(back.macro_f1, r.macro_f1);
  EXPECT_EQ(back.absent_classes, r.absent_classes);
  EXPECT_EQ(back.per_class_f1[0], r.per_class_f1[0]);
  EXPECT_TRUE(std::isnan(back.per_class_f1[2]));
  EXPECT_EQ(back.per_position, r.per_position);
}

TEST(Reports, ConfusionCsv) {
  const auto r = evaluate_predictions({0, 1, 1}, {0, 0, 1}, LabelSpace({"a", "b"}));
  const auto path = temp_dir("csv") / "confusion.csv";
  write_confusion_csv(r, path);
  std::ifstream in(path);
  std::string l1, l2, l3;
  std::getline(in, l1);
  std::getline(in, l2);
  std::getline(in, l3);
  EXPECT_EQ(l1, "truth\\pred,a,b");
  EXPECT_EQ(l2, "a,1,0");
  EXPECT_EQ(l3, "b,1,1");
}

TEST(Suites, ZooSuiteSplits) {
  DatasetManifest m;
  auto add = [&](long long seed, Split split) {
    m.records.push_back({"x" + std::to_string(m.size()) + ".png", "SNGAN", "SNGAN",
                         "SNGAN_seed" + std::to_string(seed), seed, "zoo", split});
  };
  add(0, Split::train);
  add(0, Split::val);
  add(0, Split::test);
  add(1, Split::test);
  add(2, Split::test);
  add(3, Split::train);
  const auto suite = zoo_suite(m);
  ASSERT_EQ(suite.size(), 2u);
  EXPECT_EQ(suite.at("closed_set").size(), 2u);
  EXPECT_EQ(suite.at("cross_seed").size(), 2u);
  for (const auto& r : suite.at("cross_seed").records) EXPECT_NE(r.seed, 0);
  DatasetManifest only_train;
  only_train.records.push_back(m.records[0]);
  EXPECT_TRUE(zoo_suite(only_train).empty());
}

ImageBuffer test_image(std::uint64_t index) {
  return quantize8(transforms::dead_leaves_image(64, 8, index));
}

TEST(Attacks, ZeroStrengthIsIdentity) {
  const auto img = test_image(0);
  for (auto kind : kBaseAttacks) {
    const AttackSpec spec{kind, 3, AttackParams::zero_strength()};
    EXPECT_TRUE(attack(img, spec) == img) << to_string(kind);
  }
  EXPECT_TRUE(attack(img, {AttackKind::combination, 4, AttackParams::zero_strength()}) == img);
  EXPECT_TRUE(attack(img, {AttackKind::none, 4, std::nullopt}) == img);
}

TEST(Attacks, SameSeedSameOutput) {
  const auto img = test_image(1);
  for (auto kind : {AttackKind::noise, AttackKind::blur, AttackKind::crop, AttackKind::jpeg, AttackKind::relight,
                    AttackKind::combination}) {
    const auto a = attack(img, {kind, 11, std::nullopt});
    const auto b = attack(img, {kind, 11, std::nullopt});
    EXPECT_TRUE(a == b) << to_string(kind);
    EXPECT_EQ(a.height(), img.height());
    EXPECT_EQ(a.width(), img.width());
  }
}

TEST(Attacks, CombinationDependsOnSeed) {
  const auto img = test_image(2);
  std::set<std::vector<float>> outputs;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto out = attack(img, {AttackKind::combination, seed, std::nullopt});
    outputs.insert(std::vector<float>(out.data().begin(), out.data().end()));
  }
  EXPECT_GT(outputs.size(), 1u);
}

TEST(Attacks, CombinationMembersAreNonEmptyCanonicalSubsets) {
  Rng rng = make_rng(8, "members");
  std::set<std::vector<AttackKind>> seen;
  for (int i = 0; i < 3000; ++i) {
    const auto members = combination_members(rng);
    ASSERT_FALSE(members.empty());
    std::vector<std::size_t> pos;
    for (auto k : members) {
      pos.push_back(static_cast<std::size_t>(std::find(kBaseAttacks.begin(), kBaseAttacks.end(), k) -
                                             kBaseAttacks.begin()));
    }
    ASSERT_TRUE(std::is_sorted(pos.begin(), pos.end()));
    ASSERT_EQ(std::set<std::size_t>(pos.begin(), pos.end()).size(), pos.size());
    seen.insert(members);
  }
  EXPECT_EQ(seen.size(), 31u);
}

TEST(Attacks, SampledParametersStayInRange) {
  Rng rng = make_rng(2, "params");
  for (int i = 0; i < 1000; ++i) EXPECT_NO_THROW(AttackParams::sample(rng).validate());
  AttackParams p;
  p.jpeg_quality = 40;
  EXPECT_THROW(p.validate(), InvalidArgument);
  EXPECT_THROW(parse_attack("sharpen"), InvalidArgument);
  EXPECT_EQ(parse_attack("relight"), AttackKind::relight);
}

TEST(Attacks, RobustnessEvalReportsEveryAttack) {
  const auto dir = temp_dir("robust");
  const auto zoo = zoo::make_zoo_dataset(zoo::builtin_specs(), 2, 3, dir);
  const LabelSpace labels({"ProGAN", "MMDGAN", "SNGAN", "InfoMaxGAN"});
  auto m = model::ModelState<float>::create(model::EncoderConfig::with_width(0.0625), labels, 1);
  const sampler::PatchPlan plan{64, 32, 1, 0};
  const std::vector<AttackKind> kinds = {AttackKind::none, AttackKind::jpeg, AttackKind::combination};
  const auto test = zoo_suite(zoo).at("cross_seed");
  const auto reports = robustness_eval(m, test, labels, kinds, 5, SourceKind::native, plan);
  ASSERT_EQ(reports.size(), 3u);
  for (auto k : kinds) {
    const auto& r = reports.at(to_string(k));
    EXPECT_EQ(r.total, static_cast<long long>(test.size()));
    EXPECT_GE(r.accuracy, 0.0);
    EXPECT_LE(r.accuracy, 1.0);
  }
  const auto again = robustness_eval(m, test, labels, kinds, 5, SourceKind::native, plan);
  EXPECT_EQ(again.at("combination").confusion, reports.at("combination").confusion);
  EXPECT_EQ(reports.at("none").confusion, evaluate(m, test, labels, SourceKind::native, plan).confusion);
  EXPECT_THROW(robustness_eval(m, test, labels, {}, 5, SourceKind::native, plan), InvalidArgument);
  EXPECT_THROW(robustness_eval(m, test, LabelSpace::numbered(4), kinds, 5, SourceKind::native, plan),
               InvalidArgument);
}

StudyConfig tiny_study() {
  StudyConfig cfg;
  cfg.train.resize_size = 64;
  cfg.train.patch_size = 16;
  cfg.train.patches_per_image = 1;
  cfg.train.per_class_batch = 2;
  cfg.train.max_iterations = 2;
  cfg.train.encoder_width = 0.0625;
  cfg.train.pretrain = false;
  cfg.train_per_class = 4;
  cfg.test_per_class = 2;
  return cfg;
}

TEST(Study, RejectsInvalidPositionsAndGrids) {
  EXPECT_THROW(patch_position_study(StudyTask::architecture, 0, tiny_study()), InvalidArgument);
  EXPECT_THROW(patch_position_study(StudyTask::architecture, 17, tiny_study()), InvalidArgument);
  auto cfg = tiny_study();
  cfg.train.resize_size = 66;
  EXPECT_THROW(patch_position_study(StudyTask::weight, 1, cfg), InvalidArgument);
  EXPECT_THROW(parse_task("color"), InvalidArgument);
}

TEST(Study, ReportsAllSixteenPositions) {
  const auto r = patch_position_study(StudyTask::weight, 6, tiny_study());
  EXPECT_EQ(r.train_position, 6);
  for (double a : r.accuracy) {
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
  }
  const auto rep = to_report(r);
  ASSERT_TRUE(rep.per_position);
  EXPECT_EQ(rep.per_position->size(), 16u);
  EXPECT_EQ(rep.accuracy, r.accuracy[5]);
  double off = 0.0;
  for (int p = 0; p < 16; ++p) off += p == 5 ? 0.0 : r.accuracy[p];
  EXPECT_DOUBLE_EQ(r.mean_off_position(), off / 15.0);
}

TEST(Study, WeightTaskUsesFourSeedsOfOneArchitecture) {
  const auto gens = study_generators(StudyTask::weight, tiny_study());
  ASSERT_EQ(gens.size(), 4u);
  for (int s = 0; s < 4; ++s) {
    EXPECT_EQ(gens[s].spec().name, "ProGAN");
    EXPECT_EQ(gens[s].weight_seed(), s);
  }
  const auto arch = study_generators(StudyTask::architecture, tiny_study());
  std::set<std::string> names;
  for (const auto& g : arch) names.insert(g.spec().name);
  EXPECT_EQ(names.size(), 4u);
}

}  // namespace
