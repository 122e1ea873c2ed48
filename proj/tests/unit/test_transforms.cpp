#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "dnadet/transforms/naturals.hpp"
#include "dnadet/transforms/pretrain_data.hpp"

namespace {

using namespace dnadet;
using transforms::Family;

std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "dnadet_test_transforms" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

ImageBuffer natural(int size = 64, std::uint64_t index = 0) {
  return quantize8(transforms::dead_leaves_image(size, 3, index));
}

const transforms::TransformSpec& find(const transforms::TransformBank& bank, const std::string& name) {
  for (const auto& s : bank.specs) {
    if (s.name() == name) return s;
  }
  throw std::runtime_error("no such transform: " + name);
}

TEST(Bank, HasExactly170Classes) {
  const auto bank = transforms::build_bank();
  EXPECT_EQ(bank.size(), 170u);
  EXPECT_EQ(transforms::kBankSize, 170);
}

TEST(Bank, FamilyCountsAndAllFourFamilies) {
  const auto bank = transforms::build_bank();
  std::map<Family, int> count;
  for (const auto& s : bank.specs) ++count[s.family];
  EXPECT_EQ(count.size(), 4u);
  EXPECT_EQ(count[Family::compression], 35);
  EXPECT_EQ(count[Family::blur], 36);
  EXPECT_EQ(count[Family::resample], 54);
  EXPECT_EQ(count[Family::noise], 45);
}

TEST(Bank, ClassIndicesAreDenseAndNamesUnique) {
  const auto bank = transforms::build_bank();
  std::set<std::string> names;
  for (std::size_t i = 0; i < bank.size(); ++i) {
    EXPECT_EQ(bank[i].class_index, static_cast<int>(i));
    names.insert(bank[i].name());
  }
  EXPECT_EQ(names.size(), bank.size());
}

TEST(Bank, ParametersDifferWithinEachOperation) {
  const auto bank = transforms::build_bank();
  std::set<std::tuple<std::string, std::vector<double>, std::vector<std::string>>> seen;
  for (const auto& s : bank.specs) {
    EXPECT_TRUE(seen.insert({s.operation, s.params, s.options}).second) << s.name();
  }
}

TEST(Bank, RebuildIsIdentical) {
  std::ostringstream a, b;
  transforms::write_bank_table(transforms::build_bank(), a);
  transforms::write_bank_table(transforms::build_bank(), b);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Bank, MatchesCommittedTable) {
  std::ostringstream table;
  transforms::write_bank_table(transforms::build_bank(), table);
  const auto committed = read_bytes(std::filesystem::path(DNADET_SOURCE_DIR) / "docs" / "transform_bank.tsv");
  EXPECT_EQ(table.str(), committed);
}

TEST(Bank, LabelSpaceIsNumbered) {
  const auto labels = transforms::build_bank().label_space();
  EXPECT_EQ(labels.size(), 170);
  EXPECT_EQ(labels.name(0), "0");
  EXPECT_EQ(labels.name(169), "169");
}

TEST(ApplyTransform, ZeroSigmaNoiseIsIdentity) {
  const auto img = natural();
  Rng rng = make_rng(1, "t");
  EXPECT_TRUE(ops::gaussian_noise(img, 0.0, rng) == img);
}

TEST(ApplyTransform, UnitFactorNearestRescaleIsIdentity) {
  const auto img = natural();
  EXPECT_TRUE(ops::rescale_roundtrip(img, 1.0, ops::Kernel::nearest) == img);
}

TEST(ApplyTransform, SameInputsGiveByteIdenticalOutput) {
  const auto bank = transforms::build_bank();
  const auto img = natural();
  for (const auto& s : bank.specs) {
    const auto a = transforms::apply_transform(img, s, 11, bank);
    const auto b = transforms::apply_transform(img, s, 11, bank);
    ASSERT_TRUE(a == b) << s.name();
  }
}

TEST(ApplyTransform, OutputKeepsShapeAndStaysInRange) {
  const auto bank = transforms::build_bank();
  const auto img = natural(60);
  for (const auto& s : bank.specs) {
    const auto out = transforms::apply_transform(img, s, 5, bank);
    ASSERT_EQ(out.height(), 60) << s.name();
    ASSERT_EQ(out.width(), 60) << s.name();
    for (float v : out.data()) {
      ASSERT_TRUE(std::isfinite(v) && v >= 0.0f && v <= 1.0f) << s.name();
    }
  }
}

TEST(ApplyTransform, EveryClassButIntegerNearestUpscaleChangesTheImage) {
  const auto bank = transforms::build_bank();
  const auto img = natural();
  for (const auto& s : bank.specs) {
    const bool changed = transforms::apply_transform(img, s, 2, bank) != img;
    // Nearest x2 up and back down picks the source pixels again.
    EXPECT_EQ(changed, s.name() != "rescale_x2_nearest") << s.name();
  }
}

TEST(ApplyTransform, NoiseDependsOnSeed) {
  const auto bank = transforms::build_bank();
  const auto img = natural();
  const auto& s = find(bank, "gaussian_noise_s20");
  EXPECT_TRUE(transforms::apply_transform(img, s, 1, bank) != transforms::apply_transform(img, s, 2, bank));
}

TEST(ApplyTransform, RejectsSpecOutsideTheBank) {
  const auto bank = transforms::build_bank();
  auto s = bank[0];
  s.params = {31.0};
  EXPECT_THROW(transforms::apply_transform(natural(), s, 0, bank), InvalidArgument);
}

TEST(ApplyTransform, JpegQuality90Psnr) {
  // Reference codec round-trip of the same image, measured once.
  const auto img = quantize8(transforms::dead_leaves_image(128, 3, 0));
  EXPECT_NEAR(psnr(ops::jpeg(img, 90), img), 28.82, 0.1);
}

TEST(ApplyTransform, StrongerSettingsDegradeMore) {
  const auto img = natural(96);
  EXPECT_GT(psnr(ops::jpeg(img, 90), img), psnr(ops::jpeg(img, 30), img));
  EXPECT_GT(psnr(ops::gaussian_blur(img, 0.5, 7), img), psnr(ops::gaussian_blur(img, 3.0, 7), img));
  Rng a = make_rng(1, "n"), b = make_rng(1, "n");
  EXPECT_GT(psnr(ops::gaussian_noise(img, 2.0 / 255, a), img), psnr(ops::gaussian_noise(img, 30.0 / 255, b), img));
}

TEST(Ops, PixelShufflePhasesAndBox) {
  ImageBuffer img(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(y * 16 + x) / 256.0f;
    }
  }
  using ops::ShuffleDown;
  const auto first = ops::pixel_shuffle_roundtrip(img, 2, ShuffleDown::phase_first, ops::Kernel::nearest);
  const auto last = ops::pixel_shuffle_roundtrip(img, 2, ShuffleDown::phase_last, ops::Kernel::nearest);
  const auto box = ops::pixel_shuffle_roundtrip(img, 2, ShuffleDown::box_mean, ops::Kernel::nearest);
  EXPECT_FLOAT_EQ(first.at(1, 1, 0), 0.0f);
  EXPECT_FLOAT_EQ(last.at(0, 0, 0), 17.0f / 256.0f);
  EXPECT_FLOAT_EQ(box.at(0, 0, 0), (0.0f + 1 + 16 + 17) / 4.0f / 256.0f);
}

TEST(Ops, SaltPepperOnlyWritesExtremes) {
  ImageBuffer img(32, 32);
  for (auto& v : img.data()) v = 0.5f;
  Rng rng = make_rng(3, "sp");
  const auto out = ops::salt_pepper(img, 0.03, rng);
  int changed = 0;
  for (float v : out.data()) {
    ASSERT_TRUE(v == 0.5f || v == 0.0f || v == 1.0f);
    changed += v != 0.5f;
  }
  EXPECT_GT(changed, 0);
}

TEST(Ops, PoissonNoiseIsUnbiasedInTheInterior) {
  ImageBuffer img(64, 64);
  for (auto& v : img.data()) v = 0.5f;
  Rng rng = make_rng(4, "p");
  const auto out = ops::poisson_noise(img, 100.0, rng);
  double mean = 0.0;
  for (float v : out.data()) mean += v;
  mean /= static_cast<double>(out.data().size());
  // Standard error of the mean is sqrt(50)/100/sqrt(12288) ~ 6.4e-4.
  EXPECT_NEAR(mean, 0.5, 4e-3);
}

TEST(Naturals, DeterministicAndDistinct) {
  const auto a = transforms::dead_leaves_image(48, 9, 0);
  const auto b = transforms::dead_leaves_image(48, 9, 0);
  const auto c = transforms::dead_leaves_image(48, 9, 1);
  EXPECT_TRUE(a == b);
  EXPECT_TRUE(a != c);
  EXPECT_TRUE(transforms::dead_leaves_images(3, 48, 9)[1] == c);
}

TEST(PretrainDataset, PerClassTwoGives340Records) {
  const auto bank = transforms::build_bank();
  const auto naturals = transforms::dead_leaves_images(6, 32, 1);
  const auto dir = temp_dir("p2");
  const auto m = transforms::generate_pretrain_dataset(naturals, bank, dir, 2, 7);
  ASSERT_EQ(m.size(), 340u);
  std::map<std::string, int> per_label;
  for (const auto& r : m.records) {
    ++per_label[r.class_label];
    const int label = std::stoi(r.class_label);
    EXPECT_GE(label, 0);
    EXPECT_LE(label, 169);
    EXPECT_TRUE(std::filesystem::exists(m.resolve(r)));
  }
  EXPECT_EQ(per_label.size(), 170u);
  for (const auto& [label, n] : per_label) EXPECT_EQ(n, 2) << label;
  const auto reloaded = load_manifest(dir / "manifest.csv", bank.label_space());
  EXPECT_EQ(reloaded.size(), 340u);
}

TEST(PretrainDataset, RegenerationIsByteIdentical) {
  const auto bank = transforms::build_bank();
  const auto naturals = transforms::dead_leaves_images(4, 32, 2);
  const auto a = temp_dir("ra"), b = temp_dir("rb");
  const auto ma = transforms::generate_pretrain_dataset(naturals, bank, a, 1, 3);
  transforms::generate_pretrain_dataset(naturals, bank, b, 1, 3);
  EXPECT_EQ(read_bytes(a / "manifest.csv"), read_bytes(b / "manifest.csv"));
  for (const auto& r : ma.records) {
    ASSERT_EQ(read_bytes(a / r.image_path), read_bytes(b / r.image_path)) << r.image_path;
  }
}

TEST(PretrainDataset, StoredJpegMatchesInMemorySample) {
  const auto bank = transforms::build_bank();
  const auto naturals = transforms::dead_leaves_images(3, 32, 4);
  const auto dir = temp_dir("jpg");
  const auto m = transforms::generate_pretrain_dataset(naturals, bank, dir, 1, 5);
  const auto samples = transforms::make_pretrain_samples(naturals, bank, 1, 5);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto loaded = load_image(m.resolve(m.records[i]));
    ASSERT_TRUE(quantize8(loaded) == quantize8(samples[i].image)) << m.records[i].image_path;
  }
}

TEST(PretrainDataset, RejectsEmptyNaturals) {
  const auto bank = transforms::build_bank();
  EXPECT_THROW(transforms::make_pretrain_samples({}, bank, 1, 0), InvalidArgument);
}

}  // namespace
