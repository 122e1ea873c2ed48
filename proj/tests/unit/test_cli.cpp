#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>
#include <sys/wait.h>

#include "dnadet/core/manifest.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string err;
};

fs::path work_dir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "dnadet_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs the CLI inside the work directory; stdout is discarded.
Result cli(const std::string& args) {
  const auto err = work_dir() / "stderr.txt";
  const std::string cmd = "cd '" + work_dir().string() + "' && '" DNADET_CLI "' " + args + " > /dev/null 2> '" +
                          err.string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, read_text(err)};
}

int lines(const std::string& s) {
  int n = 0;
  for (char c : s) n += c == '\n';
  return n;
}

const char* kConfig =
    "labels = ProGAN, MMDGAN, SNGAN, InfoMaxGAN\n"
    "train_manifest = zoo/manifest.csv\n"
    "test_manifest = zoo/manifest.csv\n"
    "resize_size = 64\n"
    "patch_size = 32\n"
    "patches_per_image = 2\n"
    "per_class_batch = 2\n"
    "max_iterations = 4\n"
    "max_epochs = 2\n"
    "checkpoint_epoch = 2\n"
    "encoder_width = 0.0625\n"
    "learning_rate = 1e-3\n"
    "pretrain = false\n";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    std::ofstream(work_dir() / "small.cfg") << kConfig;
    ASSERT_EQ(cli("gen-zoo --seeds 3 --n 10 --out zoo").code, 0);
  }
};

TEST_F(Cli, GenZooWritesDatasetAndManifest) {
  const auto m = dnadet::load_manifest(work_dir() / "zoo" / "manifest.csv", dnadet::LabelSpace{});
  EXPECT_EQ(m.size(), 4u * 3u * 10u);
  const auto run = nlohmann::json::parse(read_text(work_dir() / "zoo" / "run.json"));
  EXPECT_EQ(run.at("command"), "gen-zoo");
  EXPECT_TRUE(run.contains("config_hash"));
  EXPECT_TRUE(run.contains("code_version"));
  EXPECT_TRUE(run.at("seeds").contains("rng_seed"));
  EXPECT_FALSE(run.at("artifacts").empty());
}

TEST_F(Cli, TrainWithoutInitNamesTheMissingKey) {
  const auto r = cli("train --config small.cfg --pretrain true --out no_init");
  EXPECT_NE(r.code, 0);
  EXPECT_EQ(lines(r.err), 1) << r.err;
  EXPECT_NE(r.err.find("init_checkpoint"), std::string::npos) << r.err;
}

TEST_F(Cli, FailureClassesGiveDistinctSingleLineDiagnostics) {
  std::ofstream(work_dir() / "bad.cfg") << "learning_rte = 1\n";
  const auto bad_key = cli("train --config bad.cfg");
  const auto missing = cli("train --config does_not_exist.cfg");
  const auto bad_value = cli("train --config small.cfg --learning_rate abc");
  EXPECT_NE(bad_key.code, 0);
  EXPECT_NE(missing.code, 0);
  EXPECT_NE(bad_key.code, missing.code);
  EXPECT_EQ(bad_value.code, bad_key.code);
  EXPECT_NE(bad_key.err.find("learning_rte"), std::string::npos);
  for (const auto* r : {&bad_key, &missing, &bad_value}) EXPECT_EQ(lines(r->err), 1) << r->err;
}

TEST_F(Cli, FlagsOverrideTheConfigFile) {
  ASSERT_EQ(cli("train --config small.cfg --learning_rate 0.002 --seed 7 --out flags").code, 0);
  const auto run = nlohmann::json::parse(read_text(work_dir() / "flags" / "run.json"));
  const auto cfg = run.at("config").get<std::string>();
  EXPECT_NE(cfg.find("learning_rate = 0.002\n"), std::string::npos) << cfg;
  EXPECT_NE(cfg.find("rng_seed = 7\n"), std::string::npos) << cfg;
  EXPECT_EQ(run.at("seeds").at("rng_seed"), 7);
}

TEST_F(Cli, TrainEvalReplayGivesIdenticalReports) {
  ASSERT_EQ(cli("train --config small.cfg --out tr").code, 0);
  ASSERT_EQ(cli("eval --config small.cfg --checkpoint tr/final.ckpt --features f.csv --out ev").code, 0);
  ASSERT_EQ(cli("replay tr/run.json --out tr_again").code, 0);
  ASSERT_EQ(cli("replay ev/run.json --out ev_again").code, 0);
  const auto w = work_dir();
  EXPECT_TRUE(read_text(w / "tr" / "final.ckpt") == read_text(w / "tr_again" / "final.ckpt"));
  EXPECT_EQ(read_text(w / "tr" / "history.csv"), read_text(w / "tr_again" / "history.csv"));
  EXPECT_EQ(read_text(w / "tr" / "report_test.json"), read_text(w / "tr_again" / "report_test.json"));
  EXPECT_EQ(read_text(w / "ev" / "report.json"), read_text(w / "ev_again" / "report.json"));
  EXPECT_EQ(read_text(w / "ev" / "f.csv"), read_text(w / "ev_again" / "f.csv"));

  ASSERT_EQ(cli("visualize --kind curves --input tr/history.csv --out fig").code, 0);
  ASSERT_EQ(cli("visualize --kind tsne --input ev/f.csv --out fig").code, 0);
  EXPECT_TRUE(fs::exists(w / "fig" / "curves.png"));
  EXPECT_TRUE(fs::exists(w / "fig" / "tsne.png"));
  const auto schema = cli("visualize --kind position_grid --input ev/report.json --out fig");
  EXPECT_NE(schema.code, 0);
  EXPECT_NE(schema.err.find("per_position"), std::string::npos) << schema.err;
}

TEST_F(Cli, PatchStudyWritesSixteenValues) {
  ASSERT_EQ(cli("patch-study --config small.cfg --task weight --train-position 1 --train-per-class 4 "
                "--test-per-class 2 --out ps")
                .code,
            0);
  const auto report = nlohmann::json::parse(read_text(work_dir() / "ps" / "report.json"));
  ASSERT_EQ(report.at("per_position").size(), 16u);
  for (const auto& v : report.at("per_position")) {
    EXPECT_GE(v.get<double>(), 0.0);
    EXPECT_LE(v.get<double>(), 1.0);
  }
  EXPECT_NE(cli("patch-study --config small.cfg --task weight --train-position 17 --out ps_bad").code, 0);
}

TEST_F(Cli, CrossTestAndAttackEvalReportPerSplit) {
  ASSERT_EQ(cli("train --config small.cfg --out tr_x").code, 0);
  ASSERT_EQ(cli("cross-test --config small.cfg --checkpoint tr_x/final.ckpt --out xt").code, 0);
  const auto xt = nlohmann::json::parse(read_text(work_dir() / "xt" / "summary.json"));
  EXPECT_TRUE(xt.contains("closed_set"));
  EXPECT_TRUE(xt.contains("cross_seed"));
  ASSERT_EQ(cli("attack-eval --config small.cfg --checkpoint tr_x/final.ckpt --attacks none blur --out at").code, 0);
  const auto at = nlohmann::json::parse(read_text(work_dir() / "at" / "summary.json"));
  EXPECT_EQ(at.size(), 2u);
}

}  // namespace
