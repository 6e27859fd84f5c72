#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"
#include "s2d/config.h"
#include "s2d/io.h"

namespace s2d {
namespace {

namespace fs = std::filesystem;

int RunCli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      std::string(S2D_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

bool SameTree(const fs::path& a, const fs::path& b) {
  std::size_t count = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    const fs::path rel = fs::relative(entry.path(), a);
    if (entry.is_directory()) {
      if (!fs::is_directory(b / rel)) return false;
      continue;
    }
    if (!fs::exists(b / rel)) return false;
    if (io::ReadFile(entry.path()) != io::ReadFile(b / rel)) {
      ADD_FAILURE() << "differs: " << rel;
      return false;
    }
    ++count;
  }
  for (const auto& entry : fs::recursive_directory_iterator(b)) {
    if (!fs::exists(a / fs::relative(entry.path(), b))) return false;
  }
  return count > 0;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("s2d_cli_" + std::string(::testing::UnitTest::GetInstance()
                                         ->current_test_info()
                                         ->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string P(const std::string& rel) const { return (dir_ / rel).string(); }
  fs::path Log() const { return dir_ / "log.txt"; }
  std::string LogText() const { return io::ReadTextFile(Log()); }

  fs::path dir_;
};

TEST_F(CliTest, SynthIsByteIdenticalAcrossRunsAndThreadCounts) {
  ASSERT_EQ(RunCli("synth --seed 7 --num-queries 3 --out " + P("a") + " --threads 1", Log()), 0);
  ASSERT_EQ(RunCli("synth --seed 7 --num-queries 3 --out " + P("b") + " --threads 1", Log()), 0);
  ASSERT_EQ(RunCli("synth --seed 7 --num-queries 3 --out " + P("c") + " --threads 8", Log()), 0);
  EXPECT_TRUE(SameTree(dir_ / "a", dir_ / "b"));
  EXPECT_TRUE(SameTree(dir_ / "a", dir_ / "c"));
  ASSERT_EQ(RunCli("synth --seed 8 --num-queries 3 --out " + P("d"), Log()), 0);
  EXPECT_NE(io::ReadFile(dir_ / "a/gt_poses.txt"), io::ReadFile(dir_ / "d/gt_poses.txt"));
  const RunConfig echoed = ParseRunConfig(io::ReadTextFile(dir_ / "a/run_config.txt"));
  EXPECT_EQ(echoed.seed, 7u);
}

TEST_F(CliTest, FullChainLocalizesDefaultScene) {
  ASSERT_EQ(RunCli("synth --seed 7 --out " + P("scene"), Log()), 0) << LogText();
  ASSERT_EQ(RunCli("build-db --input " + P("scene/references.txt") + " --out " + P("db"), Log()), 0)
      << LogText();
  EXPECT_TRUE(fs::exists(dir_ / "db/pca_global.bin"));
  ASSERT_EQ(RunCli("localize --db " + P("db") + " --queries " + P("scene/queries.txt") +
                    " --out " + P("out/results.csv"),
                Log()),
            0)
      << LogText();
  EXPECT_TRUE(fs::exists(dir_ / "out/run_config.txt"));
  ASSERT_EQ(RunCli("evaluate --results " + P("out/results.csv") + " --gt " +
                    P("scene/gt_poses.txt") + " --json " + P("out/recall.json"),
                Log()),
            0);
  const auto doc = nlohmann::json::parse(io::ReadTextFile(dir_ / "out/recall.json"));
  EXPECT_EQ(doc["total"], 10);
  EXPECT_EQ(doc["thresholds"][2]["recall_percent"], 100.0);
}

TEST_F(CliTest, EvaluateOnGroundTruthPrintsFullRecall) {
  ASSERT_EQ(RunCli("synth --seed 3 --num-queries 4 --out " + P("scene"), Log()), 0);
  const auto gt = io::ParsePoseFile(io::ReadTextFile(dir_ / "scene/gt_poses.txt"));
  std::vector<LocalizationResult> results;
  for (const auto& [id, pose] : gt) {
    LocalizationResult r;
    r.query_id = id;
    r.pose = pose;
    results.push_back(r);
  }
  io::WriteTextFile(dir_ / "results.csv", io::FormatResultsCsv(results));
  ASSERT_EQ(RunCli("evaluate --results " + P("results.csv") + " --gt " + P("scene/gt_poses.txt"),
                Log()),
            0);
  const std::string out = LogText();
  std::size_t hits = 0;
  for (std::size_t at = out.find("100.0"); at != std::string::npos;
       at = out.find("100.0", at + 1)) {
    ++hits;
  }
  EXPECT_EQ(hits, 3u) << out;
  EXPECT_NE(out.find("localized  4/4"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(RunCli("", Log()), 1);
  EXPECT_EQ(RunCli("synth", Log()), 1);
  EXPECT_EQ(RunCli("synth --out " + P("x") + " --no-such-flag", Log()), 1);
  EXPECT_EQ(RunCli("synth --out " + P("x") + " --num-landmarks 1", Log()), 2);
  EXPECT_EQ(RunCli("evaluate --results " + P("missing.csv") + " --gt " + P("missing.txt"), Log()),
            2);

  ASSERT_EQ(RunCli("synth --seed 2 --num-queries 2 --out " + P("scene"), Log()), 0);
  ASSERT_EQ(RunCli("build-db --input " + P("scene/references.txt") + " --out " + P("db"), Log()), 0);
  const std::string localize =
      "localize --db " + P("db") + " --queries " + P("scene/queries.txt") + " --out " +
      P("out/r.csv");
  EXPECT_EQ(RunCli(localize + " --alpha -1", Log()), 1);
  EXPECT_EQ(RunCli(localize + " --min-inliers 100000", Log()), 3);

  io::WriteTextFile(dir_ / "scene/queries/query_0000.dense.bin", "XXXX garbage");
  EXPECT_EQ(RunCli(localize, Log()), 2);
}

TEST_F(CliTest, ConfigFileAndFlagOverrides) {
  io::WriteTextFile(dir_ / "cfg.txt", "seed = 11\nalpha = 0.8\nn_neighbors = 4\n");
  ASSERT_EQ(RunCli("synth --num-queries 2 --config " + P("cfg.txt") + " --alpha 0.7 --out " +
                    P("scene"),
                Log()),
            0)
      << LogText();
  const RunConfig c = ParseRunConfig(io::ReadTextFile(dir_ / "scene/run_config.txt"));
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.alpha, 0.7);
  EXPECT_EQ(c.n_neighbors, 4);
  EXPECT_EQ(c.fraction, 0.006);
  io::WriteTextFile(dir_ / "bad.txt", "alpha = 0.8\nbogus = 1\n");
  EXPECT_EQ(RunCli("synth --config " + P("bad.txt") + " --out " + P("x"), Log()), 2);
}

}  // namespace
}  // namespace s2d
