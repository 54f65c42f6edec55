#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "wmlab/dataset.hpp"
#include "wmlab/error.hpp"
#include "wmlab/pipeline.hpp"

using namespace wmlab;
namespace fs = std::filesystem;

namespace {

std::string minimal(std::uint64_t seed, const std::string& extra = "") {
  return R"({"seed": )" + std::to_string(seed) + extra +
         R"(, "datasets": [{"name": "a", "split": "test", "prompts": 10}, {"name": "b", "split": "calibration", "prompts": 10}],
             "eval": {"calibration_dataset": "b", "test_dataset": "a"}})";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig tiny(const fs::path& work) {
  auto cfg = RunConfig::load(fs::path(WMLAB_SOURCE_DIR) / "tests/data/tiny.json");
  cfg.work_dir = work;
  cfg.corpus_dir.clear();
  return cfg;
}

class TinyRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    work_ = fs::temp_directory_path() / "wmlab_pipeline_test";
    fs::remove_all(work_);
    cmd_run_all(tiny(work_));
  }
  static fs::path work_;
};
fs::path TinyRun::work_;

int run_cli(const std::string& args) {
  const std::string cli = WMLAB_CLI;
  if (cli.empty()) return -1;
  const int rc = std::system((cli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

fs::path write_temp(const std::string& name, const std::string& text) {
  const auto p = fs::temp_directory_path() / name;
  std::ofstream(p) << text;
  return p;
}

}  // namespace

TEST(RunConfig, RejectsUnknownKeys) {
  EXPECT_THROW(RunConfig::from_json(R"({"seed": 1, "sede": 2})", "."), ValidationError);
  EXPECT_THROW(RunConfig::from_json(R"({"seed": 1, "eval": {"lenghts": [1]}})", "."), ValidationError);
}

TEST(RunConfig, SeedRequired) { EXPECT_THROW(RunConfig::from_json("{}", "."), ValidationError); }

TEST(RunConfig, MainLengthMustBeEvaluated) {
  EXPECT_THROW(RunConfig::from_json(R"({"seed": 1, "eval": {"lengths": [50], "main_length": 100}})", "."),
               ValidationError);
}

TEST(RunConfig, DigestIgnoresPaths) {
  auto a = RunConfig::from_json(minimal(3), "/tmp/a");
  auto b = RunConfig::from_json(minimal(3), "/tmp/b");
  EXPECT_EQ(a.digest(), b.digest());
  auto c = RunConfig::from_json(minimal(4), "/tmp/a");
  EXPECT_NE(a.digest(), c.digest());
}

TEST_F(TinyRun, CmdTrainLmWritesModels) {
  for (const char* f : {"ours.json", "theirs.json", "digests.json", "kuditipudi_references.json", "classifier.json"}) {
    EXPECT_TRUE(fs::exists(work_ / "models" / f)) << f;
  }
}

TEST_F(TinyRun, CmdGenerateManifestShape) {
  const auto d = read_manifest(work_ / "datasets" / "alpha.jsonl");
  const auto cfg = tiny(work_);
  const std::size_t per_prompt = cfg.plain_per_prompt + cfg.scheme_names().size() + 2;
  EXPECT_EQ(d.size(), 10 * per_prompt);
  for (const auto& r : d) {
    EXPECT_EQ(r.split, "test");
    EXPECT_TRUE(r.entropy.has_value());
    EXPECT_TRUE(r.bucket.has_value());
  }
}

TEST_F(TinyRun, CmdScoreTableHasEveryLength) {
  const auto t = ScoreTable::load(work_ / "scores" / "alpha.csv");
  std::set<std::size_t> lengths;
  for (const auto& r : t.rows) lengths.insert(r.length);
  EXPECT_EQ(lengths, (std::set<std::size_t>{50, 100}));
  EXPECT_EQ(ScoreTable::from_csv(t.to_csv()).to_csv(), t.to_csv());
}

TEST_F(TinyRun, CmdEvaluateWritesReport) {
  for (const char* f : {"report.json", "accuracy.csv", "pauc.csv", "summary.md"}) {
    EXPECT_TRUE(fs::exists(work_ / "reports" / f)) << f;
  }
  EXPECT_NE(slurp(work_ / "reports" / "report.json").find(tiny(work_).digest()), std::string::npos);
}

TEST_F(TinyRun, RerunIsByteIdentical) {
  const auto other = fs::temp_directory_path() / "wmlab_pipeline_test_rerun";
  fs::remove_all(other);
  cmd_run_all(tiny(other));
  for (const char* f : {"datasets/alpha.jsonl", "scores/alpha.csv", "scores/beta.csv", "reports/report.json",
                        "reports/accuracy.csv", "reports/summary.md"}) {
    EXPECT_EQ(slurp(work_ / f), slurp(other / f)) << f;
  }
  fs::remove_all(other);
}

TEST(Cli, ExitCodes) {
  if (std::string(WMLAB_CLI).empty()) GTEST_SKIP() << "CLI not built";
  const auto bad = write_temp("wmlab_bad.json", R"({"seed": 1, "bogus": 1})");
  EXPECT_EQ(run_cli("generate -c " + bad.string()), 2);
  const auto empty_dir = fs::temp_directory_path() / "wmlab_empty_work";
  fs::remove_all(empty_dir);
  const auto ok = write_temp("wmlab_missing.json", minimal(1, R"(, "work_dir": ")" + empty_dir.string() + R"(")"));
  EXPECT_EQ(run_cli("evaluate -c " + ok.string()), 3);
  EXPECT_EQ(run_cli("no-such-command"), 2);
}
