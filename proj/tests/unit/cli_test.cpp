#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "lupiet/cli/commands.hpp"
#include "lupiet/cli/config.hpp"
#include "lupiet/corpus/corpus.hpp"
#include "lupiet/error.hpp"

namespace lupiet::cli {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("lupiet_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write(const std::string& name, const std::string& text) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << text;
    return p;
  }

  static std::string read(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  // Runs the installed binary and returns its exit status.
  int shell(const std::string& args) {
    const std::string cmd = std::string(LUPIET_CLI_PATH) + " " + args + " > " +
                            (dir_ / "stdout.txt").string() + " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }

  int call(std::vector<std::string> args) {
    args.insert(args.begin(), "lupiet");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out_.str("");
    err_.str("");
    return run(static_cast<int>(argv.size()), argv.data(), out_, err_);
  }

  std::string small_config(const std::string& extra = "") {
    return R"({
  "synth": {"num_samples": 120, "vocab_size": 60, "seed": 4},
  "baseline_window": 1,
  "extended_windows": [3],
  "strategies": ["teacher", "lupiet", "transfer", "mixed"],
  "model": {"embed_dim": 6, "filter_widths": [3], "filters": 4},
  "train": {"max_epochs": 3, "batch_size": 16, "learning_rate": 0.01, "patience": 2},
  "distill": {"tau": [1, 2], "alpha": [0.5]},
  "seeds": [1, 2],
  "output_dir": "out")" + extra + "\n}\n";
  }

  fs::path dir_;
  std::ostringstream out_, err_;
};

TEST_F(CliTest, GenDataWritesCorpusAndCounts) {
  const auto spec = write("spec.json", R"({"num_samples": 200, "seed": 3})");
  const auto out = dir_ / "corpus.jsonl";
  ASSERT_EQ(shell("gen-data --spec " + spec.string() + " --out " + out.string()), 0);
  const Corpus c = load_corpus(out);
  EXPECT_EQ(c.samples.size(), 200u);
  EXPECT_EQ(c.count(Split::kTrain), 160u);
  const std::string table = read(dir_ / "stdout.txt");
  EXPECT_NE(table.find("train"), std::string::npos);
  EXPECT_NE(table.find("160"), std::string::npos);
}

TEST_F(CliTest, InvalidSpecExitsTwoWithoutOutput) {
  const auto spec = write("spec.json", R"({"num_samples": 200, "rho_late": 2.0})");
  const auto out = dir_ / "corpus.jsonl";
  EXPECT_EQ(shell("gen-data --spec " + spec.string() + " --out " + out.string()), 2);
  EXPECT_FALSE(fs::exists(out));
  EXPECT_NE(read(dir_ / "stderr.txt").find("rho_late"), std::string::npos);
  const auto typo = write("typo.json", R"({"num_sample": 200})");
  EXPECT_EQ(shell("gen-data --spec " + typo.string() + " --out " + out.string()), 2);
  EXPECT_NE(read(dir_ / "stderr.txt").find("num_sample"), std::string::npos);
}

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(shell(""), 2);
  EXPECT_EQ(shell("frobnicate"), 2);
  EXPECT_EQ(shell("train --strategy baseline"), 2);
  EXPECT_EQ(shell("--help"), 0);
  const auto cfg = write("c.json", small_config());
  EXPECT_EQ(shell("train --config " + cfg.string() + " --strategy bogus"), 2);
  EXPECT_NE(read(dir_ / "stderr.txt").find("bogus"), std::string::npos);
  EXPECT_EQ(shell("curve --config " + cfg.string() + " --ratios 0.1,abc"), 2);
  EXPECT_EQ(shell("curve --config " + cfg.string() + " --ratios 0,1"), 2);
  EXPECT_EQ(shell("compare --config " + cfg.string() + " --jobs 0"), 2);
}

TEST_F(CliTest, MissingCorpusIsRuntimeFailure) {
  const auto cfg = write("c.json", R"({"corpus": "missing.jsonl", "extended_windows": [3],
                                       "strategies": ["baseline"], "seeds": [1]})");
  EXPECT_EQ(call({"train", "--config", cfg.string(), "--strategy", "baseline"}), 1);
}

TEST_F(CliTest, ConfigErrorsNameTheField) {
  auto expect_field = [&](const std::string& text, const std::string& field) {
    try {
      parse_experiment_config(text, dir_);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  expect_field(R"({"synth": {}, "extended_windows": [3], "seeds": [1], "lr": 1})", "lr");
  expect_field(R"({"synth": {}, "extended_windows": [3], "seeds": [1], "train": {"lr": 1}})",
               "train.lr");
  expect_field(R"({"synth": {}, "extended_windows": [3], "seeds": [1], "distill": {"tau": [0]}})",
               "distill.tau");
  expect_field(R"({"synth": {}, "extended_windows": [3], "seeds": [1], "distill": {"alpha": [1.5]}})",
               "distill.alpha");
  expect_field(R"({"synth": {}, "extended_windows": [3, 1], "seeds": [1]})", "extended_windows");
  expect_field(R"({"synth": {}, "extended_windows": [3], "seeds": []})", "seeds");
  expect_field(R"({"extended_windows": [3], "seeds": [1]})", "corpus");
  expect_field(R"({"synth": {}, "extended_windows": [3], "seeds": [1], "strategies": ["x"]})",
               "strategies");
}

TEST_F(CliTest, ConfigPathsRelativeToConfigFile) {
  const auto c = parse_experiment_config(
      R"({"corpus": "data/c.jsonl", "extended_windows": [3], "seeds": [1], "output_dir": "o"})",
      dir_);
  EXPECT_EQ(*c.corpus_path, dir_ / "data/c.jsonl");
  EXPECT_EQ(c.output_dir, dir_ / "o");
  EXPECT_NE(run_seed(c.master_seed, 1), run_seed(c.master_seed, 2));
}

TEST_F(CliTest, TrainWritesArtifacts) {
  const auto cfg = write("c.json", small_config());
  ASSERT_EQ(call({"train", "--config", cfg.string(), "--strategy", "baseline", "--seed", "7"}), 0)
      << err_.str();
  const fs::path root = dir_ / "out" / "baseline";
  EXPECT_TRUE(fs::exists(root / "metrics.csv"));
  bool found_checkpoint = false, found_record = false;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    found_checkpoint |= e.path().filename() == "checkpoint.bin";
    found_record |= e.path().filename() == "record.jsonl";
  }
  EXPECT_TRUE(found_checkpoint);
  EXPECT_TRUE(found_record);
  EXPECT_NE(read(root / "metrics.csv").find("baseline,1,1,auroc"), std::string::npos);
}

TEST_F(CliTest, CompareIsDeterministicAndCoversEveryStrategy) {
  const auto cfg = write("c.json", small_config());
  ASSERT_EQ(call({"compare", "--config", cfg.string()}), 0) << err_.str();
  const std::string first = read(dir_ / "out" / "comparison.csv");
  const std::string table = read(dir_ / "out" / "comparison.txt");
  for (const char* row : {"baseline,1,", "teacher,3,", "lupiet,3,", "transfer,3->1,", "mixed,1+3,"}) {
    EXPECT_NE(first.find(row), std::string::npos) << row;
  }
  for (const char* group : {"Baseline", "Teacher", "LuPIET", "Transfer", "Mix-train"}) {
    EXPECT_NE(table.find(group), std::string::npos) << group;
  }
  ASSERT_EQ(call({"compare", "--config", cfg.string(), "--jobs", "2"}), 0);
  EXPECT_EQ(read(dir_ / "out" / "comparison.csv"), first);
  EXPECT_EQ(read(dir_ / "out" / "comparison.txt"), table);
}

TEST_F(CliTest, CurveWritesTableAndGapSummary) {
  const auto cfg = write("c.json", small_config());
  ASSERT_EQ(call({"curve", "--config", cfg.string(), "--ratios", "1.0,0.5"}), 0) << err_.str();
  const std::string csv = read(dir_ / "out" / "curve.csv");
  EXPECT_EQ(csv.rfind("ratio,strategy,window,seed_count,metric,mean,std\n", 0), 0u);
  EXPECT_NE(csv.find("0.500000,baseline,1,2,auroc"), std::string::npos);
  EXPECT_NE(csv.find("1.000000,lupiet,3,2,auroc"), std::string::npos);
  const std::string summary = read(dir_ / "out" / "curve_summary.txt");
  EXPECT_EQ(summary.rfind("# gap auroc lupiet[3]-baseline: ratio 0.500", 0), 0u) << summary;
}

}  // namespace
}  // namespace lupiet::cli
