#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "support/process.hpp"
#include "support/synthetic.hpp"

namespace gnmr {
namespace {

namespace fs = std::filesystem;
using testing::read_file;
using testing::run_command;

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / (std::string("gnmr_cli_test_") + ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    log_ = dir_ / "log.txt";
    testing::SyntheticSpec spec;
    spec.train_units = 10;
    spec.test_units = 4;
    testing::write_synthetic_cmapss(dir_ / "data", "FD901", spec);
  }

  int run(const std::vector<std::string>& args) { return run_command(GNMR_CLI_PATH, args, log_); }

  std::string graph() const { return std::string(GNMR_SOURCE_DIR) + "/configs/turbofan_8.json"; }

  fs::path write_config(const std::string& name, nlohmann::json extra = nlohmann::json::object()) {
    nlohmann::json cfg{{"dataset", "FD901"},
                       {"data_dir", (dir_ / "data").string()},
                       {"graph", graph()},
                       {"cache_dir", (dir_ / "cache").string()},
                       {"out_dir", (dir_ / name).string()},
                       {"window", {{"length", 30}, {"shift", 10}}},
                       {"train", {{"max_epochs", 2}, {"seed", 4}, {"model_config", {{"hidden", 4}}}}}};
    cfg.update(extra);
    const auto path = dir_ / (name + ".json");
    std::ofstream(path) << cfg.dump(2);
    return path;
  }

  fs::path dir_, log_;
};

TEST_F(Cli, PrepareWritesSummaryAndIsDeterministic) {
  ASSERT_EQ(run({"prepare", "--dataset", "FD901", "--data-dir", (dir_ / "data").string(), "--graph", graph(), "--out",
                 (dir_ / "c1").string()}),
            0)
      << read_file(log_);
  ASSERT_EQ(run({"prepare", "--dataset", "FD901", "--data-dir", (dir_ / "data").string(), "--graph", graph(), "--out",
                 (dir_ / "c2").string()}),
            0);
  const auto summary = nlohmann::json::parse(read_file(dir_ / "c1" / "FD901_summary.json"));
  EXPECT_EQ(summary["train_units"], 10);
  EXPECT_EQ(summary["test_units"], 4);
  EXPECT_EQ(summary["test_windows"], 4);
  const std::string cache = summary["cache_file"];
  EXPECT_EQ(read_file(dir_ / "c1" / cache), read_file(dir_ / "c2" / cache));
}

TEST_F(Cli, MissingDataIsUserError) {
  EXPECT_EQ(run({"prepare", "--dataset", "FD004", "--data-dir", (dir_ / "nowhere").string(), "--out",
                 (dir_ / "c").string()}),
            2);
}

TEST_F(Cli, InvalidConfigIsUserError) {
  std::ofstream(dir_ / "bad.json") << R"({"train": {"batch_size": 0}})";
  EXPECT_EQ(run({"train", "--config", (dir_ / "bad.json").string()}), 2);
  std::ofstream(dir_ / "typo.json") << R"({"trian": {}})";
  EXPECT_EQ(run({"train", "--config", (dir_ / "typo.json").string()}), 2);
  EXPECT_EQ(run({"train", "--config", (dir_ / "missing.json").string()}), 2);
  EXPECT_EQ(run({"bogus-subcommand"}), 2);
  EXPECT_EQ(run({"perturb-graph", "--base", graph(), "--variant", "weird", "--out", (dir_ / "g.json").string()}), 2);
}

TEST_F(Cli, TrainEvaluateAndAttentionReport) {
  const auto cfg = write_config("run");
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--quiet"}), 0) << read_file(log_);
  for (const char* f : {"config.json", "history.csv", "best.ckpt", "eval_report.csv", "metrics.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  ASSERT_EQ(run({"evaluate", "--checkpoint", (dir_ / "run" / "best.ckpt").string(), "--dataset", "FD901", "--out",
                 (dir_ / "eval").string()}),
            0)
      << read_file(log_);
  EXPECT_EQ(read_file(dir_ / "eval" / "eval_report.csv"), read_file(dir_ / "run" / "eval_report.csv"));
  ASSERT_EQ(run({"attention-report", "--report", (dir_ / "eval" / "eval_report.csv").string(), "--fault-node", "HPC"}),
            0);
  const auto profile = read_file(dir_ / "eval" / "attention_profile.csv");
  EXPECT_EQ(profile.rfind("bin,mean_w_fault,mean_w_others,mean_rhat_fault,mean_rhat_others", 0), 0u);
  EXPECT_EQ(run({"attention-report", "--report", (dir_ / "eval" / "eval_report.csv").string(), "--fault-node",
                 "Gearbox"}),
            2);
}

TEST_F(Cli, GraphMismatchIsCompatibilityError) {
  const auto cfg = write_config("orig");
  ASSERT_EQ(run({"train", "--config", cfg.string(), "--quiet"}), 0) << read_file(log_);
  const auto other = write_config("single", {{"variant", "single_node"}});
  ASSERT_EQ(run({"train", "--config", other.string(), "--quiet"}), 0) << read_file(log_);
  const auto single_cache = nlohmann::json::parse(read_file(dir_ / "single" / "config.json"))["cache_file"];
  EXPECT_EQ(run({"evaluate", "--checkpoint", (dir_ / "orig" / "best.ckpt").string(), "--cache",
                 (dir_ / "cache" / single_cache.get<std::string>()).string(), "--out", (dir_ / "x").string()}),
            3);
}

TEST_F(Cli, PerturbGraphVariants) {
  const std::vector<std::pair<std::string, std::size_t>> variants{
      {"single_node", 1}, {"reduced4", 4}, {"original", 8}, {"increased", 13}, {"per_sensor", 21}};
  for (const auto& [v, n] : variants) {
    const auto out = dir_ / (v + ".json");
    ASSERT_EQ(run({"perturb-graph", "--base", graph(), "--variant", v, "--seed", "3", "--out", out.string()}), 0);
    EXPECT_EQ(nlohmann::json::parse(read_file(out))["nodes"].size(), n) << v;
  }
}

TEST_F(Cli, GridWritesResultsAndBestRun) {
  const auto cfg = write_config("grid", {{"grid", {{"hidden", {3, 4}}, {"steps", {0, 1}}, {"gru_layers", {1}}}},
                                         {"train", {{"max_epochs", 1}, {"seed", 2}}}});
  ASSERT_EQ(run({"grid", "--config", cfg.string(), "--jobs", "2"}), 0) << read_file(log_);
  const auto csv = read_file(dir_ / "grid" / "grid_results.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 5);
  EXPECT_TRUE(fs::exists(dir_ / "grid" / "best" / "best.ckpt"));
}

}  // namespace
}  // namespace gnmr
