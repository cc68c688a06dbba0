// SPDX-License-Identifier: Apache-2.0
// Drives the built `recap` binary end to end.
#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#ifndef RECAP_CLI_PATH
#error "RECAP_CLI_PATH must name the recap executable"
#endif

namespace {

namespace fs = std::filesystem;

struct Run {
  int code = -1;
  std::string err;
};

fs::path workdir() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / "recap_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Run recap(const std::string& args) {
  const fs::path err = workdir() / "stderr.txt";
  const std::string cmd = "cd " + workdir().string() + " && " + RECAP_CLI_PATH + " " + args + " > stdout.txt 2> " +
                          err.string();
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

const char* kSmoke = R"({
  "data.path": "world.tsv",
  "dataset.k": 4,
  "model.poi_dim": 8, "model.category_dim": 4, "model.hidden": 16, "model.ffn": 32,
  "model.layers": 1, "model.heads": 2, "model.graph_hidden": 16,
  "revisit.candidate_cap": 16, "revisit.calibration_hidden": 8, "revisit.time_dim": 4,
  "training.epochs": 2, "training.batch_size": 64, "training.learning_rate": 0.003,
  "training.e_graph": 1, "training.graph_ramp": 1, "training.e_prior": 1,
  "training.e_corr": 2, "training.e_warm": 2, "training.warm_ramp": 1
})";

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    std::ofstream(workdir() / "smoke.json") << kSmoke;
    ASSERT_EQ(recap("synth --out world.tsv -p num_users=8 -p num_pois=40 -p num_checkins=2000 -p num_withheld=4").code, 0);
  }
};

TEST_F(Cli, MissingColumnIsExitTwo) {
  std::ofstream(workdir() / "short.tsv") << "u1\tp1\tc1\t40.7\t-74.0\n";
  auto r = recap("preprocess -c smoke.json --data short.tsv -o run_bad");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("timestamp"), std::string::npos) << r.err;
}

TEST_F(Cli, UnknownConfigKeyIsExitTwo) {
  auto r = recap("train -c smoke.json -s model.depth=3");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("model.depth"), std::string::npos);
}

TEST_F(Cli, BadArgumentsAreExitTwo) {
  EXPECT_EQ(recap("evaluate --split train").code, 2);
  EXPECT_EQ(recap("").code, 2);
}

TEST_F(Cli, InfeasibleSynthIsExitFive) {
  EXPECT_EQ(recap("synth --out nope.tsv -p num_withheld=100000").code, 5);
  EXPECT_EQ(recap("synth --out nope.tsv -p colour=3").code, 5);
}

TEST_F(Cli, PreprocessTrainEvaluate) {
  ASSERT_EQ(recap("preprocess -c smoke.json -o run_a").code, 0);
  auto summary = nlohmann::json::parse(slurp(workdir() / "run_a" / "summary.json"));
  EXPECT_EQ(summary["users"], 8);
  EXPECT_TRUE(summary.contains("test_unique_tail_fraction"));

  ASSERT_EQ(recap("train -c smoke.json -o run_a").code, 0);
  EXPECT_TRUE(fs::exists(workdir() / "run_a" / "model.ckpt"));
  std::ifstream log(workdir() / "run_a" / "train_log.jsonl");
  std::string line;
  int epochs = 0;
  std::string first;
  while (std::getline(log, line)) {
    auto rec = nlohmann::json::parse(line);
    EXPECT_TRUE(rec.contains("lambda_warm"));
    if (epochs == 0) first = line;
    ++epochs;
  }
  EXPECT_EQ(epochs, 2);

  ASSERT_EQ(recap("evaluate -c smoke.json -o run_a").code, 0);
  auto report = nlohmann::json::parse(slurp(workdir() / "run_a" / "report_test.json"));
  EXPECT_TRUE(report["tail"].contains("hr@20"));
  EXPECT_TRUE(fs::exists(workdir() / "run_a" / "bins_test.csv"));

  // Same seed, same store: the first logged loss replays exactly.
  ASSERT_EQ(recap("train -c smoke.json -s data.store=run_a/store.json -o run_b").code, 0);
  std::ifstream log_b(workdir() / "run_b" / "train_log.jsonl");
  std::string first_b;
  std::getline(log_b, first_b);
  EXPECT_EQ(nlohmann::json::parse(first)["main_loss"], nlohmann::json::parse(first_b)["main_loss"]);

  // A different architecture cannot read this checkpoint.
  EXPECT_EQ(recap("evaluate -c smoke.json -s model.hidden=32 -s data.store=run_a/store.json "
                  "--checkpoint run_a/model.ckpt -o run_c")
                .code,
            4);

  ASSERT_EQ(recap("analyze-hops -c smoke.json -o run_a --max-hops 3").code, 0);
  auto hops = nlohmann::json::parse(slurp(workdir() / "run_a" / "hops.json"));
  EXPECT_EQ(hops["records"].size(), 3u);
  EXPECT_EQ(hops["records"][0]["covered"], 0);

  ASSERT_EQ(recap("report run_a/report_test.json run_b/report_test.json --out agg.json").code, 2);
  ASSERT_EQ(recap("evaluate -c smoke.json -s data.store=run_a/store.json -o run_b").code, 0);
  ASSERT_EQ(recap("report run_a/report_test.json run_b/report_test.json --out agg.json").code, 0);
  EXPECT_TRUE(fs::exists(workdir() / "agg.json"));
}

TEST_F(Cli, OutputDirFromEnvironment) {
  ASSERT_EQ(setenv("RECAP_OUTPUT_DIR", "run_env", 1), 0);
  auto r = recap("preprocess -c smoke.json");
  unsetenv("RECAP_OUTPUT_DIR");
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(fs::exists(workdir() / "run_env" / "store.json"));
}

}  // namespace
