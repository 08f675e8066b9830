#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;

const fs::path kConfigs = GAMORRA_CONFIG_DIR;

int run(const std::string& args) {
  std::string cmd = std::string(GAMORRA_CLI) + " " + args + " >/dev/null 2>&1";
  int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "gamorra_cli_test";
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    write(dir_ / "drift.json",
          R"({"name":"drift","frames":300,"templates":6,"drift":[{"frame":150,"stages":["all"],"multiplier":1.5}]})");
    write(dir_ / "train.json", R"({"offline_frame_count":100})");
    write(dir_ / "train_small.json", R"({"offline_frame_count":30})");
    std::string profile = (kConfigs / "profiles" / "game.json").string();
    ASSERT_EQ(run("simulate --scenario " + (dir_ / "drift.json").string() + " --profile " + profile +
                  " --seed 3 --out " + (dir_ / "sim").string()),
              0);
    ASSERT_EQ(run("bench --profile " + profile + " --out " + (dir_ / "perf.json").string()), 0);
  }

  static std::string data_args(const std::string& sim = "sim", const std::string& config = "train.json") {
    return "--trace " + (dir_ / sim / "trace.jsonl").string() + " --actuals " +
           (dir_ / sim / "actuals.csv").string() + " --perf " + (dir_ / "perf.json").string() + " --config " +
           (dir_ / config).string();
  }

  static inline fs::path dir_;
};

TEST_F(CliTest, SimulateArtifacts) {
  EXPECT_TRUE(fs::exists(dir_ / "sim" / "trace.jsonl"));
  EXPECT_TRUE(fs::exists(dir_ / "sim" / "actuals.csv"));
  EXPECT_FALSE(fs::is_empty(dir_ / "sim" / "shaders"));
  EXPECT_TRUE(fs::exists(dir_ / "perf.json"));
}

TEST_F(CliTest, FitRunCompare) {
  ASSERT_EQ(run("fit " + data_args() + " --out " + (dir_ / "w.json").string()), 0);
  ASSERT_EQ(run("run " + data_args() + " --weights " + (dir_ / "w.json").string() + " --out " +
                (dir_ / "hybrid.csv").string()),
            0);
  ASSERT_EQ(run("run " + data_args() + " --weights " + (dir_ / "w.json").string() + " --mode offline --out " +
                (dir_ / "offline.csv").string()),
            0);
  std::string hybrid = slurp(dir_ / "hybrid.csv"), offline = slurp(dir_ / "offline.csv");
  EXPECT_NE(hybrid.find(",online,"), std::string::npos);
  EXPECT_EQ(offline.find(",online,"), std::string::npos);
  ASSERT_EQ(run("compare " + data_args() + " --format both --out " + (dir_ / "cmp").string()), 0);
  EXPECT_TRUE(fs::exists(dir_ / "cmp" / "report.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "cmp" / "report.txt"));
  for (const char* m : {"gm-h", "gm-of", "ar", "fcm", "frq"}) {
    EXPECT_TRUE(fs::exists(dir_ / "cmp" / ("log_" + std::string(m) + ".csv"))) << m;
  }
}

TEST_F(CliTest, Deterministic) {
  std::string profile = (kConfigs / "profiles" / "game.json").string();
  std::string scenario = (kConfigs / "scenarios" / "smoke.json").string();
  for (const char* d : {"a", "b"}) {
    ASSERT_EQ(run("simulate --scenario " + scenario + " --profile " + profile + " --seed 9 --out " +
                  (dir_ / d).string()),
              0);
    ASSERT_EQ(run("compare " + data_args(d, "train_small.json") + " --out " + (dir_ / d / "cmp").string()), 0);
  }
  EXPECT_EQ(slurp(dir_ / "a" / "trace.jsonl"), slurp(dir_ / "b" / "trace.jsonl"));
  EXPECT_EQ(slurp(dir_ / "a" / "actuals.csv"), slurp(dir_ / "b" / "actuals.csv"));
  EXPECT_EQ(slurp(dir_ / "a" / "cmp" / "report.csv"), slurp(dir_ / "b" / "cmp" / "report.csv"));
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("bench --profile /nonexistent.json --out x.json"), 2);
  EXPECT_EQ(run("compare " + data_args() + " --models gm-h,lstm --out " + (dir_ / "bad").string()), 2);
  EXPECT_EQ(run("run " + data_args() + " --weights w --mode sometimes --out x.csv"), 2);

  write(dir_ / "tiny.json", R"({"name":"tiny","frames":3,"templates":2})");
  ASSERT_EQ(run("simulate --scenario " + (dir_ / "tiny.json").string() + " --profile " +
                (kConfigs / "profiles" / "game.json").string() + " --seed 1 --out " + (dir_ / "tiny").string()),
            0);
  EXPECT_EQ(run("fit --trace " + (dir_ / "tiny" / "trace.jsonl").string() + " --actuals " +
                (dir_ / "tiny" / "actuals.csv").string() + " --perf " + (dir_ / "perf.json").string() +
                " --config " + (dir_ / "train.json").string() + " --out " + (dir_ / "tiny_w.json").string()),
            3);
}

}  // namespace
