#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"

namespace fs = std::filesystem;

namespace {

const std::string kCli = HYSID_CLI_PATH;
const std::string kClean = std::string(HYSID_CONFIG_DIR) + "/tank_clean.json";

int run(const std::string& args) {
  const int rc = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("hysid_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string sub(const std::string& name) const { return (dir_ / name).string(); }

  static nlohmann::json read_json(const std::string& path) {
    std::ifstream f(path);
    return nlohmann::json::parse(f);
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SimulateWritesManifestedRuns) {
  ASSERT_EQ(run("simulate --config " + kClean + " --out " + sub("sim")), 0);
  auto m = read_json(sub("sim/manifest.json"));
  EXPECT_EQ(m["command"], "simulate");
  EXPECT_EQ(m["files"].size(), 20u);
  for (const auto& f : m["files"]) EXPECT_TRUE(fs::exists(dir_ / "sim" / f.get<std::string>())) << f;
  std::ifstream csv(sub("sim/run_000.csv"));
  auto ds = hysid::read_csv(csv, "run_000.csv");
  EXPECT_EQ(ds.length(), 8000u);
}

TEST_F(Cli, IdentifyThenPredictTwoStepsFromInitialSample) {
  ASSERT_EQ(run("simulate --config " + kClean + " --out " + sub("sim")), 0);
  ASSERT_EQ(run("identify --config " + kClean + " --data " + sub("sim") + " --out " + sub("id")), 0);
  auto model = hysid::load_model(sub("id/model.json"));
  EXPECT_EQ(hysid::active_term_count(model), std::vector<std::size_t>{4});
  EXPECT_TRUE(fs::exists(sub("id/equations.txt")));
  ASSERT_EQ(run("predict --config " + kClean + " --model " + sub("id/model.json") + " --data " + sub("sim") +
                " --steps 2 --out " + sub("pred")),
            0);
  std::ifstream csv(sub("pred/prediction_016.csv"));
  auto ds = hysid::read_csv(csv, "prediction_016.csv");
  EXPECT_EQ(ds.length(), 3u);
  auto metrics = read_json(sub("pred/metrics.json"));
  EXPECT_FALSE(metrics.empty());
}

TEST_F(Cli, MinimalScenarioGivesTwoRows) {
  auto j = read_json(kClean);
  j["scenario"]["base"]["n_steps"] = 2;
  j["scenario"]["n_runs"] = 2;
  j["split"]["train_count"] = 1;
  std::ofstream(sub("tiny.json")) << j.dump();
  ASSERT_EQ(run("simulate --config " + sub("tiny.json") + " --out " + sub("sim")), 0);
  std::ifstream csv(sub("sim/run_001.csv"));
  EXPECT_EQ(hysid::read_csv(csv, "run_001.csv").length(), 2u);
}

TEST_F(Cli, ExitCodes) {
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("simulate --bogus 1"), 2);
  EXPECT_EQ(run("simulate --config /nonexistent.json --out " + sub("x")), 2);
  EXPECT_EQ(run("experiment sideways --out " + sub("x")), 2);
  EXPECT_EQ(run("identify --config " + kClean + " --lambda 1e9 --out " + sub("x")), 3);
  EXPECT_EQ(run("predict --config " + kClean + " --model " + sub("missing.json") + " --out " + sub("x")), 5);
  std::ofstream(sub("bad.csv")) << "time,h\n0,1\n1,nan\n";
  EXPECT_EQ(run("identify --config " + kClean + " --data " + sub("bad.csv") + " --out " + sub("x")), 3);
}

TEST_F(Cli, DivergentModelExitsFour) {
  ASSERT_EQ(run("identify --config " + kClean + " --out " + sub("id")), 0);
  auto j = [&] {
    std::ifstream f(sub("id/model.json"));
    return nlohmann::json::parse(f);
  }();
  auto m = hysid::model_from_json(j);
  m.coefficients *= 3.0;
  hysid::save_model(sub("boom.json"), m);
  EXPECT_EQ(run("predict --config " + kClean + " --model " + sub("boom.json") + " --out " + sub("pred")), 4);
  EXPECT_TRUE(fs::exists(sub("pred/metrics.json")));
}

TEST_F(Cli, OverridesRecordedInManifest) {
  ASSERT_EQ(run("identify --config " + kClean + " --seed 3 --lambda 0.002 --out " + sub("id")), 0);
  auto m = read_json(sub("id/manifest.json"));
  EXPECT_EQ(m["parameters"]["seed"], 3);
  EXPECT_EQ(m["parameters"]["lambda"], 0.002);
}
