#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <thread>

#include "builderbench/common.h"
#include "builderbench/config.h"

namespace builderbench {
namespace {

TEST(RunConfigTest, ParsesKeysCommentsAndWhitespace) {
  const RunConfig c = RunConfig::Parse(
      "# header\n"
      "\n"
      "num_envs = 64\n"
      "lr=3e-4   # trailing comment\n"
      "  tasks =  t_block,cube-1-task1  \n");
  EXPECT_EQ(c.values().size(), 3u);
  EXPECT_EQ(c.GetInt("num_envs", 0), 64);
  EXPECT_DOUBLE_EQ(c.GetDouble("lr", 0), 3e-4);
  EXPECT_EQ(c.GetString("tasks", ""), "t_block,cube-1-task1");
  EXPECT_FALSE(c.Has("seed"));
  EXPECT_EQ(c.GetInt("seed", 7), 7);
}

TEST(RunConfigTest, LaterAssignmentWins) {
  const RunConfig c = RunConfig::Parse("seed=1\nseed=2\n");
  EXPECT_EQ(c.GetInt("seed", 0), 2);
}

TEST(RunConfigTest, ErrorsNameSourceAndLine) {
  try {
    RunConfig::Parse("a=1\n\nno equals here\n", "run.cfg");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("run.cfg:3"), std::string::npos) << e.what();
  }
  EXPECT_THROW(RunConfig::Parse(" = 4\n"), ConfigError);
}

TEST(RunConfigTest, TypedGettersRejectGarbage) {
  const RunConfig c = RunConfig::Parse("n=12abc\nx=1.5.2\ny=\n");
  EXPECT_THROW(c.GetInt("n", 0), ConfigError);
  EXPECT_THROW(c.GetDouble("x", 0), ConfigError);
  EXPECT_THROW(c.GetInt("y", 0), ConfigError);
  EXPECT_EQ(c.GetString("y", "fallback"), "");
}

TEST(RunConfigTest, LoadFromFile) {
  const auto path = std::filesystem::temp_directory_path() / "bb_config_test.cfg";
  std::ofstream(path) << "threads=3\n";
  EXPECT_EQ(RunConfig::Load(path.string()).GetInt("threads", 0), 3);
  std::filesystem::remove(path);
  EXPECT_THROW(RunConfig::Load(path.string()), ConfigError);
}

class ThreadsTest : public ::testing::Test {
 protected:
  void SetUp() override {
    if (const char* v = std::getenv("BB_THREADS")) saved_ = v;
    unsetenv("BB_THREADS");
  }
  void TearDown() override {
    if (saved_) {
      setenv("BB_THREADS", saved_->c_str(), 1);
    } else {
      unsetenv("BB_THREADS");
    }
  }
  std::optional<std::string> saved_;
};

TEST_F(ThreadsTest, FlagThenConfigThenEnvironmentThenHardware) {
  const RunConfig with_key = RunConfig::Parse("threads=5\n");
  const RunConfig empty;
  setenv("BB_THREADS", "7", 1);
  EXPECT_EQ(ResolveThreads(2, with_key), 2);
  EXPECT_EQ(ResolveThreads(std::nullopt, with_key), 5);
  EXPECT_EQ(ResolveThreads(std::nullopt, empty), 7);
  unsetenv("BB_THREADS");
  const int hw = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  EXPECT_EQ(ResolveThreads(std::nullopt, empty), hw);
}

TEST_F(ThreadsTest, InvalidValuesAreRejected) {
  EXPECT_THROW(ResolveThreads(0, RunConfig{}), ConfigError);
  EXPECT_THROW(ResolveThreads(std::nullopt, RunConfig::Parse("threads=0\n")), ConfigError);
  setenv("BB_THREADS", "zero", 1);
  EXPECT_GE(ResolveThreads(std::nullopt, RunConfig{}), 1);
}

}  // namespace
}  // namespace builderbench
