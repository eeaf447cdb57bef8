#include <gtest/gtest.h>

#include "builderbench/bench.h"

namespace builderbench {
namespace {

TEST(BenchTest, PointIsConsistent) {
  const BenchPoint p = BenchThroughput(3, 16, 1, 0.2);
  EXPECT_EQ(p.n, 3);
  EXPECT_EQ(p.num_envs, 16);
  EXPECT_GT(p.steps, 0);
  EXPECT_EQ(p.steps % 16, 0);
  EXPECT_GT(p.seconds, 0.0);
  EXPECT_NEAR(p.steps_per_sec, p.steps / p.seconds, 1e-6 * p.steps_per_sec);
}

TEST(BenchTest, MoreCubesCostMore) {
  const BenchPoint one = BenchThroughput(1, 64, 1, 0.3);
  const BenchPoint nine = BenchThroughput(9, 64, 1, 0.3);
  EXPECT_GT(one.steps_per_sec, nine.steps_per_sec);
}

TEST(BenchTest, BatchingDoesNotLoseThroughput) {
  const BenchPoint single = BenchThroughput(1, 1, 1, 0.3);
  const BenchPoint batch = BenchThroughput(1, 512, 1, 0.6);
  EXPECT_GT(batch.steps_per_sec, 0.5 * single.steps_per_sec);
}

TEST(BenchTest, ReportCarriesMachineMetadata) {
  const BenchReport r = RunBench({1, 3}, 8, 2, 0.05, true, 1);
  ASSERT_EQ(r.per_n.size(), 2u);
  EXPECT_EQ(r.per_n[1].n, 3);
  ASSERT_EQ(r.scaling.size(), 2u);
  EXPECT_EQ(r.scaling[0].threads, 1);
  EXPECT_EQ(r.scaling[1].threads, 2);
  EXPECT_GE(r.machine.hardware_threads, 1);
  const std::string text = r.Serialize();
  EXPECT_NE(text.find("hardware_threads="), std::string::npos) << text;
  EXPECT_NE(text.find("compiler="), std::string::npos) << text;
  EXPECT_NE(text.find("steps_per_sec="), std::string::npos) << text;
}

}  // namespace
}  // namespace builderbench
