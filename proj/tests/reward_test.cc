#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "builderbench/reward.h"
#include "builderbench/tasks.h"

namespace builderbench {
namespace {

const RewardConfig kDense{RewardShape::kDense, Matching::kInvariant, kSuccessThreshold};
const RewardConfig kSparse{RewardShape::kSparse, Matching::kInvariant, kSuccessThreshold};

TEST(DenseRewardTest, ExactPlacementGivesK) {
  const std::vector<Vec3> t = {{0, 0, 0.02}, {0.1, 0, 0.02}, {0, 0.1, 0.02}};
  EXPECT_EQ(DenseReward(t, t, kDense), 3.0);
}

TEST(DenseRewardTest, OneCubeOffByTwoCentimetres) {
  const std::vector<Vec3> t = {{0, 0, 0.02}, {0.1, 0, 0.02}, {0, 0.1, 0.02}};
  std::vector<Vec3> c = t;
  c[1].x() += 0.02;
  EXPECT_NEAR(DenseReward(c, t, kDense), 2.9800027, 1e-7);
}

TEST(DenseRewardTest, SensitiveMatchingPenalisesSwap) {
  const std::vector<Vec3> t = {{0, 0, 0.02}, {0, 0.1, 0.02}, {0.2, 0.2, 0.02}};
  const std::vector<Vec3> c = {t[1], t[0], t[2]};
  const RewardConfig sensitive{RewardShape::kDense, Matching::kSensitive, kSuccessThreshold};
  EXPECT_NEAR(DenseReward(c, t, sensitive), 2.8006640, 1e-7);
  EXPECT_EQ(DenseReward(c, t, kDense), 3.0);
}

TEST(DenseRewardTest, SensitiveMatchingUsesLeadingCubes) {
  const std::vector<Vec3> t = {{0, 0, 0.02}};
  const std::vector<Vec3> c = {{0.1, 0, 0.02}, {0, 0, 0.02}};
  const RewardConfig sensitive{RewardShape::kDense, Matching::kSensitive, kSuccessThreshold};
  EXPECT_NEAR(DenseReward(c, t, sensitive), 1.0 - std::tanh(0.1), 1e-15);
  EXPECT_EQ(DenseReward(c, t, kDense), 1.0);
}

TEST(DenseRewardTest, MonotoneInEachDistance) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 0.5);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> d = {u(rng), u(rng), u(rng)};
    const double before = DenseFromDistances(d);
    d[trial % 3] *= 0.5;
    EXPECT_GE(DenseFromDistances(d), before);
  }
}

TEST(SparseRewardTest, ThresholdCases) {
  EXPECT_EQ(SparseFromDistances(std::vector<double>{0.019, 0.015}, kSuccessThreshold), 0.0);
  EXPECT_EQ(SparseFromDistances(std::vector<double>{0.021, 0.001}, kSuccessThreshold), -1.0);
  EXPECT_EQ(SparseFromDistances(std::vector<double>{}, kSuccessThreshold), 0.0);
}

TEST(ParseTest, NamesRoundTrip) {
  for (RewardShape s : {RewardShape::kDense, RewardShape::kSparse}) {
    EXPECT_EQ(ParseRewardShape(ToString(s)), s);
  }
  for (Matching m : {Matching::kInvariant, Matching::kSensitive}) {
    EXPECT_EQ(ParseMatching(ToString(m)), m);
  }
  EXPECT_THROW(ParseRewardShape("shaped"), ConfigError);
}

// Randomised properties over many instances.
TEST(RewardPropertyTest, InvariantUnderCubePermutation) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(-0.15, 0.15);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    const int k = 1 + static_cast<int>(rng() % n);
    std::vector<Vec3> cubes, targets;
    for (int i = 0; i < n; ++i) cubes.emplace_back(u(rng), u(rng), 0.02 + std::abs(u(rng)));
    for (int i = 0; i < k; ++i) targets.emplace_back(u(rng), u(rng), 0.02 + std::abs(u(rng)));
    if (trial % 4 == 0) cubes[0] = targets[0] + Vec3(0.005, 0, 0);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Vec3> shuffled;
    for (int p : perm) shuffled.push_back(cubes[p]);
    const double dense = DenseReward(cubes, targets, kDense);
    ASSERT_EQ(dense, DenseReward(shuffled, targets, kDense));
    ASSERT_EQ(SparseReward(cubes, targets, kSparse), SparseReward(shuffled, targets, kSparse));
    ASSERT_GT(dense, 0.0);
    ASSERT_LE(dense, k);
    const bool formed = SparseReward(cubes, targets, kSparse) == 0.0;
    ASSERT_EQ(formed, Success(cubes, targets));
    ASSERT_EQ(dense == k, MatchTargets(cubes, targets, Matching::kInvariant).total_cost == 0.0);
  }
}

}  // namespace
}  // namespace builderbench
