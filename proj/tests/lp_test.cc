#include <gtest/gtest.h>

#include <random>

#include "builderbench/lp.h"

namespace builderbench {
namespace {

TEST(SimplexTest, SmallMaximisation) {
  // maximise 3x + 2y  s.t. x + y <= 4, x + 3y <= 6  (minimise the negation)
  LinearProgram lp;
  lp.num_vars = 2;
  lp.c = {-3, -2};
  lp.a_ub = {{1, 1}, {1, 3}};
  lp.b_ub = {4, 6};
  const LpResult r = SolveLp(lp);
  ASSERT_EQ(r.status, LpStatus::kOptimal);
  EXPECT_NEAR(r.objective, -12.0, 1e-9);
  EXPECT_NEAR(r.x[0], 4.0, 1e-9);
  EXPECT_NEAR(r.x[1], 0.0, 1e-9);
}

TEST(SimplexTest, EqualityConstraintsNeedPhaseOne) {
  // minimise x + y  s.t. x + 2y = 4, x - y = 1
  LinearProgram lp;
  lp.num_vars = 2;
  lp.c = {1, 1};
  lp.a_eq = {{1, 2}, {1, -1}};
  lp.b_eq = {4, 1};
  const LpResult r = SolveLp(lp);
  ASSERT_EQ(r.status, LpStatus::kOptimal);
  EXPECT_NEAR(r.x[0], 2.0, 1e-9);
  EXPECT_NEAR(r.x[1], 1.0, 1e-9);
}

TEST(SimplexTest, InfeasibleIsReported) {
  LinearProgram lp;
  lp.num_vars = 1;
  lp.c = {1};
  lp.a_eq = {{1}};
  lp.b_eq = {-1};  // x = -1 with x >= 0
  EXPECT_EQ(SolveLp(lp).status, LpStatus::kInfeasible);
}

TEST(SimplexTest, UnboundedIsReported) {
  LinearProgram lp;
  lp.num_vars = 2;
  lp.c = {-1, 0};
  lp.a_ub = {{-1, 1}};
  lp.b_ub = {1};
  EXPECT_EQ(SolveLp(lp).status, LpStatus::kUnbounded);
}

TEST(SimplexTest, DegenerateVertexTerminates) {
  LinearProgram lp;
  lp.num_vars = 2;
  lp.c = {-1, -1};
  lp.a_ub = {{1, 0}, {0, 1}, {1, 1}, {1, 1}};
  lp.b_ub = {1, 1, 1, 1};
  const LpResult r = SolveLp(lp);
  ASSERT_EQ(r.status, LpStatus::kOptimal);
  EXPECT_NEAR(r.objective, -1.0, 1e-9);
}

TEST(SimplexTest, RandomFeasibleProgramsSatisfyConstraints) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    LinearProgram lp;
    lp.num_vars = 5;
    for (int j = 0; j < 5; ++j) lp.c.push_back(-u(rng));
    for (int i = 0; i < 4; ++i) {
      std::vector<double> row;
      for (int j = 0; j < 5; ++j) row.push_back(u(rng) + 0.1);
      lp.a_ub.push_back(row);
      lp.b_ub.push_back(1.0 + u(rng));
    }
    const LpResult r = SolveLp(lp);
    ASSERT_EQ(r.status, LpStatus::kOptimal);
    for (int i = 0; i < 4; ++i) {
      double lhs = 0.0;
      for (int j = 0; j < 5; ++j) lhs += lp.a_ub[i][j] * r.x[j];
      EXPECT_LE(lhs, lp.b_ub[i] + 1e-9);
    }
    for (double x : r.x) EXPECT_GE(x, -1e-12);
  }
}

}  // namespace
}  // namespace builderbench
