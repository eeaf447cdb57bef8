#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "builderbench/env.h"
#include "builderbench/tasks.h"
#include "builderbench/thread_pool.h"

namespace builderbench {
namespace {

Env MakeEnv(int n, Protocol p = Protocol::kSupervised) {
  EnvConfig c;
  c.n = n;
  c.protocol = p;
  return Env(c);
}

bool BitEqual(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TEST(EpisodeTest, LengthsFollowCubeCount) {
  EXPECT_EQ(EpisodeLength(Protocol::kSupervised, 5), 600);
  EXPECT_EQ(EpisodeLength(Protocol::kSelfSupervised, 3), 1500);
  EXPECT_EQ(EpisodeLength(Protocol::kSupervised, 1), 200);
  EXPECT_THROW(EpisodeLength(Protocol::kSupervised, 0), InvalidN);
  EXPECT_THROW(EpisodeLength(Protocol::kSupervised, 10), InvalidN);
  for (int n = 1; n <= 9; ++n) {
    EXPECT_EQ(EpisodeLength(Protocol::kSupervised, n), 100 + 100 * n);
    EXPECT_EQ(EpisodeLength(Protocol::kSelfSupervised, n), 500 * n);
  }
}

TEST(ObservationTest, LengthAndLayout) {
  for (int n = 1; n <= 9; ++n) {
    Env env = MakeEnv(n);
    const Observation obs = env.Reset(1);
    ASSERT_EQ(obs.size(), static_cast<size_t>(11 + 13 * n));
    EXPECT_DOUBLE_EQ(obs[2], 0.25);           // gripper z
    EXPECT_DOUBLE_EQ(obs[3], 1.0);            // gripper quaternion w
    EXPECT_DOUBLE_EQ(obs[10], kMaxFingerWidth);
    EXPECT_DOUBLE_EQ(obs[11], 0.05);          // first cube x
    EXPECT_DOUBLE_EQ(obs[13], 0.02);          // first cube z
    EXPECT_DOUBLE_EQ(obs[14], 1.0);           // first cube quaternion w
  }
}

TEST(ResetTest, TBlockStartPositions) {
  Env env = MakeEnv(3);
  env.Reset(0, FindTask(BuiltinRegistry(), "t_block"));
  const std::vector<Vec3> want = {{0.05, -0.08, 0.02}, {0.05, 0.0, 0.02}, {0.05, 0.08, 0.02}};
  for (int i = 0; i < 3; ++i) EXPECT_EQ(env.world().cubes[i].position, want[i]);
  EXPECT_EQ(env.world().gripper.position, Vec3(0, 0, 0.25));
  EXPECT_EQ(env.t(), 0);
}

TEST(ResetTest, OverhangStartPositions) {
  Env env = MakeEnv(5);
  const TaskSpec* t = FindTask(BuiltinRegistry(), "maximum_overhang");
  env.Reset(0, t);
  for (int i = 0; i < 5; ++i) EXPECT_EQ(env.world().cubes[i].position, t->start_positions[i]);
}

TEST(ResetTest, TooLargeTaskIsRejected) {
  Env env = MakeEnv(2);
  EXPECT_THROW(env.Reset(0, FindTask(BuiltinRegistry(), "t_block")), TaskTooLarge);
}

TEST(ResetTest, SelfSupervisedJitterIsSeeded) {
  Env a = MakeEnv(1, Protocol::kSelfSupervised);
  Env b = MakeEnv(1, Protocol::kSelfSupervised);
  const Observation oa = a.Reset(42), ob = b.Reset(42);
  EXPECT_TRUE(BitEqual(oa, ob));
  EXPECT_NEAR(oa[11], 0.05, 0.002 + 1e-15);
  EXPECT_NEAR(oa[12], 0.0, 0.002 + 1e-15);
  EXPECT_NE(a.Reset(43)[11], oa[11]);
}

TEST(StepTest, ZeroActionHoldsHome) {
  Env env = MakeEnv(1);
  env.Reset(0);
  for (int i = 0; i < 20; ++i) env.Step({0, 0, 0, 0, 1});
  EXPECT_LT((env.world().gripper.position - Vec3(0, 0, 0.25)).norm(), 1e-4);
}

TEST(StepTest, ActionsAreClamped) {
  Env a = MakeEnv(1), b = MakeEnv(1);
  a.Reset(3);
  b.Reset(3);
  for (int i = 0; i < 30; ++i) {
    const StepResult ra = a.Step({5, -7, 2, 9, -3});
    const StepResult rb = b.Step({1, -1, 1, 1, -1});
    ASSERT_TRUE(BitEqual(ra.observation, rb.observation));
  }
  const Action nan = ClampAction({std::nan(""), 0, 0, 0, 0});
  EXPECT_EQ(nan[0], 0.0);
}

TEST(StepTest, DoneExactlyAtHorizon) {
  Env env = MakeEnv(1);
  env.Reset(0);
  for (int t = 1; t <= env.horizon(); ++t) {
    const StepResult r = env.Step({0, 0, 0, 0, 1});
    ASSERT_EQ(r.done, t == env.horizon()) << t;
  }
  EXPECT_THROW(env.Step({0, 0, 0, 0, 1}), EpisodeOver);
}

TEST(StepTest, GripperStaysInWorkspace) {
  Env env = MakeEnv(1);
  env.Reset(0);
  for (int t = 0; t < env.horizon(); ++t) {
    env.Step({1, -1, 1, 0, 0});
    const Vec3& p = env.world().gripper.position;
    ASSERT_LE(std::abs(p.x()), kWorkspaceXY + 1e-6);
    ASSERT_LE(std::abs(p.y()), kWorkspaceXY + 1e-6);
    ASSERT_LE(p.z(), kWorkspaceZMax + 1e-6);
  }
}

TEST(StepTest, GraspThenRelease) {
  Env env = MakeEnv(1);
  env.Reset(0, FindTask(BuiltinRegistry(), "cube-1-task1"));
  // Move over the cube at (0.05, 0, 0.02) and descend.
  for (int i = 0; i < 5; ++i) env.Step({1, 0, 0, 0, 1});
  for (int i = 0; i < 23; ++i) env.Step({0, 0, -1, 0, 1});
  for (int i = 0; i < 10; ++i) env.Step({0, 0, 0, 0, 1});
  bool held = false;
  for (int i = 0; i < 10; ++i) held = held || env.Step({0, 0, 0, 0, -1}).info.held_cube.has_value();
  EXPECT_TRUE(held);
  StepResult r;
  for (int i = 0; i < 5; ++i) r = env.Step({0, 0, 0, 0, 1});
  EXPECT_FALSE(r.info.held_cube.has_value());
}

TEST(StepTest, RewardIsZeroWithoutTargets) {
  Env env = MakeEnv(1);
  env.Reset(0);
  EXPECT_EQ(env.Step({0, 0, 0, 0, 1}).reward, 0.0);
}

TEST(StepTest, RandomRunsReplayBitExactly) {
  auto run = [](uint64_t seed) {
    Env env = MakeEnv(3);
    std::vector<double> trace = env.Reset(seed);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < env.horizon(); ++t) {
      const StepResult r = env.Step({u(rng), u(rng), u(rng), u(rng), u(rng)});
      trace.insert(trace.end(), r.observation.begin(), r.observation.end());
    }
    return trace;
  };
  EXPECT_TRUE(BitEqual(run(5), run(5)));
}

TEST(BatchTest, MatchesSequentialStepping) {
  const int count = 8;
  std::vector<Env> seq, par;
  std::vector<Action> actions;
  for (int i = 0; i < count; ++i) {
    seq.push_back(MakeEnv(2));
    par.push_back(MakeEnv(2));
    seq.back().Reset(i);
    par.back().Reset(i);
    actions.push_back({0.1 * i - 0.4, 0.3, -1, 0.2, i % 2 ? 1.0 : -1.0});
  }
  ThreadPool pool(3);
  for (int step = 0; step < 20; ++step) {
    const auto batch = BatchStep(par, actions, &pool);
    for (int i = 0; i < count; ++i) {
      const StepResult r = seq[i].Step(actions[i]);
      ASSERT_TRUE(BitEqual(r.observation, batch[i].observation));
      ASSERT_EQ(r.reward, batch[i].reward);
    }
  }
}

TEST(BatchTest, IdenticalPairsGiveIdenticalResults) {
  std::vector<Env> envs = {MakeEnv(1), MakeEnv(1)};
  envs[0].Reset(7);
  envs[1].Reset(7);
  const std::vector<Action> actions(2, Action{0.5, -0.5, -1, 0, 0});
  const auto r = BatchStep(envs, actions);
  EXPECT_TRUE(BitEqual(r[0].observation, r[1].observation));
}

TEST(BatchTest, LengthMismatchThrows) {
  std::vector<Env> envs = {MakeEnv(1)};
  envs[0].Reset(0);
  const std::vector<Action> actions(2, Action{});
  EXPECT_THROW(BatchStep(envs, actions), LengthMismatch);
}

TEST(ThreadPoolTest, CoversEveryIndexAndRethrows) {
  ThreadPool pool(4);
  std::vector<int> hits(1000, 0);
  pool.ParallelFor(hits.size(), [&](size_t i) { hits[i]++; });
  for (int h : hits) EXPECT_EQ(h, 1);
  EXPECT_THROW(pool.ParallelFor(10, [](size_t i) {
    if (i == 5) throw std::runtime_error("boom");
  }),
               std::runtime_error);
}

}  // namespace
}  // namespace builderbench
