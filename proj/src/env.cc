#include "builderbench/env.h"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "builderbench/thread_pool.h"

namespace builderbench {
namespace {

constexpr double kStartJitter = 0.002;

// Uniform double in [0, 1) from the top 53 bits; identical on every
// standard library, unlike std::uniform_real_distribution.
double Uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void Append(Observation& obs, const Vec3& v) {
  obs.push_back(v.x());
  obs.push_back(v.y());
  obs.push_back(v.z());
}

void Append(Observation& obs, const Quat& q) {
  obs.push_back(q.w());
  obs.push_back(q.x());
  obs.push_back(q.y());
  obs.push_back(q.z());
}

}  // namespace

std::string ToString(Protocol p) {
  return p == Protocol::kSupervised ? "supervised" : "self_supervised";
}

Protocol ParseProtocol(const std::string& s) {
  if (s == "supervised") return Protocol::kSupervised;
  if (s == "self_supervised" || s == "self-supervised") return Protocol::kSelfSupervised;
  throw ConfigError("unknown protocol '" + s + "'");
}

int EpisodeLength(Protocol protocol, int n) {
  if (n < 1 || n > kMaxCubes) throw InvalidN("n must be in [1, 9], got " + std::to_string(n));
  return protocol == Protocol::kSupervised ? 100 + 100 * n : 500 * n;
}

Action ClampAction(const Action& a) {
  Action out;
  for (size_t i = 0; i < a.size(); ++i) out[i] = std::isnan(a[i]) ? 0.0 : std::clamp(a[i], -1.0, 1.0);
  return out;
}

std::vector<double> FlattenTargets(std::span<const Vec3> targets) {
  std::vector<double> g;
  g.reserve(3 * targets.size());
  for (const Vec3& t : targets) {
    g.push_back(t.x());
    g.push_back(t.y());
    g.push_back(t.z());
  }
  return g;
}

Env::Env(EnvConfig config)
    : config_(std::move(config)), horizon_(EpisodeLength(config_.protocol, config_.n)) {
  Reset(0);
}

Observation Env::Reset(uint64_t seed, const TaskSpec* task) {
  if (task && task->n > config_.n) {
    throw TaskTooLarge("task '" + task->name + "' needs " + std::to_string(task->n) +
                       " cubes, env has " + std::to_string(config_.n));
  }
  if (task && task->k() > config_.n) throw TaskTooLarge("task has more targets than cubes");
  seed_ = seed;
  world_ = WorldState{};
  world_.rng.seed(seed);
  const bool jitter = config_.protocol == Protocol::kSelfSupervised;
  const std::vector<Vec3> row = DefaultStartRow(config_.n);
  for (int i = 0; i < config_.n; ++i) {
    Vec3 p;
    if (task && i < task->n) {
      p = task->start_positions[i];
    } else if (task) {
      // Spare cubes beyond the task's count wait behind the gripper home.
      p = Vec3(-0.05, row[i].y(), kCubeHalfExtent);
    } else {
      p = row[i];
    }
    if (jitter) {
      p.x() += kStartJitter * (2.0 * Uniform01(world_.rng) - 1.0);
      p.y() += kStartJitter * (2.0 * Uniform01(world_.rng) - 1.0);
    }
    world_.cubes.push_back(RigidBody::Cube(p));
  }
  if (task) {
    targets_ = task->target_positions;
    has_targets_ = true;
    task_name_ = task->name;
  } else {
    targets_.clear();
    has_targets_ = false;
    task_name_.clear();
  }
  return Observe();
}

void Env::SetTargets(std::vector<Vec3> targets) {
  if (static_cast<int>(targets.size()) > config_.n) {
    throw TaskTooLarge("more targets than cubes");
  }
  targets_ = std::move(targets);
  has_targets_ = true;
}

Observation Env::Observe() const {
  Observation obs;
  obs.reserve(ObservationSize(config_.n));
  const GripperState& g = world_.gripper;
  Append(obs, g.position);
  Append(obs, g.Orientation());
  Append(obs, g.linear_velocity);
  obs.push_back(g.finger_width);
  for (const RigidBody& c : world_.cubes) {
    Append(obs, c.position);
    Append(obs, c.orientation);
    Append(obs, c.linear_velocity);
    Append(obs, c.angular_velocity);
  }
  return obs;
}

StepInfo Env::Info() const {
  StepInfo info;
  info.held_cube = world_.gripper.held_cube;
  if (!has_targets_) return info;
  const std::vector<Vec3> cubes = CubePositions(world_);
  const Assignment a = MatchTargets(cubes, targets_, config_.reward.matching);
  info.mapping = a.mapping;
  info.distances = a.distances;
  info.success = Success(cubes, targets_);
  return info;
}

double Env::CurrentReward() const {
  if (!has_targets_) return 0.0;
  const std::vector<Vec3> cubes = CubePositions(world_);
  return Reward(cubes, targets_, config_.reward);
}

StepResult Env::Step(const Action& raw) {
  if (world_.t >= horizon_) {
    throw EpisodeOver("step at t=" + std::to_string(world_.t) + " with horizon " +
                      std::to_string(horizon_));
  }
  const Action a = ClampAction(raw);
  GripperSetpoints& sp = world_.gripper.setpoints;
  sp.position += kMoveScale * Vec3(a[0], a[1], a[2]);
  sp.position.x() = std::clamp(sp.position.x(), -kWorkspaceXY, kWorkspaceXY);
  sp.position.y() = std::clamp(sp.position.y(), -kWorkspaceXY, kWorkspaceXY);
  sp.position.z() = std::clamp(sp.position.z(), kWorkspaceZMin, kWorkspaceZMax);
  sp.yaw = std::clamp(sp.yaw + kYawScale * a[3], -std::numbers::pi, std::numbers::pi);
  sp.finger_width = FingerWidthFromCommand(a[4]);

  StepPhysicsInPlace(world_, config_.physics);
  UpdateGrasp(world_);
  ++world_.t;

  StepResult r;
  r.observation = Observe();
  r.info = Info();
  if (has_targets_) {
    r.reward = config_.reward.shape == RewardShape::kDense
                   ? DenseFromDistances(r.info.distances)
                   : SparseFromDistances(r.info.distances, config_.reward.threshold);
  }
  r.done = world_.t == horizon_;
  return r;
}

std::vector<StepResult> BatchStep(std::span<Env> envs, std::span<const Action> actions,
                                  ThreadPool* pool) {
  if (envs.size() != actions.size()) {
    throw LengthMismatch(std::to_string(envs.size()) + " envs but " +
                         std::to_string(actions.size()) + " actions");
  }
  std::vector<StepResult> out(envs.size());
  auto one = [&](size_t i) { out[i] = envs[i].Step(actions[i]); };
  if (pool) {
    pool->ParallelFor(envs.size(), one);
  } else {
    for (size_t i = 0; i < envs.size(); ++i) one(i);
  }
  return out;
}

}  // namespace builderbench
