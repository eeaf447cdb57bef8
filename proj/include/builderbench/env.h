#ifndef BUILDERBENCH_ENV_H_
#define BUILDERBENCH_ENV_H_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "builderbench/physics.h"
#include "builderbench/reward.h"
#include "builderbench/tasks.h"

namespace builderbench {

class ThreadPool;

enum class Protocol { kSupervised, kSelfSupervised };
std::string ToString(Protocol p);
Protocol ParseProtocol(const std::string& s);

// 100 + 100 n (supervised) or 500 n (self-supervised). Throws InvalidN
// outside [1, 9].
int EpisodeLength(Protocol protocol, int n);

inline constexpr int kMaxCubes = 9;
inline int ObservationSize(int n) { return 11 + 13 * n; }

// (dx, dy, dz, dyaw, finger); each component lives in [-1, 1].
using Action = std::array<double, 5>;

// Components clamped to [-1, 1]; NaN becomes 0.
Action ClampAction(const Action& a);

// Per-step scaling of the action into setpoint deltas.
inline constexpr double kMoveScale = 0.01;  // m per control step
inline constexpr double kYawScale = 0.1;    // rad per control step; yaw limited to [-pi, pi]

// Finger command -1 -> closed (0 m), +1 -> fully open (0.085 m).
inline double FingerWidthFromCommand(double cmd) { return 0.5 * (cmd + 1.0) * kMaxFingerWidth; }

using Observation = std::vector<double>;

struct StepInfo {
  std::vector<int> mapping;        // target -> cube under the reward matching
  std::vector<double> distances;   // per target, same matching
  bool success = false;            // invariant matching, strict 2 cm
  std::optional<int> held_cube;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

struct EnvConfig {
  Protocol protocol = Protocol::kSupervised;
  int n = 1;
  RewardConfig reward;
  PhysicsParams physics;
};

class Env {
 public:
  explicit Env(EnvConfig config);

  // Resets to the home pose. Cubes start at the task's start positions when
  // a task is given; otherwise (and for cubes beyond task.n) they start in
  // the default row, jittered by up to 2 mm in x and y under the
  // self-supervised protocol. Throws TaskTooLarge when task.n > n.
  Observation Reset(uint64_t seed, const TaskSpec* task = nullptr);

  // Replaces the bound targets without touching the physical state. Used
  // for self-supervised goals. Throws TaskTooLarge when k > n.
  void SetTargets(std::vector<Vec3> targets);

  StepResult Step(const Action& action);

  Observation Observe() const;
  StepInfo Info() const;
  double CurrentReward() const;

  const WorldState& world() const { return world_; }
  WorldState& mutable_world() { return world_; }
  const EnvConfig& config() const { return config_; }
  int n() const { return config_.n; }
  int horizon() const { return horizon_; }
  int t() const { return world_.t; }
  bool has_targets() const { return has_targets_; }
  const std::vector<Vec3>& targets() const { return targets_; }
  const std::string& task_name() const { return task_name_; }
  uint64_t seed() const { return seed_; }

 private:
  EnvConfig config_;
  int horizon_;
  WorldState world_;
  std::vector<Vec3> targets_;
  bool has_targets_ = false;
  std::string task_name_;
  uint64_t seed_ = 0;
};

// Steps envs[i] with actions[i]. Results equal a sequential loop; the pool
// (when given) spreads envs over its threads. Throws LengthMismatch.
std::vector<StepResult> BatchStep(std::span<Env> envs, std::span<const Action> actions,
                                  ThreadPool* pool = nullptr);

// Flattened (x, y, z) of every target, the goal input of a policy.
std::vector<double> FlattenTargets(std::span<const Vec3> targets);

}  // namespace builderbench

#endif  // BUILDERBENCH_ENV_H_
