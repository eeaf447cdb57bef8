#ifndef BUILDERBENCH_TASKS_H_
#define BUILDERBENCH_TASKS_H_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "builderbench/common.h"
#include "builderbench/physics.h"
#include "builderbench/reward.h"
#include "builderbench/stability.h"

namespace builderbench {

// One cube of a known solution configuration. Held cubes are carried by the
// gripper and are left out of the stability check.
struct SolutionCube {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  bool held = false;
};

struct TaskSpec {
  std::string name;
  int n = 0;  // cubes in the environment
  std::vector<Vec3> start_positions;   // n entries
  std::vector<Vec3> target_positions;  // k entries
  std::vector<std::string> tags;
  std::vector<SolutionCube> solution;  // empty, or n entries

  int k() const { return static_cast<int>(target_positions.size()); }
  bool HasTag(const std::string& tag) const;
  bool operator==(const TaskSpec&) const;
};

inline constexpr const char* kTagRequiresHold = "requires-hold";
inline constexpr const char* kTagRequiresRotation = "requires-rotation";

struct TaskFile {
  int format_version = 1;
  std::vector<TaskSpec> tasks;
};

inline constexpr int kTaskFormatVersion = 1;

// The five case-study tasks with their published coordinates, the two
// single-cube tasks, and generated tower/row/pyramid/bridge families.
const std::vector<TaskSpec>& BuiltinRegistry();

// nullptr when absent.
const TaskSpec* FindTask(std::span<const TaskSpec> tasks, const std::string& name);

// Generated families. Start cubes sit in the default reset row.
TaskSpec GenerateTower(int n);
TaskSpec GenerateRow(int n);
TaskSpec GeneratePyramid(int n);  // n in {1, 3, 6}
TaskSpec GenerateBridge(int n);   // odd n >= 3

// Default start row: x = 0.05, y spaced 0.08 m centred on 0, z = 0.02.
std::vector<Vec3> DefaultStartRow(int n);

std::vector<Vec3> CubePositions(const WorldState& world);

// Cube-to-target matching and per-target distances under `matching`.
Assignment TaskAssignment(const WorldState& world, const TaskSpec& task,
                          Matching matching = Matching::kInvariant);

// Every assigned distance (minimum-cost assignment) is strictly below 2 cm.
bool Success(const WorldState& world, const TaskSpec& task);
bool Success(std::span<const Vec3> cubes, std::span<const Vec3> targets);

double DenseReward(const WorldState& world, const TaskSpec& task, const RewardConfig& config);
double SparseReward(const WorldState& world, const TaskSpec& task, const RewardConfig& config);

struct ValidationReport {
  std::string task;
  bool invariants_ok = true;
  std::vector<std::string> errors;
  std::vector<std::string> flags;
  // Verdict for the targets at identity orientation; absent when they
  // overlap (the packing case).
  std::optional<StabilityVerdict> target_verdict;
  // Verdict for the known solution, when the task carries one.
  std::optional<StabilityVerdict> solution_verdict;
  bool solution_realizes_targets = true;
  bool stable = false;
  bool ok = false;

  bool HasFlag(const std::string& flag) const;
};

// Checks invariants and runs stability classification. Never throws.
ValidationReport ValidateTask(const TaskSpec& task, const StabilityOptions& options = {});

// Task files: YAML text, lengths in meters written in shortest round-trip
// decimal form. Throws ParseError with line and field diagnostics.
TaskFile LoadTasks(const std::string& path);
TaskFile ParseTasks(const std::string& text, const std::string& source = "<string>");
void SaveTasks(const std::string& path, const TaskFile& file);
std::string SerializeTasks(const TaskFile& file);

}  // namespace builderbench

#endif  // BUILDERBENCH_TASKS_H_
