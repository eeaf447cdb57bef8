#ifndef BUILDERBENCH_TRAJECTORY_H_
#define BUILDERBENCH_TRAJECTORY_H_

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "builderbench/env.h"

namespace builderbench {

inline constexpr int kTrajectoryFormatVersion = 1;

// Everything needed to rebuild the episode's reset state. The task is
// embedded (name, start and target coordinates) so a log replays without
// the registry.
struct TrajectoryHeader {
  int format_version = kTrajectoryFormatVersion;
  int n = 1;
  std::optional<TaskSpec> task;
  std::vector<Vec3> targets;  // bound targets, may differ from the task's
  uint64_t seed = 0;
  uint64_t physics_hash = 0;
  Protocol protocol = Protocol::kSupervised;
  RewardConfig reward;
};

// One control step. Frame 0 is the reset state with a zero action.
struct TrajectoryFrame {
  int32_t t = 0;
  Action action{};
  std::vector<double> cube_poses;  // n x (position 3, quaternion w x y z)
  std::array<double, 5> gripper{};  // position 3, yaw, finger width
  double reward = 0.0;

  bool operator==(const TrajectoryFrame& o) const;
};

struct TrajectoryLog {
  TrajectoryHeader header;
  std::vector<TrajectoryFrame> frames;
};

TrajectoryFrame CaptureFrame(const Env& env, const Action& action, double reward);

// Header for an env that was just reset with `seed` (and `task`, if any).
TrajectoryHeader MakeHeader(const Env& env, const TaskSpec* task);

// Text header followed by fixed-size binary frames, appended and flushed
// one at a time.
class TrajectoryWriter {
 public:
  TrajectoryWriter(const std::string& path, const TrajectoryHeader& header);
  void Append(const TrajectoryFrame& frame);
  const std::string& path() const { return path_; }
  int frames() const { return frames_; }

 private:
  std::string path_;
  std::ofstream out_;
  int n_;
  int frames_ = 0;
};

// Throws ParseError on malformed files.
TrajectoryLog ReadTrajectory(const std::string& path);

struct ReplayResult {
  int frames = 0;
  bool success = false;  // at the final frame
  double total_reward = 0.0;
};

// Re-executes the logged actions from the seeded reset under `params` and
// compares every frame bit for bit. Throws HashMismatch when `params`
// differs from the recording, DivergenceAt(t) at the first differing frame.
ReplayResult Replay(const TrajectoryLog& log, const PhysicsParams& params = {});

}  // namespace builderbench

#endif  // BUILDERBENCH_TRAJECTORY_H_
