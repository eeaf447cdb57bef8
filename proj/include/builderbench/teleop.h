#ifndef BUILDERBENCH_TELEOP_H_
#define BUILDERBENCH_TELEOP_H_

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "builderbench/env.h"
#include "builderbench/trajectory.h"

namespace builderbench {

inline constexpr int kTeleopProtocolVersion = 1;

struct HelloMsg {
  int version = kTeleopProtocolVersion;
  std::string server;  // empty in client hellos
};

struct TaskSummary {
  std::string name;
  int n = 0;
  std::vector<Vec3> targets;
  std::vector<std::string> tags;
};

// Request (empty tasks) and reply share the kind.
struct ListTasksMsg {
  std::vector<TaskSummary> tasks;
};

struct ResetMsg {
  std::string task;
  uint64_t seed = 0;
};

struct ActionMsg {
  Action a{};
};

struct CubeState {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
};

struct StateMsg {
  int t = 0;
  int horizon = 0;
  std::string task;
  Vec3 gripper_position = Vec3::Zero();
  double gripper_yaw = 0.0;
  double finger_width = 0.0;
  std::optional<int> held_cube;
  std::vector<CubeState> cubes;
  std::vector<Vec3> targets;
  std::vector<double> distances;
  double reward = 0.0;
  bool success = false;
  bool done = false;
};

struct EventMsg {
  std::string name;
  std::string detail;
};

struct RecordMsg {
  bool on = false;
};

struct ErrorMsg {
  std::string code;
  std::string msg;
};

using TeleopPayload = std::variant<HelloMsg, ListTasksMsg, ResetMsg, ActionMsg, StateMsg,
                                   EventMsg, RecordMsg, ErrorMsg>;

struct TeleopMessage {
  int64_t seq = 0;
  TeleopPayload payload;

  std::string kind() const;
};

// Canonical JSON text: compact, keys sorted, numbers in shortest
// round-trip form. Decode ignores unknown fields and throws ParseError on
// missing or ill-typed ones.
std::string EncodeMessage(const TeleopMessage& m);
TeleopMessage DecodeMessage(std::string_view text);

struct TeleopOptions {
  std::string host = "127.0.0.1";
  int port = 8787;
  int tick_ms = 50;
  std::string default_task = "cube-1-task1";
  std::string record_dir = ".";
  std::string static_dir;  // served for plain HTTP GETs when set
  PhysicsParams physics;
  RewardConfig reward;
};

// Transport-free session state machine. The server feeds it inbound text
// messages and calls Tick() once per period.
class TeleopSession {
 public:
  explicit TeleopSession(TeleopOptions options);
  ~TeleopSession();

  // Replies to send right away (hello, task list, events, errors). Actions
  // are buffered; the newest one is applied at the next tick.
  std::vector<std::string> HandleText(std::string_view text);

  // Advances the env by at most one control step and returns the state
  // message plus any events. Paused while disconnected or after the episode
  // ended; the state is still reported.
  std::vector<std::string> Tick();

  // A new connection restarts the sequence numbers in both directions.
  void SetConnected(bool connected);
  bool connected() const { return connected_; }
  const Env& env() const { return *env_; }
  bool recording() const { return writer_ != nullptr; }
  // Paths of every log written so far.
  const std::vector<std::string>& recordings() const { return recordings_; }

 private:
  std::string Send(TeleopPayload payload);
  std::vector<std::string> DoReset(const std::string& task, uint64_t seed);
  std::vector<std::string> StartRecording();
  std::vector<std::string> StopRecording();
  StateMsg MakeState(double reward, bool done) const;

  TeleopOptions options_;
  std::unique_ptr<Env> env_;
  std::optional<TaskSpec> task_;
  int64_t out_seq_ = 0;
  std::optional<int64_t> last_in_seq_;
  std::optional<Action> pending_;
  double hold_finger_ = 1.0;
  double last_reward_ = 0.0;
  bool done_ = false;
  bool connected_ = true;
  std::vector<TrajectoryFrame> history_;
  std::unique_ptr<TrajectoryWriter> writer_;
  std::vector<std::string> recordings_;
  int record_counter_ = 0;
};

// Accepts one client at a time and runs its session at the tick rate until
// `stop` becomes true. `bound_port` receives the listening port (useful
// with port 0). Throws ConfigError when binding fails.
void ServeTeleop(const TeleopOptions& options, const std::atomic<bool>& stop,
                 std::atomic<int>* bound_port = nullptr);

}  // namespace builderbench

#endif  // BUILDERBENCH_TELEOP_H_
