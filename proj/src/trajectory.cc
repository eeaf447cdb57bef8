#include "builderbench/trajectory.h"

#include <charconv>
#include <cstring>
#include <sstream>

namespace builderbench {
namespace {

constexpr const char* kMagic = "builderbench-trajectory";
constexpr const char* kEndHeader = "end_header";

std::string Num(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

std::string Vecs(const std::vector<Vec3>& vs) {
  std::string s = std::to_string(vs.size());
  for (const Vec3& v : vs) s += " " + Num(v.x()) + " " + Num(v.y()) + " " + Num(v.z());
  return s;
}

std::vector<Vec3> ParseVecs(std::istringstream& in, const std::string& key) {
  size_t count = 0;
  if (!(in >> count) || count > 64) throw ParseError("trajectory header: bad " + key);
  std::vector<Vec3> vs(count);
  for (Vec3& v : vs) {
    if (!(in >> v.x() >> v.y() >> v.z())) throw ParseError("trajectory header: bad " + key);
  }
  return vs;
}

size_t FrameDoubles(int n) { return 5 + 7 * static_cast<size_t>(n) + 5 + 1; }

}  // namespace

bool TrajectoryFrame::operator==(const TrajectoryFrame& o) const {
  // Bitwise comparison: -0.0 vs 0.0 and NaN payloads count as differences.
  auto same = [](const double* a, const double* b, size_t n) {
    return std::memcmp(a, b, n * sizeof(double)) == 0;
  };
  return t == o.t && same(action.data(), o.action.data(), action.size()) &&
         cube_poses.size() == o.cube_poses.size() &&
         same(cube_poses.data(), o.cube_poses.data(), cube_poses.size()) &&
         same(gripper.data(), o.gripper.data(), gripper.size()) && same(&reward, &o.reward, 1);
}

TrajectoryFrame CaptureFrame(const Env& env, const Action& action, double reward) {
  TrajectoryFrame f;
  const WorldState& w = env.world();
  f.t = w.t;
  f.action = action;
  for (const RigidBody& c : w.cubes) {
    f.cube_poses.insert(f.cube_poses.end(), {c.position.x(), c.position.y(), c.position.z(),
                                             c.orientation.w(), c.orientation.x(),
                                             c.orientation.y(), c.orientation.z()});
  }
  const GripperState& g = w.gripper;
  f.gripper = {g.position.x(), g.position.y(), g.position.z(), g.yaw, g.finger_width};
  f.reward = reward;
  return f;
}

TrajectoryHeader MakeHeader(const Env& env, const TaskSpec* task) {
  TrajectoryHeader h;
  h.n = env.n();
  if (task) h.task = *task;
  h.targets = env.targets();
  h.seed = env.seed();
  h.physics_hash = env.config().physics.Hash();
  h.protocol = env.config().protocol;
  h.reward = env.config().reward;
  return h;
}

TrajectoryWriter::TrajectoryWriter(const std::string& path, const TrajectoryHeader& h)
    : path_(path), out_(path, std::ios::binary | std::ios::trunc), n_(h.n) {
  if (!out_) throw ConfigError("cannot write trajectory " + path);
  out_ << kMagic << " " << h.format_version << "\n";
  out_ << "n " << h.n << "\n";
  if (h.task) {
    out_ << "task " << h.task->name << "\n";
    out_ << "task_n " << h.task->n << "\n";
    out_ << "start " << Vecs(h.task->start_positions) << "\n";
    out_ << "task_targets " << Vecs(h.task->target_positions) << "\n";
  }
  out_ << "targets " << Vecs(h.targets) << "\n";
  out_ << "seed " << h.seed << "\n";
  out_ << "physics_hash " << h.physics_hash << "\n";
  out_ << "protocol " << ToString(h.protocol) << "\n";
  out_ << "reward " << ToString(h.reward.shape) << " " << ToString(h.reward.matching) << " "
       << Num(h.reward.threshold) << "\n";
  out_ << kEndHeader << "\n";
  out_.flush();
}

void TrajectoryWriter::Append(const TrajectoryFrame& f) {
  std::vector<double> buf;
  buf.reserve(FrameDoubles(n_));
  buf.insert(buf.end(), f.action.begin(), f.action.end());
  buf.insert(buf.end(), f.cube_poses.begin(), f.cube_poses.end());
  buf.insert(buf.end(), f.gripper.begin(), f.gripper.end());
  buf.push_back(f.reward);
  if (buf.size() != FrameDoubles(n_)) throw LengthMismatch("frame does not match header n");
  out_.write(reinterpret_cast<const char*>(&f.t), sizeof(f.t));
  out_.write(reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(double));
  out_.flush();
  ++frames_;
}

TrajectoryLog ReadTrajectory(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open trajectory " + path);
  TrajectoryLog log;
  TrajectoryHeader& h = log.header;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  {
    std::istringstream ls(line);
    std::string magic;
    ls >> magic >> h.format_version;
    if (magic != kMagic) throw ParseError(path + ": not a trajectory log");
    if (h.format_version != kTrajectoryFormatVersion) {
      throw ParseError(path + ": unsupported format_version " + std::to_string(h.format_version));
    }
  }
  TaskSpec task;
  bool has_task = false;
  int line_no = 1;
  for (;;) {
    if (!std::getline(in, line)) throw ParseError(path + ": header not terminated");
    ++line_no;
    if (line == kEndHeader) break;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    try {
      if (key == "n") {
        ls >> h.n;
      } else if (key == "task") {
        ls >> task.name;
        has_task = true;
      } else if (key == "task_n") {
        ls >> task.n;
      } else if (key == "start") {
        task.start_positions = ParseVecs(ls, key);
      } else if (key == "task_targets") {
        task.target_positions = ParseVecs(ls, key);
      } else if (key == "targets") {
        h.targets = ParseVecs(ls, key);
      } else if (key == "seed") {
        ls >> h.seed;
      } else if (key == "physics_hash") {
        ls >> h.physics_hash;
      } else if (key == "protocol") {
        std::string p;
        ls >> p;
        h.protocol = ParseProtocol(p);
      } else if (key == "reward") {
        std::string shape, matching;
        ls >> shape >> matching >> h.reward.threshold;
        h.reward.shape = ParseRewardShape(shape);
        h.reward.matching = ParseMatching(matching);
      }
    } catch (const Error& e) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (ls.fail()) throw ParseError(path + ":" + std::to_string(line_no) + ": bad '" + key + "'");
  }
  if (h.n < 1 || h.n > kMaxCubes) throw ParseError(path + ": bad n");
  if (has_task) h.task = task;
  const size_t doubles = FrameDoubles(h.n);
  std::vector<double> buf(doubles);
  for (;;) {
    TrajectoryFrame f;
    in.read(reinterpret_cast<char*>(&f.t), sizeof(f.t));
    if (in.gcount() == 0) break;
    in.read(reinterpret_cast<char*>(buf.data()), doubles * sizeof(double));
    if (!in) throw ParseError(path + ": truncated frame " + std::to_string(log.frames.size()));
    size_t i = 0;
    for (double& a : f.action) a = buf[i++];
    f.cube_poses.assign(buf.begin() + i, buf.begin() + i + 7 * h.n);
    i += 7 * h.n;
    for (double& g : f.gripper) g = buf[i++];
    f.reward = buf[i];
    log.frames.push_back(std::move(f));
  }
  return log;
}

ReplayResult Replay(const TrajectoryLog& log, const PhysicsParams& params) {
  const TrajectoryHeader& h = log.header;
  if (params.Hash() != h.physics_hash) {
    throw HashMismatch("physics parameters differ from the recording (hash " +
                       std::to_string(params.Hash()) + " vs " + std::to_string(h.physics_hash) +
                       ")");
  }
  EnvConfig cfg;
  cfg.protocol = h.protocol;
  cfg.n = h.n;
  cfg.reward = h.reward;
  cfg.physics = params;
  Env env(cfg);
  env.Reset(h.seed, h.task ? &*h.task : nullptr);
  if (!h.targets.empty()) env.SetTargets(h.targets);
  ReplayResult r;
  if (log.frames.empty()) return r;
  if (!(CaptureFrame(env, Action{}, 0.0) == log.frames[0])) throw DivergenceAt(0);
  r.frames = 1;
  for (size_t i = 1; i < log.frames.size(); ++i) {
    const TrajectoryFrame& want = log.frames[i];
    StepResult s = env.Step(want.action);
    if (!(CaptureFrame(env, want.action, s.reward) == want)) throw DivergenceAt(want.t);
    r.total_reward += s.reward;
    r.success = s.info.success;
    ++r.frames;
  }
  return r;
}

}  // namespace builderbench
