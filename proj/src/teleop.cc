#include "builderbench/teleop.h"

#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "builderbench/websocket.h"

namespace builderbench {
namespace {

using nlohmann::json;

json VecJson(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json VecsJson(const std::vector<Vec3>& vs) {
  json a = json::array();
  for (const Vec3& v : vs) a.push_back(VecJson(v));
  return a;
}

template <typename T>
T Field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("field '") + key + "' has the wrong type");
  }
}

Vec3 VecFrom(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw ParseError(std::string(what) + " must have 3 numbers");
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    if (!j[k].is_number()) throw ParseError(std::string(what) + " must have 3 numbers");
    v[k] = j[k].get<double>();
  }
  return v;
}

std::vector<Vec3> VecsFrom(const json& j, const char* what) {
  if (!j.is_array()) throw ParseError(std::string(what) + " must be a list");
  std::vector<Vec3> out;
  for (const json& e : j) out.push_back(VecFrom(e, what));
  return out;
}

struct Encoder {
  json& j;
  void operator()(const HelloMsg& m) {
    j["kind"] = "hello";
    j["version"] = m.version;
    if (!m.server.empty()) j["server"] = m.server;
  }
  void operator()(const ListTasksMsg& m) {
    j["kind"] = "list_tasks";
    if (m.tasks.empty()) return;
    json tasks = json::array();
    for (const TaskSummary& t : m.tasks) {
      tasks.push_back({{"name", t.name}, {"n", t.n}, {"targets", VecsJson(t.targets)},
                       {"tags", t.tags}});
    }
    j["tasks"] = tasks;
  }
  void operator()(const ResetMsg& m) {
    j["kind"] = "reset";
    j["task"] = m.task;
    j["seed"] = m.seed;
  }
  void operator()(const ActionMsg& m) {
    j["kind"] = "action";
    j["a"] = m.a;
  }
  void operator()(const StateMsg& m) {
    j["kind"] = "state";
    j["t"] = m.t;
    j["H"] = m.horizon;
    j["task"] = m.task;
    j["gripper"] = {{"position", VecJson(m.gripper_position)},
                    {"yaw", m.gripper_yaw},
                    {"finger_width", m.finger_width},
                    {"held", m.held_cube ? json(*m.held_cube) : json(nullptr)}};
    json cubes = json::array();
    for (const CubeState& c : m.cubes) {
      const Quat& q = c.orientation;
      cubes.push_back({{"position", VecJson(c.position)},
                       {"quaternion", json::array({q.w(), q.x(), q.y(), q.z()})}});
    }
    j["cubes"] = cubes;
    j["targets"] = VecsJson(m.targets);
    j["distances"] = m.distances;
    j["reward"] = m.reward;
    j["success"] = m.success;
    j["done"] = m.done;
  }
  void operator()(const EventMsg& m) {
    j["kind"] = "event";
    j["name"] = m.name;
    j["detail"] = m.detail;
  }
  void operator()(const RecordMsg& m) {
    j["kind"] = "record";
    j["on"] = m.on;
  }
  void operator()(const ErrorMsg& m) {
    j["kind"] = "error";
    j["code"] = m.code;
    j["msg"] = m.msg;
  }
};

TeleopPayload DecodePayload(const std::string& kind, const json& j) {
  if (kind == "hello") {
    HelloMsg m;
    m.version = Field<int>(j, "version");
    if (j.contains("server")) m.server = Field<std::string>(j, "server");
    return m;
  }
  if (kind == "list_tasks") {
    ListTasksMsg m;
    if (j.contains("tasks")) {
      for (const json& t : Field<json>(j, "tasks")) {
        TaskSummary s;
        s.name = Field<std::string>(t, "name");
        s.n = Field<int>(t, "n");
        s.targets = VecsFrom(Field<json>(t, "targets"), "targets");
        s.tags = Field<std::vector<std::string>>(t, "tags");
        m.tasks.push_back(std::move(s));
      }
    }
    return m;
  }
  if (kind == "reset") {
    ResetMsg m;
    m.task = Field<std::string>(j, "task");
    if (j.contains("seed")) m.seed = Field<uint64_t>(j, "seed");
    return m;
  }
  if (kind == "action") {
    const json a = Field<json>(j, "a");
    if (!a.is_array() || a.size() != 5) throw ParseError("action 'a' must have 5 numbers");
    ActionMsg m;
    for (int i = 0; i < 5; ++i) {
      if (!a[i].is_number()) throw ParseError("action 'a' must have 5 numbers");
      m.a[i] = a[i].get<double>();
    }
    return m;
  }
  if (kind == "state") {
    StateMsg m;
    m.t = Field<int>(j, "t");
    m.horizon = Field<int>(j, "H");
    m.task = Field<std::string>(j, "task");
    const json g = Field<json>(j, "gripper");
    m.gripper_position = VecFrom(Field<json>(g, "position"), "gripper.position");
    m.gripper_yaw = Field<double>(g, "yaw");
    m.finger_width = Field<double>(g, "finger_width");
    if (g.contains("held") && !g["held"].is_null()) m.held_cube = Field<int>(g, "held");
    for (const json& c : Field<json>(j, "cubes")) {
      CubeState cs;
      cs.position = VecFrom(Field<json>(c, "position"), "cube.position");
      const auto q = Field<std::vector<double>>(c, "quaternion");
      if (q.size() != 4) throw ParseError("cube.quaternion must have 4 numbers");
      cs.orientation = Quat(q[0], q[1], q[2], q[3]);
      m.cubes.push_back(cs);
    }
    m.targets = VecsFrom(Field<json>(j, "targets"), "targets");
    m.distances = Field<std::vector<double>>(j, "distances");
    m.reward = Field<double>(j, "reward");
    m.success = Field<bool>(j, "success");
    m.done = Field<bool>(j, "done");
    return m;
  }
  if (kind == "event") return EventMsg{Field<std::string>(j, "name"), Field<std::string>(j, "detail")};
  if (kind == "record") return RecordMsg{Field<bool>(j, "on")};
  if (kind == "error") return ErrorMsg{Field<std::string>(j, "code"), Field<std::string>(j, "msg")};
  throw ParseError("unknown message kind '" + kind + "'");
}

std::string ContentType(const std::filesystem::path& p) {
  const std::string ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".svg") return "image/svg+xml";
  if (ext == ".png") return "image/png";
  return "application/octet-stream";
}

std::string HttpResponse(int code, const std::string& reason, const std::string& type,
                         const std::string& body) {
  std::ostringstream os;
  os << "HTTP/1.1 " << code << " " << reason << "\r\nContent-Type: " << type
     << "\r\nContent-Length: " << body.size() << "\r\nConnection: close\r\n\r\n"
     << body;
  return os.str();
}

void ServeStatic(const ws::Socket& client, const std::string& head, const std::string& dir) {
  std::istringstream line(head);
  std::string method, target;
  line >> method >> target;
  target = target.substr(0, target.find('?'));
  if (method != "GET" || dir.empty() || target.find("..") != std::string::npos) {
    client.SendAll(HttpResponse(404, "Not Found", "text/plain", "not found\n"));
    return;
  }
  if (target.empty() || target.back() == '/') target += "index.html";
  const std::filesystem::path path = std::filesystem::path(dir) / target.substr(1);
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    client.SendAll(HttpResponse(404, "Not Found", "text/plain", "not found\n"));
    return;
  }
  std::stringstream body;
  body << in.rdbuf();
  client.SendAll(HttpResponse(200, "OK", ContentType(path), body.str()));
}

}  // namespace

std::string TeleopMessage::kind() const {
  static const char* kNames[] = {"hello", "list_tasks", "reset", "action",
                                 "state", "event",      "record", "error"};
  return kNames[payload.index()];
}

std::string EncodeMessage(const TeleopMessage& m) {
  json j = json::object();
  std::visit(Encoder{j}, m.payload);
  j["seq"] = m.seq;
  return j.dump();
}

TeleopMessage DecodeMessage(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("message must be a JSON object");
  TeleopMessage m;
  m.seq = Field<int64_t>(j, "seq");
  m.payload = DecodePayload(Field<std::string>(j, "kind"), j);
  return m;
}

// --- Session -------------------------------------------------------------------

TeleopSession::TeleopSession(TeleopOptions options) : options_(std::move(options)) {
  DoReset(options_.default_task, 0);
  out_seq_ = 0;
}

TeleopSession::~TeleopSession() = default;

std::string TeleopSession::Send(TeleopPayload payload) {
  return EncodeMessage(TeleopMessage{out_seq_++, std::move(payload)});
}

void TeleopSession::SetConnected(bool connected) {
  if (connected && !connected_) {
    out_seq_ = 0;
    last_in_seq_.reset();
  }
  connected_ = connected;
}

StateMsg TeleopSession::MakeState(double reward, bool done) const {
  StateMsg s;
  const WorldState& w = env_->world();
  s.t = w.t;
  s.horizon = env_->horizon();
  s.task = env_->task_name();
  s.gripper_position = w.gripper.position;
  s.gripper_yaw = w.gripper.yaw;
  s.finger_width = w.gripper.finger_width;
  s.held_cube = w.gripper.held_cube;
  for (const RigidBody& c : w.cubes) s.cubes.push_back({c.position, c.orientation});
  s.targets = env_->targets();
  const StepInfo info = env_->Info();
  s.distances = info.distances;
  s.success = info.success;
  s.reward = reward;
  s.done = done;
  return s;
}

std::vector<std::string> TeleopSession::DoReset(const std::string& name, uint64_t seed) {
  const TaskSpec* task = FindTask(BuiltinRegistry(), name);
  if (!task) throw ConfigError("unknown task '" + name + "'");
  EnvConfig cfg;
  cfg.n = task->n;
  cfg.physics = options_.physics;
  cfg.reward = options_.reward;
  env_ = std::make_unique<Env>(cfg);
  env_->Reset(seed, task);
  task_ = *task;
  pending_.reset();
  hold_finger_ = 1.0;
  done_ = false;
  last_reward_ = env_->CurrentReward();
  history_.assign(1, CaptureFrame(*env_, Action{}, 0.0));
  std::vector<std::string> out;
  out.push_back(Send(EventMsg{"reset", task->name + " seed=" + std::to_string(seed)}));
  if (writer_) {
    for (std::string& s : StopRecording()) out.push_back(std::move(s));
    for (std::string& s : StartRecording()) out.push_back(std::move(s));
  }
  out.push_back(Send(MakeState(last_reward_, false)));
  return out;
}

std::vector<std::string> TeleopSession::StartRecording() {
  if (writer_) return {Send(EventMsg{"record_on", writer_->path()})};
  std::filesystem::create_directories(options_.record_dir);
  const std::string path =
      (std::filesystem::path(options_.record_dir) /
       ("teleop_" + std::to_string(::getpid()) + "_" + std::to_string(record_counter_++) +
        ".bbtraj"))
          .string();
  writer_ = std::make_unique<TrajectoryWriter>(path, MakeHeader(*env_, task_ ? &*task_ : nullptr));
  for (const TrajectoryFrame& f : history_) writer_->Append(f);
  recordings_.push_back(path);
  return {Send(EventMsg{"record_on", path})};
}

std::vector<std::string> TeleopSession::StopRecording() {
  if (!writer_) return {Send(EventMsg{"record_off", ""})};
  const std::string detail = writer_->path() + " frames=" + std::to_string(writer_->frames());
  writer_.reset();
  return {Send(EventMsg{"record_off", detail})};
}

std::vector<std::string> TeleopSession::HandleText(std::string_view text) {
  std::vector<std::string> out;
  TeleopMessage m;
  try {
    m = DecodeMessage(text);
  } catch (const ParseError& e) {
    out.push_back(Send(ErrorMsg{"ParseError", e.what()}));
    return out;
  }
  if (last_in_seq_ && m.seq != *last_in_seq_ + 1) {
    out.push_back(Send(EventMsg{"seq_gap", "expected " + std::to_string(*last_in_seq_ + 1) +
                                               " got " + std::to_string(m.seq)}));
  }
  last_in_seq_ = m.seq;
  try {
    if (std::holds_alternative<HelloMsg>(m.payload)) {
      const auto& h = std::get<HelloMsg>(m.payload);
      if (h.version != kTeleopProtocolVersion) {
        out.push_back(Send(ErrorMsg{"VersionMismatch",
                                    "server speaks version " +
                                        std::to_string(kTeleopProtocolVersion)}));
      }
      out.push_back(Send(HelloMsg{kTeleopProtocolVersion, "builderbench"}));
    } else if (std::holds_alternative<ListTasksMsg>(m.payload)) {
      ListTasksMsg reply;
      for (const TaskSpec& t : BuiltinRegistry()) {
        reply.tasks.push_back({t.name, t.n, t.target_positions, t.tags});
      }
      out.push_back(Send(std::move(reply)));
    } else if (std::holds_alternative<ResetMsg>(m.payload)) {
      const auto& r = std::get<ResetMsg>(m.payload);
      for (std::string& s : DoReset(r.task, r.seed)) out.push_back(std::move(s));
    } else if (std::holds_alternative<ActionMsg>(m.payload)) {
      pending_ = ClampAction(std::get<ActionMsg>(m.payload).a);
    } else if (std::holds_alternative<RecordMsg>(m.payload)) {
      const bool on = std::get<RecordMsg>(m.payload).on;
      for (std::string& s : on ? StartRecording() : StopRecording()) out.push_back(std::move(s));
    } else {
      out.push_back(Send(ErrorMsg{"UnexpectedKind", "servers do not accept '" + m.kind() + "'"}));
    }
  } catch (const Error& e) {
    out.push_back(Send(ErrorMsg{e.code(), e.what()}));
  }
  return out;
}

std::vector<std::string> TeleopSession::Tick() {
  std::vector<std::string> out;
  if (connected_ && !done_) {
    // Zero-order hold: without fresh input the setpoints stay put and the
    // fingers keep their last command.
    const Action a = pending_.value_or(Action{0.0, 0.0, 0.0, 0.0, hold_finger_});
    pending_.reset();
    hold_finger_ = a[4];
    const StepResult r = env_->Step(a);
    last_reward_ = r.reward;
    done_ = r.done;
    TrajectoryFrame f = CaptureFrame(*env_, a, r.reward);
    if (writer_) writer_->Append(f);
    history_.push_back(std::move(f));
    if (done_) out.push_back(Send(EventMsg{"episode_done", r.info.success ? "success" : "failure"}));
  }
  out.insert(out.begin(), Send(MakeState(last_reward_, done_)));
  return out;
}

// --- Server --------------------------------------------------------------------

void ServeTeleop(const TeleopOptions& options, const std::atomic<bool>& stop,
                 std::atomic<int>* bound_port) {
  int port = 0;
  ws::Socket listener = ws::Listen(options.host, options.port, &port);
  if (bound_port) bound_port->store(port);
  TeleopSession session(options);
  session.SetConnected(false);
  using Clock = std::chrono::steady_clock;
  const auto period = std::chrono::milliseconds(std::max(options.tick_ms, 1));

  while (!stop.load()) {
    pollfd lp{listener.fd(), POLLIN, 0};
    if (::poll(&lp, 1, 100) <= 0) continue;
    ws::Socket client(::accept(listener.fd(), nullptr, nullptr));
    if (!client.valid()) continue;
    const int one = 1;
    ::setsockopt(client.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    std::string rest;
    const auto head = ws::ReadHttpHead(client, 2000, &rest);
    if (!head) continue;
    if (ws::HeaderValue(*head, "Upgrade").empty()) {
      ServeStatic(client, *head, options.static_dir);
      continue;
    }
    const std::string key = ws::HeaderValue(*head, "Sec-WebSocket-Key");
    if (key.empty()) {
      client.SendAll(HttpResponse(400, "Bad Request", "text/plain", "missing key\n"));
      continue;
    }
    client.SendAll("HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\n"
                   "Connection: Upgrade\r\nSec-WebSocket-Accept: " +
                   ws::AcceptKey(key) + "\r\n\r\n");
    session.SetConnected(true);
    ws::FrameDecoder decoder;
    decoder.Feed(rest.data(), rest.size());
    std::string partial;
    bool open = true;
    auto send = [&](const std::vector<std::string>& msgs) {
      for (const std::string& m : msgs) {
        if (!client.SendAll(ws::EncodeFrame(ws::kText, m))) open = false;
      }
    };
    auto next_tick = Clock::now() + period;
    char buf[8192];
    while (open && !stop.load()) {
      const auto now = Clock::now();
      if (now >= next_tick) {
        send(session.Tick());
        next_tick += period;
        if (next_tick < now) next_tick = now + period;
        continue;
      }
      const int wait = static_cast<int>(
          std::chrono::duration_cast<std::chrono::milliseconds>(next_tick - now).count());
      pollfd p{client.fd(), POLLIN, 0};
      if (::poll(&p, 1, std::max(wait, 0)) <= 0) continue;
      const ssize_t n = ::recv(client.fd(), buf, sizeof(buf), 0);
      if (n <= 0) break;
      decoder.Feed(buf, static_cast<size_t>(n));
      try {
        while (auto f = decoder.Next()) {
          if (f->opcode == ws::kClose) {
            client.SendAll(ws::EncodeFrame(ws::kClose, ""));
            open = false;
            break;
          }
          if (f->opcode == ws::kPing) {
            client.SendAll(ws::EncodeFrame(ws::kPong, f->payload));
            continue;
          }
          if (f->opcode != ws::kText && f->opcode != ws::kContinuation) continue;
          partial += f->payload;
          if (!f->fin) continue;
          send(session.HandleText(partial));
          partial.clear();
        }
      } catch (const ParseError&) {
        open = false;
      }
    }
    session.SetConnected(false);
  }
}

}  // namespace builderbench
