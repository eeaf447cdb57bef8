#include "builderbench/tasks.h"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace builderbench {
namespace {

constexpr double kQuarterTurn = std::numbers::pi / 4.0;

std::vector<SolutionCube> SolutionFromTargets(const std::vector<Vec3>& targets) {
  std::vector<SolutionCube> s;
  for (const Vec3& t : targets) s.push_back({t, 0.0, false});
  return s;
}

TaskSpec TBlock() {
  TaskSpec t;
  t.name = "t_block";
  t.n = 3;
  t.start_positions = {{0.05, -0.08, 0.02}, {0.05, 0.0, 0.02}, {0.05, 0.08, 0.02}};
  t.target_positions = {{0.1, 0.02, 0.06}, {0.1, -0.02, 0.06}, {0.1, 0.0, 0.02}};
  t.tags = {"sequential-logic", "rotation", "motor-skills"};
  // The base cube yawed by 45 degrees supports both top cubes.
  t.solution = SolutionFromTargets(t.target_positions);
  t.solution[2].yaw = kQuarterTurn;
  return t;
}

TaskSpec FourCubePacking() {
  TaskSpec t;
  t.name = "four_cube_packing";
  t.n = 4;
  t.start_positions = {{0.05, -0.12, 0.02}, {0.05, -0.04, 0.02}, {0.05, 0.04, 0.02},
                       {0.05, 0.12, 0.02}};
  t.target_positions = {{0.1, 0.02828427, 0.02}, {0.1, -0.02828427, 0.02},
                        {0.12828427, 0.0, 0.02}, {0.07171573, 0.0, 0.02}};
  t.tags = {"packing", "sequential-logic", "motor-skills", kTagRequiresRotation};
  t.solution = SolutionFromTargets(t.target_positions);
  for (SolutionCube& c : t.solution) c.yaw = kQuarterTurn;
  return t;
}

TaskSpec HexagonalPortal() {
  TaskSpec t;
  t.name = "hexagonal_portal";
  t.n = 8;
  t.start_positions = {{0.05, -0.24, 0.02}, {0.05, -0.18, 0.02}, {0.05, -0.12, 0.02},
                       {0.05, -0.04, 0.02}, {0.05, 0.04, 0.02},  {0.05, 0.12, 0.02},
                       {0.05, 0.18, 0.02},  {0.05, 0.24, 0.02}};
  t.target_positions = {{0.1, 0.02, 0.02}, {0.1, -0.02, 0.02}, {0.1, 0.04, 0.06},
                        {0.1, -0.04, 0.06}, {0.1, 0.02, 0.1},  {0.1, -0.02, 0.1},
                        {0.1, 0.1, 0.02},  {0.1, -0.1, 0.02}};
  t.tags = {"scaffolding", "two-cube-lift", "sequential-logic", "motor-skills"};
  t.solution = SolutionFromTargets(t.target_positions);
  return t;
}

TaskSpec LeaningTower() {
  TaskSpec t;
  t.name = "leaning_tower";
  t.n = 9;
  t.start_positions = {{0.05, -0.3, 0.02}, {0.05, -0.24, 0.02}, {0.05, -0.16, 0.02},
                       {0.05, -0.08, 0.02}, {0.05, 0.0, 0.02},  {0.05, 0.08, 0.02},
                       {0.05, 0.16, 0.02},  {0.05, 0.24, 0.02}, {0.05, 0.3, 0.02}};
  t.target_positions = {{0.1, 0.0, 0.02},  {0.1, -0.04, 0.02}, {0.1, 0.02, 0.06},
                        {0.1, -0.02, 0.06}, {0.1, 0.04, 0.1},  {0.1, 0.0, 0.1},
                        {0.1, 0.01, 0.14},  {0.1, 0.12, 0.02}, {0.1, 0.16, 0.02}};
  t.tags = {"scaffolding", "counterweights", "sequential-logic", "motor-skills"};
  t.solution = SolutionFromTargets(t.target_positions);
  return t;
}

TaskSpec MaximumOverhang() {
  TaskSpec t;
  t.name = "maximum_overhang";
  t.n = 5;
  t.start_positions = {{0.05, -0.16, 0.02}, {0.05, -0.08, 0.02}, {0.05, 0.0, 0.02},
                       {0.05, 0.08, 0.02}, {0.05, 0.16, 0.02}};
  t.target_positions = {{0.1, 0.0, 0.02}, {0.1, 0.031, 0.14}, {0.1, 0.16, 0.14}};
  t.tags = {"maximum-overhang", "sequential-logic", "motor-skills", kTagRequiresHold};
  // Harmonic-style stack under the overhanging cube; the far cube is held.
  t.solution = {{{0.1, 0.0, 0.02}, 0.0, false},
                {{0.1, 0.008, 0.06}, 0.0, false},
                {{0.1, 0.014, 0.1}, 0.0, false},
                {{0.1, 0.031, 0.14}, 0.0, false},
                {{0.1, 0.16, 0.14}, 0.0, true}};
  return t;
}

TaskSpec Cube1Task1() {
  TaskSpec t;
  t.name = "cube-1-task1";
  t.n = 1;
  t.start_positions = {{0.05, 0.0, 0.02}};
  t.target_positions = {{0.1, 0.0, 0.02}};
  t.tags = {"pick-and-place"};
  t.solution = SolutionFromTargets(t.target_positions);
  return t;
}

TaskSpec Cube1Task2() {
  TaskSpec t;
  t.name = "cube-1-task2";
  t.n = 1;
  t.start_positions = {{0.05, 0.0, 0.02}};
  t.target_positions = {{0.1, 0.0, 0.1}};
  t.tags = {"pick-and-hold", kTagRequiresHold, "approximate-coordinates"};
  t.solution = {{{0.1, 0.0, 0.1}, 0.0, true}};
  return t;
}

std::string GeneratedName(const std::string& family, int n) {
  return "generated/" + family + "_" + std::to_string(n);
}

TaskSpec Generated(const std::string& family, int n, std::vector<Vec3> targets) {
  TaskSpec t;
  t.name = GeneratedName(family, n);
  t.n = n;
  t.start_positions = DefaultStartRow(n);
  t.target_positions = std::move(targets);
  t.tags = {"generated", family};
  return t;
}

std::vector<TaskSpec> BuildRegistry() {
  std::vector<TaskSpec> r = {TBlock(),        FourCubePacking(), HexagonalPortal(),
                             LeaningTower(),  MaximumOverhang(), Cube1Task1(),
                             Cube1Task2()};
  for (int n = 1; n <= 9; ++n) r.push_back(GenerateTower(n));
  for (int n = 1; n <= 9; ++n) r.push_back(GenerateRow(n));
  for (int n : {3, 6}) r.push_back(GeneratePyramid(n));
  for (int n : {3, 5, 7, 9}) r.push_back(GenerateBridge(n));
  return r;
}

// --- YAML helpers --------------------------------------------------------

[[noreturn]] void Fail(const std::string& source, const YAML::Node& node,
                       const std::string& field, const std::string& msg) {
  std::ostringstream os;
  os << source;
  if (node.IsDefined() && node.Mark().line >= 0) os << ":" << node.Mark().line + 1;
  os << ": field '" << field << "': " << msg;
  throw ParseError(os.str());
}

template <typename T>
T Scalar(const std::string& source, const YAML::Node& parent, const std::string& field) {
  const YAML::Node node = parent[field];
  if (!node) Fail(source, parent, field, "missing");
  try {
    return node.as<T>();
  } catch (const YAML::Exception& e) {
    Fail(source, node, field, "bad value");
  }
}

Vec3 ParseVec3(const std::string& source, const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence() || node.size() != 3) {
    Fail(source, node, field, "expected a list of 3 numbers");
  }
  Vec3 v;
  for (int k = 0; k < 3; ++k) {
    try {
      v[k] = node[k].as<double>();
    } catch (const YAML::Exception&) {
      Fail(source, node, field, "non-numeric coordinate");
    }
    if (!std::isfinite(v[k])) Fail(source, node, field, "non-finite coordinate");
  }
  return v;
}

std::vector<Vec3> ParseVecList(const std::string& source, const YAML::Node& parent,
                               const std::string& field) {
  const YAML::Node node = parent[field];
  if (!node) Fail(source, parent, field, "missing");
  if (!node.IsSequence()) Fail(source, node, field, "expected a list");
  std::vector<Vec3> out;
  for (const YAML::Node& item : node) out.push_back(ParseVec3(source, item, field));
  return out;
}

// Shortest decimal text that parses back to the same double.
std::string Shortest(double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, r.ptr);
}

void EmitVec3(YAML::Emitter& out, const Vec3& v) {
  out << YAML::Flow << YAML::BeginSeq << Shortest(v.x()) << Shortest(v.y()) << Shortest(v.z())
      << YAML::EndSeq;
}

}  // namespace

bool TaskSpec::HasTag(const std::string& tag) const {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

bool TaskSpec::operator==(const TaskSpec& o) const {
  if (name != o.name || n != o.n || tags != o.tags || start_positions != o.start_positions ||
      target_positions != o.target_positions || solution.size() != o.solution.size()) {
    return false;
  }
  for (size_t i = 0; i < solution.size(); ++i) {
    if (solution[i].position != o.solution[i].position || solution[i].yaw != o.solution[i].yaw ||
        solution[i].held != o.solution[i].held) {
      return false;
    }
  }
  return true;
}

bool ValidationReport::HasFlag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

std::vector<Vec3> DefaultStartRow(int n) {
  std::vector<Vec3> row;
  for (int i = 0; i < n; ++i) row.emplace_back(0.05, (i - 0.5 * (n - 1)) * 0.08, 0.02);
  return row;
}

TaskSpec GenerateTower(int n) {
  std::vector<Vec3> targets;
  for (int i = 0; i < n; ++i) targets.emplace_back(0.1, 0.0, 0.02 + kCubeSize * i);
  TaskSpec t = Generated("tower", n, std::move(targets));
  t.solution = SolutionFromTargets(t.target_positions);
  return t;
}

TaskSpec GenerateRow(int n) {
  std::vector<Vec3> targets;
  for (int i = 0; i < n; ++i) targets.emplace_back(0.1, (i - 0.5 * (n - 1)) * kCubeSize, 0.02);
  TaskSpec t = Generated("row", n, std::move(targets));
  t.solution = SolutionFromTargets(t.target_positions);
  return t;
}

TaskSpec GeneratePyramid(int n) {
  int base = 0;
  while (base * (base + 1) / 2 < n) ++base;
  if (base * (base + 1) / 2 != n) {
    throw TooLarge("pyramid needs a triangular cube count, got " + std::to_string(n));
  }
  std::vector<Vec3> targets;
  for (int level = 0; level < base; ++level) {
    const int width = base - level;
    for (int i = 0; i < width; ++i) {
      targets.emplace_back(0.1, (i - 0.5 * (width - 1)) * kCubeSize, 0.02 + kCubeSize * level);
    }
  }
  TaskSpec t = Generated("pyramid", n, std::move(targets));
  t.solution = SolutionFromTargets(t.target_positions);
  return t;
}

TaskSpec GenerateBridge(int n) {
  if (n < 3 || n % 2 == 0) throw TooLarge("bridge needs an odd cube count >= 3");
  const int height = (n - 1) / 2;
  std::vector<Vec3> targets;
  for (int level = 0; level < height; ++level) {
    targets.emplace_back(0.1, -0.03, 0.02 + kCubeSize * level);
    targets.emplace_back(0.1, 0.03, 0.02 + kCubeSize * level);
  }
  targets.emplace_back(0.1, 0.0, 0.02 + kCubeSize * height);
  TaskSpec t = Generated("bridge", n, std::move(targets));
  t.solution = SolutionFromTargets(t.target_positions);
  return t;
}

const std::vector<TaskSpec>& BuiltinRegistry() {
  static const std::vector<TaskSpec> registry = BuildRegistry();
  return registry;
}

const TaskSpec* FindTask(std::span<const TaskSpec> tasks, const std::string& name) {
  for (const TaskSpec& t : tasks) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

std::vector<Vec3> CubePositions(const WorldState& world) {
  std::vector<Vec3> p;
  p.reserve(world.cubes.size());
  for (const RigidBody& c : world.cubes) p.push_back(c.position);
  return p;
}

Assignment TaskAssignment(const WorldState& world, const TaskSpec& task, Matching matching) {
  const std::vector<Vec3> cubes = CubePositions(world);
  return MatchTargets(cubes, task.target_positions, matching);
}

bool Success(std::span<const Vec3> cubes, std::span<const Vec3> targets) {
  const Assignment a = AssignTargets(cubes, targets);
  return SparseFromDistances(a.distances, kSuccessThreshold) == 0.0;
}

bool Success(const WorldState& world, const TaskSpec& task) {
  const std::vector<Vec3> cubes = CubePositions(world);
  return Success(cubes, task.target_positions);
}

double DenseReward(const WorldState& world, const TaskSpec& task, const RewardConfig& config) {
  const std::vector<Vec3> cubes = CubePositions(world);
  return DenseReward(cubes, task.target_positions, config);
}

double SparseReward(const WorldState& world, const TaskSpec& task, const RewardConfig& config) {
  const std::vector<Vec3> cubes = CubePositions(world);
  return SparseReward(cubes, task.target_positions, config);
}

ValidationReport ValidateTask(const TaskSpec& task, const StabilityOptions& options) {
  ValidationReport r;
  r.task = task.name;
  auto error = [&r](const std::string& msg) {
    r.invariants_ok = false;
    r.errors.push_back(msg);
  };
  if (task.name.empty()) error("empty task name");
  if (task.n < 1 || task.n > 9) error("n must be in [1, 9]");
  if (static_cast<int>(task.start_positions.size()) != task.n) {
    error("start_positions has " + std::to_string(task.start_positions.size()) +
          " entries, expected n = " + std::to_string(task.n));
  }
  if (task.k() > task.n) error("k = " + std::to_string(task.k()) + " exceeds n");
  for (const Vec3& t : task.target_positions) {
    if (!t.allFinite()) error("non-finite target");
    if (t.z() < kCubeHalfExtent - 1e-9) error("target below the floor (z < 0.02)");
  }
  if (!task.solution.empty() && static_cast<int>(task.solution.size()) != task.n) {
    error("solution must list all n cubes");
  }

  // Targets closer than a cube edge on every axis collide at identity yaw.
  const auto& tp = task.target_positions;
  for (size_t i = 0; i < tp.size(); ++i) {
    for (size_t j = i + 1; j < tp.size(); ++j) {
      const Vec3 d = (tp[i] - tp[j]).cwiseAbs();
      if ((d.array() < kCubeSize - 1e-9).all()) {
        if (!r.HasFlag(kTagRequiresRotation)) r.flags.push_back(kTagRequiresRotation);
      }
    }
  }
  if (task.HasTag(kTagRequiresHold)) r.flags.push_back(kTagRequiresHold);

  Structure targets;
  for (const Vec3& t : tp) targets.push_back(CubePose::At(t));
  try {
    if (!r.HasFlag(kTagRequiresRotation)) r.target_verdict = Classify(targets, options);
  } catch (const Error& e) {
    r.errors.push_back(std::string("target structure: ") + e.what());
  }

  if (!task.solution.empty() && r.invariants_ok) {
    Structure standing;
    std::vector<Vec3> all;
    for (const SolutionCube& c : task.solution) {
      all.push_back(c.position);
      if (!c.held) standing.push_back(CubePose::At(c.position, c.yaw));
    }
    r.solution_realizes_targets = Success(all, tp);
    if (!r.solution_realizes_targets) {
      r.invariants_ok = false;
      r.errors.push_back("solution does not place cubes on the targets");
    }
    try {
      r.solution_verdict = Classify(standing, options);
    } catch (const Error& e) {
      r.invariants_ok = false;
      r.errors.push_back(std::string("solution structure: ") + e.what());
    }
  }

  const auto is_stable = [](const std::optional<StabilityVerdict>& v) {
    return v && v->classification == StabilityClass::kStable;
  };
  r.stable = task.solution.empty() ? is_stable(r.target_verdict) : is_stable(r.solution_verdict);
  r.ok = r.invariants_ok && (r.stable || task.HasTag(kTagRequiresHold));
  return r;
}

TaskFile ParseTasks(const std::string& text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ParseError(source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  if (!root.IsMap()) throw ParseError(source + ": top level must be a mapping");
  TaskFile file;
  file.format_version = Scalar<int>(source, root, "format_version");
  if (file.format_version != kTaskFormatVersion) {
    Fail(source, root["format_version"], "format_version",
         "unsupported version " + std::to_string(file.format_version));
  }
  const YAML::Node tasks = root["tasks"];
  if (!tasks || !tasks.IsSequence()) Fail(source, root, "tasks", "expected a list of tasks");
  std::set<std::string> names;
  for (const YAML::Node& node : tasks) {
    if (!node.IsMap()) Fail(source, node, "tasks", "each task must be a mapping");
    TaskSpec t;
    t.name = Scalar<std::string>(source, node, "name");
    const std::string where = "task '" + t.name + "'";
    t.n = Scalar<int>(source, node, "n");
    const int k = Scalar<int>(source, node, "k");
    t.start_positions = ParseVecList(source, node, "start");
    t.target_positions = ParseVecList(source, node, "target");
    if (node["tags"]) {
      for (const YAML::Node& tag : node["tags"]) t.tags.push_back(tag.as<std::string>());
    }
    if (const YAML::Node sol = node["solution"]) {
      if (!sol.IsSequence()) Fail(source, sol, "solution", where + ": expected a list");
      for (const YAML::Node& c : sol) {
        SolutionCube cube;
        cube.position = ParseVec3(source, c["position"], "solution.position");
        if (c["yaw"]) cube.yaw = c["yaw"].as<double>();
        if (c["held"]) cube.held = c["held"].as<bool>();
        t.solution.push_back(cube);
      }
    }
    if (t.n < 1 || t.n > 9) Fail(source, node["n"], "n", where + ": n must be in [1, 9]");
    if (k != t.k()) {
      Fail(source, node["k"], "k", where + ": k = " + std::to_string(k) + " but " +
                                       std::to_string(t.k()) + " targets listed");
    }
    if (k > t.n) Fail(source, node["k"], "k", where + ": k > n");
    if (static_cast<int>(t.start_positions.size()) != t.n) {
      Fail(source, node["start"], "start", where + ": expected n start positions");
    }
    if (!t.solution.empty() && static_cast<int>(t.solution.size()) != t.n) {
      Fail(source, node["solution"], "solution", where + ": expected n solution cubes");
    }
    if (!names.insert(t.name).second) {
      Fail(source, node["name"], "name", "duplicate task name '" + t.name + "'");
    }
    file.tasks.push_back(std::move(t));
  }
  return file;
}

TaskFile LoadTasks(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  return ParseTasks(ss.str(), path);
}

std::string SerializeTasks(const TaskFile& file) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "format_version" << YAML::Value << file.format_version;
  out << YAML::Key << "tasks" << YAML::Value << YAML::BeginSeq;
  for (const TaskSpec& t : file.tasks) {
    out << YAML::BeginMap;
    out << YAML::Key << "name" << YAML::Value << t.name;
    out << YAML::Key << "n" << YAML::Value << t.n;
    out << YAML::Key << "k" << YAML::Value << t.k();
    out << YAML::Key << "tags" << YAML::Value << YAML::Flow << t.tags;
    out << YAML::Key << "start" << YAML::Value << YAML::BeginSeq;
    for (const Vec3& v : t.start_positions) EmitVec3(out, v);
    out << YAML::EndSeq;
    out << YAML::Key << "target" << YAML::Value << YAML::BeginSeq;
    for (const Vec3& v : t.target_positions) EmitVec3(out, v);
    out << YAML::EndSeq;
    if (!t.solution.empty()) {
      out << YAML::Key << "solution" << YAML::Value << YAML::BeginSeq;
      for (const SolutionCube& c : t.solution) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "position" << YAML::Value;
        EmitVec3(out, c.position);
        out << YAML::Key << "yaw" << YAML::Value << Shortest(c.yaw);
        out << YAML::Key << "held" << YAML::Value << c.held;
        out << YAML::EndMap;
      }
      out << YAML::EndSeq;
    }
    out << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

void SaveTasks(const std::string& path, const TaskFile& file) {
  std::ofstream out(path);
  if (!out) throw ParseError(path + ": cannot write");
  out << "# BuilderBench task file; lengths in meters.\n" << SerializeTasks(file);
}

}  // namespace builderbench
