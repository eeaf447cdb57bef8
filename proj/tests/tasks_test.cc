#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "builderbench/tasks.h"

namespace builderbench {
namespace {

using Points = std::vector<Vec3>;

const TaskSpec& Task(const std::string& name) {
  const TaskSpec* t = FindTask(BuiltinRegistry(), name);
  if (!t) throw std::runtime_error("missing task " + name);
  return *t;
}

void ExpectPoints(const Points& got, const Points& want) {
  ASSERT_EQ(got.size(), want.size());
  for (size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i], want[i]) << "entry " << i;
}

TEST(RegistryTest, TBlockCoordinates) {
  const TaskSpec& t = Task("t_block");
  ExpectPoints(t.start_positions, {{0.05, -0.08, 0.02}, {0.05, 0., 0.02}, {0.05, 0.08, 0.02}});
  ExpectPoints(t.target_positions, {{0.1, 0.02, 0.06}, {0.1, -0.02, 0.06}, {0.1, 0., 0.02}});
}

TEST(RegistryTest, FourCubePackingCoordinates) {
  const TaskSpec& t = Task("four_cube_packing");
  ExpectPoints(t.start_positions,
               {{0.05, -0.12, 0.02}, {0.05, -0.04, 0.02}, {0.05, 0.04, 0.02}, {0.05, 0.12, 0.02}});
  ExpectPoints(t.target_positions, {{0.1, 0.02828427, 0.02},
                                    {0.1, -0.02828427, 0.02},
                                    {0.12828427, 0.0, 0.02},
                                    {0.07171573, 0.0, 0.02}});
}

TEST(RegistryTest, HexagonalPortalCoordinates) {
  const TaskSpec& t = Task("hexagonal_portal");
  ExpectPoints(t.start_positions,
               {{0.05, -0.24, 0.02}, {0.05, -0.18, 0.02}, {0.05, -0.12, 0.02}, {0.05, -0.04, 0.02},
                {0.05, 0.04, 0.02}, {0.05, 0.12, 0.02}, {0.05, 0.18, 0.02}, {0.05, 0.24, 0.02}});
  ExpectPoints(t.target_positions,
               {{0.1, 0.02, 0.02}, {0.1, -0.02, 0.02}, {0.1, 0.04, 0.06}, {0.1, -0.04, 0.06},
                {0.1, 0.02, 0.1}, {0.1, -0.02, 0.1}, {0.1, 0.1, 0.02}, {0.1, -0.1, 0.02}});
}

TEST(RegistryTest, LeaningTowerCoordinates) {
  const TaskSpec& t = Task("leaning_tower");
  ExpectPoints(t.start_positions,
               {{0.05, -0.3, 0.02}, {0.05, -0.24, 0.02}, {0.05, -0.16, 0.02}, {0.05, -0.08, 0.02},
                {0.05, 0.0, 0.02}, {0.05, 0.08, 0.02}, {0.05, 0.16, 0.02}, {0.05, 0.24, 0.02},
                {0.05, 0.3, 0.02}});
  ExpectPoints(t.target_positions,
               {{0.1, 0.0, 0.02}, {0.1, -0.04, 0.02}, {0.1, 0.02, 0.06}, {0.1, -0.02, 0.06},
                {0.1, 0.04, 0.1}, {0.1, 0.0, 0.1}, {0.1, 0.01, 0.14}, {0.1, 0.12, 0.02},
                {0.1, 0.16, 0.02}});
}

TEST(RegistryTest, MaximumOverhangCoordinates) {
  const TaskSpec& t = Task("maximum_overhang");
  ExpectPoints(t.start_positions, {{0.05, -0.16, 0.02}, {0.05, -0.08, 0.02}, {0.05, 0.0, 0.02},
                                   {0.05, 0.08, 0.02}, {0.05, 0.16, 0.02}});
  ExpectPoints(t.target_positions, {{0.1, 0.0, 0.02}, {0.1, 0.031, 0.14}, {0.1, 0.16, 0.14}});
  EXPECT_EQ(t.n, 5);
  EXPECT_EQ(t.k(), 3);
}

TEST(RegistryTest, SingleCubeTask) {
  const TaskSpec& t = Task("cube-1-task1");
  ExpectPoints(t.start_positions, {{0.05, 0.0, 0.02}});
  ExpectPoints(t.target_positions, {{0.1, 0.0, 0.02}});
}

TEST(RegistryTest, NamesAreUnique) {
  std::set<std::string> names;
  for (const TaskSpec& t : BuiltinRegistry()) EXPECT_TRUE(names.insert(t.name).second) << t.name;
}

TEST(RegistryTest, EveryBuiltinValidates) {
  for (const TaskSpec& t : BuiltinRegistry()) {
    const ValidationReport r = ValidateTask(t);
    EXPECT_TRUE(r.ok) << t.name;
    EXPECT_TRUE(r.errors.empty()) << t.name;
  }
}

TEST(ValidateTest, PackingNeedsRotation) {
  const ValidationReport r = ValidateTask(Task("four_cube_packing"));
  EXPECT_TRUE(r.HasFlag(kTagRequiresRotation));
  EXPECT_FALSE(r.target_verdict.has_value());
}

TEST(ValidateTest, NaiveTBlockTargetsAreUnstableButSolvable) {
  const ValidationReport r = ValidateTask(Task("t_block"));
  ASSERT_TRUE(r.target_verdict.has_value());
  EXPECT_EQ(r.target_verdict->classification, StabilityClass::kUnstable);
  ASSERT_TRUE(r.solution_verdict.has_value());
  EXPECT_EQ(r.solution_verdict->classification, StabilityClass::kStable);
}

TEST(ValidateTest, BrokenInvariantsAreReported) {
  TaskSpec t = GenerateTower(2);
  t.target_positions.push_back({0.3, 0.3, 0.02});
  EXPECT_FALSE(ValidateTask(t).ok);
  TaskSpec overlap = GenerateRow(2);
  overlap.target_positions[1] = overlap.target_positions[0] + Vec3(0.01, 0, 0);
  overlap.solution.clear();
  EXPECT_FALSE(ValidateTask(overlap).ok);
}

TEST(SuccessTest, StrictThreshold) {
  const Points targets = {{0.1, 0, 0.02}};
  EXPECT_TRUE(Success(Points{{0.1, 0.0199, 0.02}}, targets));
  EXPECT_FALSE(Success(Points{{0.1, 0.02, 0.02}}, targets));
}

TEST(GeneratorTest, FamiliesHaveExpectedShapes) {
  EXPECT_LT((GenerateTower(4).target_positions.back() - Vec3(0.1, 0, 0.14)).norm(), 1e-12);
  EXPECT_EQ(GeneratePyramid(6).k(), 6);
  EXPECT_EQ(GenerateBridge(5).k(), 5);
  EXPECT_EQ(DefaultStartRow(3)[0], Vec3(0.05, -0.08, 0.02));
}

TEST(TaskFileTest, RoundTripIsExact) {
  TaskFile file;
  file.tasks = BuiltinRegistry();
  const std::string text = SerializeTasks(file);
  const TaskFile back = ParseTasks(text);
  ASSERT_EQ(back.tasks.size(), file.tasks.size());
  for (size_t i = 0; i < back.tasks.size(); ++i) EXPECT_EQ(back.tasks[i], file.tasks[i]) << i;
  EXPECT_EQ(SerializeTasks(back), text);
}

TEST(TaskFileTest, SaveAndLoad) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "bb_tasks_test.yaml").string();
  TaskFile file;
  file.tasks = {Task("t_block"), Task("maximum_overhang")};
  SaveTasks(path, file);
  EXPECT_EQ(LoadTasks(path).tasks, file.tasks);
  std::filesystem::remove(path);
}

std::string ParseErrorOf(const std::string& text) {
  try {
    ParseTasks(text, "t.yaml");
  } catch (const ParseError& e) {
    return e.what();
  }
  return "";
}

TEST(TaskFileTest, DiagnosticsNameLineAndField) {
  const std::string bad_version = "format_version: 9\ntasks: []\n";
  EXPECT_NE(ParseErrorOf(bad_version).find("format_version"), std::string::npos);

  const std::string bad_k =
      "format_version: 1\n"
      "tasks:\n"
      "  - name: a\n"
      "    n: 1\n"
      "    k: 2\n"
      "    start: [[0.05, 0, 0.02]]\n"
      "    target: [[0.1, 0, 0.02]]\n";
  const std::string msg = ParseErrorOf(bad_k);
  EXPECT_NE(msg.find("t.yaml:"), std::string::npos) << msg;
  EXPECT_NE(msg.find("'k'"), std::string::npos) << msg;

  const std::string bad_number =
      "format_version: 1\n"
      "tasks:\n"
      "  - name: a\n"
      "    n: 1\n"
      "    k: 1\n"
      "    start: [[0.05, zero, 0.02]]\n"
      "    target: [[0.1, 0, 0.02]]\n";
  EXPECT_NE(ParseErrorOf(bad_number).find("t.yaml:6"), std::string::npos)
      << ParseErrorOf(bad_number);

  const std::string dup =
      "format_version: 1\n"
      "tasks:\n"
      "  - {name: a, n: 1, k: 1, start: [[0.05, 0, 0.02]], target: [[0.1, 0, 0.02]]}\n"
      "  - {name: a, n: 1, k: 1, start: [[0.05, 0, 0.02]], target: [[0.1, 0, 0.02]]}\n";
  EXPECT_NE(ParseErrorOf(dup).find("duplicate"), std::string::npos) << ParseErrorOf(dup);
  EXPECT_FALSE(ParseErrorOf("tasks: [").empty());
}

}  // namespace
}  // namespace builderbench
