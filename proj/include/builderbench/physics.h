#ifndef BUILDERBENCH_PHYSICS_H_
#define BUILDERBENCH_PHYSICS_H_

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "builderbench/common.h"
#include "builderbench/geometry.h"

namespace builderbench {

enum class BodyKind { kCube, kGripper };

struct RigidBody {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();
  Vec3 linear_velocity = Vec3::Zero();
  Vec3 angular_velocity = Vec3::Zero();
  double half_extent = kCubeHalfExtent;
  double mass = 0.064;
  Vec3 inertia = Vec3::Zero();
  BodyKind kind = BodyKind::kCube;

  // A resting cube at `position` yawed by `yaw`, with inertia (m/6) s^2.
  static RigidBody Cube(const Vec3& position, double yaw = 0.0, double mass = 0.064);

  OrientedBox Box() const;
};

struct GripperSetpoints {
  Vec3 position = Vec3(0.0, 0.0, 0.25);
  double yaw = 0.0;
  double finger_width = kMaxFingerWidth;
};

// Kinematic two-pad gripper. `position` is the midpoint between the pads.
struct GripperState {
  Vec3 position = Vec3(0.0, 0.0, 0.25);
  double yaw = 0.0;
  double finger_width = kMaxFingerWidth;
  Vec3 linear_velocity = Vec3::Zero();
  double yaw_rate = 0.0;
  double finger_rate = 0.0;
  GripperSetpoints setpoints;
  std::optional<int> held_cube;
  // Weld transform of the held cube, expressed in the gripper frame.
  Vec3 held_offset = Vec3::Zero();
  Quat held_rotation = Quat::Identity();

  Quat Orientation() const { return YawQuat(yaw); }
};

// Body ids: cubes are 0..n-1, the two finger pads are n and n+1.
inline constexpr int kFloor = -1;

struct Contact {
  int body_a = 0;
  int body_b = kFloor;
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();  // from b toward a
  double penetration_depth = 0.0;
};

struct PhysicsParams {
  double substep_dt = 0.002;
  int substeps_per_control = 10;
  double gravity = 9.81;
  double friction_mu = 0.8;
  double restitution = 0.0;
  int solver_iterations = 12;
  double baumgarte_beta = 0.2;
  double penetration_slop = 5e-4;
  // Gripper drive.
  double gripper_kp = 1600.0;
  double gripper_kd = 80.0;
  double finger_speed = 0.5;  // m/s

  // Canonical text form (17 significant digits) and its FNV-1a hash.
  std::string Canonical() const;
  uint64_t Hash() const { return Fnv1a(Canonical()); }
};

// Accumulated impulses carried between substeps for warm starting.
struct ContactImpulse {
  int body_a = 0;
  int body_b = kFloor;
  Vec3 local_point = Vec3::Zero();  // in body a's frame
  double normal = 0.0;
  double tangent1 = 0.0;
  double tangent2 = 0.0;
};

struct WorldState {
  GripperState gripper;
  std::vector<RigidBody> cubes;
  std::vector<ContactImpulse> warm_start;
  int t = 0;
  std::mt19937_64 rng;

  int n() const { return static_cast<int>(cubes.size()); }
};

// Pad geometry, in the gripper frame: the pads sit on +/- local y.
inline constexpr double kPadHalfThickness = 0.005;
inline constexpr double kPadHalfWidth = 0.01;
inline constexpr double kPadHalfHeight = 0.01;

// Workspace box for the gripper midpoint.
// Mass the contact solver gives the gripper carriage (pads and any held
// cube move with it).
inline constexpr double kGripperMass = 1.0;

inline constexpr double kWorkspaceXY = 0.4;
inline constexpr double kWorkspaceZMin = 0.005;
inline constexpr double kWorkspaceZMax = 0.5;

// Boxes of the left (-y) and right (+y) finger pads.
std::array<OrientedBox, 2> PadBoxes(const GripperState& g);

// Every cube-floor, cube-cube and cube-pad contact with penetration >=
// -slop. Face manifolds are reduced to at most 4 points per pair.
std::vector<Contact> DetectContacts(const WorldState& world, const PhysicsParams& params);

// Sequential-impulse velocity solve over `contacts` (from DetectContacts on
// the same state). Updates cube velocities and the warm-start cache.
void SolveContacts(WorldState& world, const std::vector<Contact>& contacts,
                   const PhysicsParams& params);

// One substep: gravity, gripper drive, contact solve, integration.
// Throws NonFiniteState if any field becomes NaN/Inf.
void Substep(WorldState& world, const PhysicsParams& params);

// One control period (params.substeps_per_control substeps).
WorldState StepPhysics(WorldState world, const PhysicsParams& params);
void StepPhysicsInPlace(WorldState& world, const PhysicsParams& params);

// Attaches/detaches the grasp weld. Call once per control step after the
// physics substeps.
void UpdateGrasp(WorldState& world);

// Finger gap geometry used by the grasp test.
inline constexpr double kGraspRadius = 0.01;
inline constexpr double kGraspAttachWidth = kCubeSize + 0.002;
inline constexpr double kGraspReleaseWidth = 0.05;

struct SettleResult {
  WorldState world;
  bool settled = false;
  int substeps = 0;
  double max_displacement = 0.0;
};

// Steps substeps until every cube's linear and angular speed is below `tol`
// for 50 consecutive substeps, or `max_substeps` is reached. Settled when it
// converged and no cube moved more than 2 mm from its input position.
SettleResult Settle(WorldState world, int max_substeps, double tol,
                    const PhysicsParams& params = {});

// World with the gripper parked high and out of the way, fingers open.
WorldState MakeStaticWorld(std::vector<RigidBody> cubes);

bool IsFinite(const WorldState& world);

}  // namespace builderbench

#endif  // BUILDERBENCH_PHYSICS_H_
