#ifndef BUILDERBENCH_STABILITY_H_
#define BUILDERBENCH_STABILITY_H_

#include <string>
#include <vector>

#include "builderbench/common.h"
#include "builderbench/physics.h"

namespace builderbench {

// Pose of one cube in a static structure.
struct CubePose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  static CubePose At(const Vec3& p, double yaw = 0.0) { return {p, YawQuat(yaw)}; }
};

using Structure = std::vector<CubePose>;

// Touching surfaces between two cubes, or a cube and the floor (body_b =
// kFloor). Points are the vertices of the contact polygon.
struct ContactPatch {
  int body_a = 0;
  int body_b = kFloor;
  std::vector<Vec3> points;
  Vec3 normal = Vec3::UnitZ();  // from b toward a
};

enum class StabilityClass { kStable, kUnstable, kFloating };
std::string ToString(StabilityClass c);

struct StabilityOptions {
  double friction_mu = 0.8;
  double delta = 0.001;          // required COM-perturbation margin (m)
  double contact_tol = 1e-4;     // gap still counted as touching (m)
  double margin_cap = 0.05;      // margins are reported up to this (m)
};

struct ContactForce {
  int patch = 0;
  int point = 0;
  Vec3 force = Vec3::Zero();  // acting on body_a, in units of one cube weight
};

struct EquilibriumResult {
  bool feasible = false;
  std::vector<ContactForce> forces;
};

struct StabilityVerdict {
  bool feasible = false;
  double margin = 0.0;
  StabilityClass classification = StabilityClass::kUnstable;
};

// Contact polygons of a structure. Throws OverlapError when two cubes (or a
// cube and the floor) interpenetrate by more than contact_tol.
std::vector<ContactPatch> BuildContactPatches(const Structure& s,
                                              const StabilityOptions& options = {});

// Static equilibrium as an LP over contact forces: non-negative normal
// force, box friction pyramid |f_t1|, |f_t2| <= mu f_n, and force/torque
// balance on every cube. Returns a witness force set when feasible.
EquilibriumResult EquilibriumFeasible(const Structure& s,
                                      const StabilityOptions& options = {});

// Largest horizontal COM displacement the structure tolerates: min over 8
// compass directions of the displacement of each single cube and of all
// cubes together. 0 when not in equilibrium.
double StabilityMargin(const Structure& s, const StabilityOptions& options = {});

// True when some cube has no contact path to the floor.
bool HasFloatingCube(const Structure& s, const std::vector<ContactPatch>& patches);

StabilityVerdict Classify(const Structure& s, const StabilityOptions& options = {});

// Dynamic oracle: settles the structure, then re-settles it after small
// horizontal velocity kicks in the four axis directions. True when every run
// settles in place.
bool SettlesUnderPerturbation(const Structure& s, const PhysicsParams& params = {},
                              double kick_speed = 0.01, int max_substeps = 3000);

}  // namespace builderbench

#endif  // BUILDERBENCH_STABILITY_H_
