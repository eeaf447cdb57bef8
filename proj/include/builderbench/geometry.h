#ifndef BUILDERBENCH_GEOMETRY_H_
#define BUILDERBENCH_GEOMETRY_H_

#include <array>
#include <optional>

#include "builderbench/common.h"

namespace builderbench {

// An oriented box: `axes` columns are the box's local x/y/z in world frame.
struct OrientedBox {
  Vec3 center = Vec3::Zero();
  Mat3 axes = Mat3::Identity();
  Vec3 half = Vec3::Constant(kCubeHalfExtent);
};

struct ManifoldPoint {
  Vec3 position = Vec3::Zero();  // midway between the two surfaces
  double depth = 0.0;            // > 0 when penetrating
};

// Contact between two boxes (or a box and the floor). The normal points from
// body b toward body a. A face-face manifold may hold up to 8 points before
// reduction (a square clipped against a square).
struct Manifold {
  static constexpr int kMaxPoints = 8;
  Vec3 normal = Vec3::UnitZ();
  std::array<ManifoldPoint, kMaxPoints> points;
  int count = 0;
  bool face_contact = true;  // false for a single edge-edge point

  void Add(const Vec3& p, double depth) {
    if (count < kMaxPoints) points[count++] = {p, depth};
  }
};

// Separating-axis test on two oriented boxes with face clipping. Returns
// nullopt when the boxes are separated by more than `margin` on some axis.
// Face contacts yield the full clipped polygon (up to 8 points).
std::optional<Manifold> CollideBoxes(const OrientedBox& a, const OrientedBox& b,
                                     double margin);

// Box against the floor plane z = 0; normal is +z. Corners with z <= margin.
std::optional<Manifold> CollideBoxFloor(const OrientedBox& a, double margin);

// Keeps at most 4 points that span the largest area, starting from the
// deepest point. Deterministic.
void ReduceManifold(Manifold& m);

// Builds an orthonormal tangent pair for a unit normal. Deterministic, and
// continuous for normals near the coordinate axes.
void TangentBasis(const Vec3& n, Vec3& t1, Vec3& t2);

}  // namespace builderbench

#endif  // BUILDERBENCH_GEOMETRY_H_
