#include "builderbench/geometry.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace builderbench {
namespace {

// Edge axes must beat the best face axis by this much to be chosen; keeps
// face-face stacks from flickering into single edge points.
constexpr double kEdgeBias = 1e-5;

struct Polygon {
  std::array<Vec3, 16> v;
  int count = 0;
};

// Keeps the part of `in` with (p - origin).dot(normal) <= offset.
Polygon ClipAgainstPlane(const Polygon& in, const Vec3& normal, double offset) {
  Polygon out;
  if (in.count == 0) return out;
  for (int i = 0; i < in.count; ++i) {
    const Vec3& p = in.v[i];
    const Vec3& q = in.v[(i + 1) % in.count];
    const double dp = p.dot(normal) - offset;
    const double dq = q.dot(normal) - offset;
    if (dp <= 0.0) out.v[out.count++] = p;
    if ((dp < 0.0 && dq > 0.0) || (dp > 0.0 && dq < 0.0)) {
      const double s = dp / (dp - dq);
      out.v[out.count++] = p + s * (q - p);
    }
    if (out.count >= 15) break;
  }
  return out;
}

// Closest points between segments p1 + s*d1 and p2 + t*d2, s,t in [-1,1].
void ClosestSegmentPoints(const Vec3& p1, const Vec3& d1, const Vec3& p2,
                          const Vec3& d2, Vec3& c1, Vec3& c2) {
  const Vec3 r = p1 - p2;
  const double a = d1.dot(d1);
  const double e = d2.dot(d2);
  const double b = d1.dot(d2);
  const double c = d1.dot(r);
  const double f = d2.dot(r);
  const double denom = a * e - b * b;
  double s = 0.0;
  if (denom > 1e-18) s = std::clamp((b * f - c * e) / denom, -1.0, 1.0);
  double t = (b * s + f) / e;
  if (t < -1.0 || t > 1.0) {
    t = std::clamp(t, -1.0, 1.0);
    s = std::clamp((b * t - c) / a, -1.0, 1.0);
  }
  c1 = p1 + s * d1;
  c2 = p2 + t * d2;
}

// Face-clipping manifold. `ref` owns the separating face axis; `ref_normal`
// is that face's outward normal (pointing at `inc`).
void ClipFaces(const OrientedBox& ref, const Vec3& ref_normal,
               const OrientedBox& inc, double margin, bool ref_is_a,
               Manifold& out) {
  // Reference face: the ref axis most aligned with ref_normal.
  int ref_axis = 0;
  double best = -1.0;
  for (int i = 0; i < 3; ++i) {
    const double d = std::abs(ref.axes.col(i).dot(ref_normal));
    if (d > best) {
      best = d;
      ref_axis = i;
    }
  }
  const Vec3 n_ref = ref.axes.col(ref_axis) *
                     (ref.axes.col(ref_axis).dot(ref_normal) >= 0.0 ? 1.0 : -1.0);
  const Vec3 ref_center = ref.center + n_ref * ref.half[ref_axis];
  const int u = (ref_axis + 1) % 3;
  const int w = (ref_axis + 2) % 3;

  // Incident face: the inc face whose outward normal is most anti-parallel.
  int inc_axis = 0;
  best = -1.0;
  for (int i = 0; i < 3; ++i) {
    const double d = std::abs(inc.axes.col(i).dot(n_ref));
    if (d > best) {
      best = d;
      inc_axis = i;
    }
  }
  const Vec3 n_inc = inc.axes.col(inc_axis) *
                     (inc.axes.col(inc_axis).dot(n_ref) > 0.0 ? -1.0 : 1.0);
  const Vec3 inc_center = inc.center + n_inc * inc.half[inc_axis];
  const int iu = (inc_axis + 1) % 3;
  const int iw = (inc_axis + 2) % 3;
  const Vec3 eu = inc.axes.col(iu) * inc.half[iu];
  const Vec3 ew = inc.axes.col(iw) * inc.half[iw];

  Polygon poly;
  poly.count = 4;
  poly.v[0] = inc_center + eu + ew;
  poly.v[1] = inc_center - eu + ew;
  poly.v[2] = inc_center - eu - ew;
  poly.v[3] = inc_center + eu - ew;

  const Vec3 au = ref.axes.col(u);
  const Vec3 aw = ref.axes.col(w);
  const double cu = ref.center.dot(au);
  const double cw = ref.center.dot(aw);
  poly = ClipAgainstPlane(poly, au, cu + ref.half[u]);
  poly = ClipAgainstPlane(poly, -au, -cu + ref.half[u]);
  poly = ClipAgainstPlane(poly, aw, cw + ref.half[w]);
  poly = ClipAgainstPlane(poly, -aw, -cw + ref.half[w]);

  // Manifold normal always points from b toward a.
  out.normal = ref_is_a ? Vec3(-n_ref) : n_ref;
  out.face_contact = true;
  for (int i = 0; i < poly.count; ++i) {
    const double dist = (poly.v[i] - ref_center).dot(n_ref);
    const double depth = -dist;
    if (depth < -margin) continue;
    // Drop near-duplicate vertices produced by clipping through corners.
    bool dup = false;
    for (int j = 0; j < out.count; ++j) {
      if ((out.points[j].position - (poly.v[i] - 0.5 * dist * n_ref)).squaredNorm() <
          1e-18) {
        dup = true;
        break;
      }
    }
    if (!dup) out.Add(poly.v[i] - 0.5 * dist * n_ref, depth);
  }
}

}  // namespace

void TangentBasis(const Vec3& n, Vec3& t1, Vec3& t2) {
  // Pick the world axis least aligned with n to seed the first tangent.
  const Vec3 a = n.cwiseAbs();
  Vec3 seed;
  if (a.x() <= a.y() && a.x() <= a.z()) {
    seed = Vec3::UnitX();
  } else if (a.y() <= a.z()) {
    seed = Vec3::UnitY();
  } else {
    seed = Vec3::UnitZ();
  }
  t1 = (seed - n * n.dot(seed)).normalized();
  t2 = n.cross(t1);
}

std::optional<Manifold> CollideBoxes(const OrientedBox& a, const OrientedBox& b,
                                     double margin) {
  const Vec3 d = b.center - a.center;
  const Mat3& A = a.axes;
  const Mat3& B = b.axes;
  Mat3 R = A.transpose() * B;
  Mat3 absR = R.cwiseAbs().array() + 1e-12;

  // Axis type: 0..2 face of a, 3..5 face of b, 6..14 edge pairs.
  double best_face_sep = -std::numeric_limits<double>::infinity();
  int best_face = -1;
  Vec3 best_face_axis;

  const Vec3 d_a = A.transpose() * d;
  for (int i = 0; i < 3; ++i) {
    const double rb = b.half.dot(absR.row(i));
    const double sep = std::abs(d_a[i]) - (a.half[i] + rb);
    if (sep > margin) return std::nullopt;
    if (sep > best_face_sep) {
      best_face_sep = sep;
      best_face = i;
      best_face_axis = A.col(i);
    }
  }
  const Vec3 d_b = B.transpose() * d;
  for (int j = 0; j < 3; ++j) {
    const double ra = a.half.dot(absR.col(j));
    const double sep = std::abs(d_b[j]) - (ra + b.half[j]);
    if (sep > margin) return std::nullopt;
    if (sep > best_face_sep + 1e-12) {
      best_face_sep = sep;
      best_face = 3 + j;
      best_face_axis = B.col(j);
    }
  }

  double best_edge_sep = -std::numeric_limits<double>::infinity();
  int edge_i = -1, edge_j = -1;
  Vec3 best_edge_axis;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      Vec3 L = A.col(i).cross(B.col(j));
      const double len = L.norm();
      if (len < 1e-6) continue;
      L /= len;
      double ra = 0.0, rb = 0.0;
      for (int k = 0; k < 3; ++k) {
        ra += a.half[k] * std::abs(A.col(k).dot(L));
        rb += b.half[k] * std::abs(B.col(k).dot(L));
      }
      const double sep = std::abs(d.dot(L)) - (ra + rb);
      if (sep > margin) return std::nullopt;
      if (sep > best_edge_sep) {
        best_edge_sep = sep;
        edge_i = i;
        edge_j = j;
        best_edge_axis = L;
      }
    }
  }

  Manifold m;
  if (edge_i >= 0 && best_edge_sep > best_face_sep + kEdgeBias) {
    // Edge-edge: a single point between the two supporting edges.
    Vec3 n = best_edge_axis;
    if (n.dot(a.center - b.center) < 0.0) n = -n;
    Vec3 pa = a.center;
    for (int k = 0; k < 3; ++k) {
      if (k == edge_i) continue;
      pa += a.half[k] * (A.col(k).dot(-n) >= 0.0 ? 1.0 : -1.0) * A.col(k);
    }
    Vec3 pb = b.center;
    for (int k = 0; k < 3; ++k) {
      if (k == edge_j) continue;
      pb += b.half[k] * (B.col(k).dot(n) >= 0.0 ? 1.0 : -1.0) * B.col(k);
    }
    Vec3 ca, cb;
    ClosestSegmentPoints(pa, A.col(edge_i) * a.half[edge_i], pb,
                         B.col(edge_j) * b.half[edge_j], ca, cb);
    m.normal = n;
    m.face_contact = false;
    m.Add(0.5 * (ca + cb), -best_edge_sep);
    return m;
  }

  Vec3 n = best_face_axis;
  if (n.dot(a.center - b.center) < 0.0) n = -n;
  if (best_face < 3) {
    ClipFaces(a, -n, b, margin, /*ref_is_a=*/true, m);
  } else {
    ClipFaces(b, n, a, margin, /*ref_is_a=*/false, m);
  }
  if (m.count == 0) return std::nullopt;
  return m;
}

std::optional<Manifold> CollideBoxFloor(const OrientedBox& a, double margin) {
  // Quick reject on the lowest possible corner height.
  const double reach = a.half.dot(a.axes.row(2).cwiseAbs());
  if (a.center.z() - reach > margin) return std::nullopt;
  Manifold m;
  m.normal = Vec3::UnitZ();
  for (int c = 0; c < 8; ++c) {
    Vec3 p = a.center;
    for (int k = 0; k < 3; ++k) {
      p += ((c >> k) & 1 ? 1.0 : -1.0) * a.half[k] * a.axes.col(k);
    }
    if (p.z() <= margin) {
      const double depth = -p.z();
      m.Add(Vec3(p.x(), p.y(), 0.5 * p.z()), depth);
    }
  }
  if (m.count == 0) return std::nullopt;
  return m;
}

void ReduceManifold(Manifold& m) {
  if (m.count <= 4) return;
  std::array<ManifoldPoint, 4> keep;
  int i0 = 0;
  for (int i = 1; i < m.count; ++i) {
    if (m.points[i].depth > m.points[i0].depth + 1e-12) i0 = i;
  }
  int i1 = -1;
  double far = -1.0;
  for (int i = 0; i < m.count; ++i) {
    const double d2 = (m.points[i].position - m.points[i0].position).squaredNorm();
    if (d2 > far) {
      far = d2;
      i1 = i;
    }
  }
  const Vec3 p0 = m.points[i0].position;
  const Vec3 e = m.points[i1].position - p0;
  int i2 = -1, i3 = -1;
  double amax = 0.0, amin = 0.0;
  for (int i = 0; i < m.count; ++i) {
    const double area = e.cross(m.points[i].position - p0).dot(m.normal);
    if (i2 < 0 || area > amax) {
      amax = area;
      i2 = i;
    }
    if (i3 < 0 || area < amin) {
      amin = area;
      i3 = i;
    }
  }
  int count = 0;
  for (int idx : {i0, i1, i2, i3}) {
    bool seen = false;
    for (int j = 0; j < count; ++j) {
      if ((keep[j].position - m.points[idx].position).squaredNorm() < 1e-18) seen = true;
    }
    if (!seen) keep[count++] = m.points[idx];
  }
  for (int j = 0; j < count; ++j) m.points[j] = keep[j];
  m.count = count;
}

}  // namespace builderbench
