#include "builderbench/stability.h"

#include <cmath>
#include <numbers>
#include <queue>

#include "builderbench/geometry.h"
#include "builderbench/lp.h"

namespace builderbench {
namespace {

// Torque rows are expressed in units of the cube half extent.
constexpr double kLength = kCubeHalfExtent;
constexpr double kSettleTol = 5e-3;

OrientedBox BoxOf(const CubePose& p) {
  OrientedBox b;
  b.center = p.position;
  b.axes = p.orientation.toRotationMatrix();
  b.half = Vec3::Constant(kCubeHalfExtent);
  return b;
}

// Generators of the box friction pyramid: n + mu (s1 t1 + s2 t2).
std::array<Vec3, 4> PyramidEdges(const Vec3& n, double mu) {
  Vec3 t1, t2;
  TangentBasis(n, t1, t2);
  return {n + mu * (t1 + t2), n + mu * (t1 - t2), n + mu * (-t1 + t2), n + mu * (-t1 - t2)};
}

struct EquilibriumLp {
  LinearProgram lp;
  // (patch, point) for each group of 4 generator columns.
  std::vector<std::pair<int, int>> columns;
  std::vector<Vec3> generators;
};

// Builds the balance equations. When `shifted` is non-empty an extra last
// variable e scales a COM shift of e * L * direction on the flagged cubes.
EquilibriumLp BuildLp(const Structure& s, const std::vector<ContactPatch>& patches,
                      double mu, const std::vector<char>& shifted, const Vec3& direction) {
  EquilibriumLp out;
  const int n = static_cast<int>(s.size());
  for (int p = 0; p < static_cast<int>(patches.size()); ++p) {
    const auto edges = PyramidEdges(patches[p].normal, mu);
    for (int q = 0; q < static_cast<int>(patches[p].points.size()); ++q) {
      out.columns.emplace_back(p, q);
      for (const Vec3& e : edges) out.generators.push_back(e);
    }
  }
  const bool with_shift = !shifted.empty();
  const int nv = static_cast<int>(out.generators.size()) + (with_shift ? 1 : 0);
  LinearProgram& lp = out.lp;
  lp.num_vars = nv;
  lp.c.assign(nv, 0.0);
  lp.a_eq.assign(6 * n, std::vector<double>(nv, 0.0));
  lp.b_eq.assign(6 * n, 0.0);
  for (int c = 0; c < n; ++c) lp.b_eq[6 * c + 2] = 1.0;  // supports one weight

  for (size_t col = 0; col < out.columns.size(); ++col) {
    const auto [p, q] = out.columns[col];
    const ContactPatch& patch = patches[p];
    const Vec3& point = patch.points[q];
    for (int g = 0; g < 4; ++g) {
      const int var = static_cast<int>(col) * 4 + g;
      const Vec3& f = out.generators[var];
      auto add = [&](int body, double sign) {
        const Vec3 r = (point - s[body].position) / kLength;
        const Vec3 torque = r.cross(f);
        for (int k = 0; k < 3; ++k) {
          lp.a_eq[6 * body + k][var] += sign * f[k];
          lp.a_eq[6 * body + 3 + k][var] += sign * torque[k];
        }
      };
      add(patch.body_a, 1.0);
      if (patch.body_b != kFloor) add(patch.body_b, -1.0);
    }
  }
  if (with_shift) {
    // Gravity (0,0,-1) acting at the shifted COM adds torque e * (d x -z).
    const Vec3 torque = direction.cross(Vec3(0.0, 0.0, -1.0));
    for (int c = 0; c < n; ++c) {
      if (!shifted[c]) continue;
      for (int k = 0; k < 3; ++k) lp.a_eq[6 * c + 3 + k][nv - 1] = torque[k];
    }
  }
  return out;
}

double MaxShift(const Structure& s, const std::vector<ContactPatch>& patches,
                const StabilityOptions& options, const std::vector<char>& shifted,
                const Vec3& direction) {
  EquilibriumLp eq = BuildLp(s, patches, options.friction_mu, shifted, direction);
  LinearProgram& lp = eq.lp;
  const int nv = lp.num_vars;
  lp.c[nv - 1] = -1.0;
  std::vector<double> cap(nv, 0.0);
  cap[nv - 1] = 1.0;
  lp.a_ub.push_back(cap);
  lp.b_ub.push_back(options.margin_cap / kLength);
  const LpResult r = SolveLp(lp);
  if (r.status != LpStatus::kOptimal) return 0.0;
  return std::max(r.x[nv - 1], 0.0) * kLength;
}

}  // namespace

std::string ToString(StabilityClass c) {
  switch (c) {
    case StabilityClass::kStable:
      return "stable";
    case StabilityClass::kUnstable:
      return "unstable";
    case StabilityClass::kFloating:
      return "floating";
  }
  return "unknown";
}

std::vector<ContactPatch> BuildContactPatches(const Structure& s,
                                              const StabilityOptions& options) {
  std::vector<ContactPatch> patches;
  const int n = static_cast<int>(s.size());
  const double tol = options.contact_tol;
  for (int i = 0; i < n; ++i) {
    const OrientedBox box = BoxOf(s[i]);
    const auto m = CollideBoxFloor(box, tol);
    if (!m) continue;
    ContactPatch patch;
    patch.body_a = i;
    patch.body_b = kFloor;
    patch.normal = Vec3::UnitZ();
    for (int k = 0; k < m->count; ++k) {
      if (m->points[k].depth > tol) {
        throw OverlapError("cube " + std::to_string(i) + " penetrates the floor");
      }
      const Vec3& p = m->points[k].position;
      patch.points.emplace_back(p.x(), p.y(), 0.0);
    }
    patches.push_back(std::move(patch));
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto m = CollideBoxes(BoxOf(s[i]), BoxOf(s[j]), tol);
      if (!m) continue;
      ContactPatch patch;
      patch.body_a = i;
      patch.body_b = j;
      patch.normal = m->normal;
      for (int k = 0; k < m->count; ++k) {
        if (m->points[k].depth > tol) {
          throw OverlapError("cubes " + std::to_string(i) + " and " + std::to_string(j) +
                             " overlap");
        }
        patch.points.push_back(m->points[k].position);
      }
      patches.push_back(std::move(patch));
    }
  }
  return patches;
}

EquilibriumResult EquilibriumFeasible(const Structure& s, const StabilityOptions& options) {
  const auto patches = BuildContactPatches(s, options);
  EquilibriumResult out;
  if (s.empty()) {
    out.feasible = true;
    return out;
  }
  EquilibriumLp eq = BuildLp(s, patches, options.friction_mu, {}, Vec3::Zero());
  const LpResult r = SolveLp(eq.lp);
  out.feasible = r.status == LpStatus::kOptimal;
  if (!out.feasible) return out;
  for (size_t col = 0; col < eq.columns.size(); ++col) {
    Vec3 f = Vec3::Zero();
    for (int g = 0; g < 4; ++g) f += r.x[col * 4 + g] * eq.generators[col * 4 + g];
    out.forces.push_back({eq.columns[col].first, eq.columns[col].second, f});
  }
  return out;
}

double StabilityMargin(const Structure& s, const StabilityOptions& options) {
  if (s.empty()) return options.margin_cap;
  const auto patches = BuildContactPatches(s, options);
  const int n = static_cast<int>(s.size());
  double margin = options.margin_cap;
  for (int k = 0; k < 8; ++k) {
    const double angle = k * std::numbers::pi / 4.0;
    const Vec3 dir(std::cos(angle), std::sin(angle), 0.0);
    for (int c = -1; c < n; ++c) {
      std::vector<char> shifted(n, c < 0 ? 1 : 0);
      if (c >= 0) shifted[c] = 1;
      if (c < 0 && n == 1) continue;  // same as the single-cube case
      margin = std::min(margin, MaxShift(s, patches, options, shifted, dir));
      if (margin <= 0.0) return 0.0;
    }
  }
  return margin;
}

bool HasFloatingCube(const Structure& s, const std::vector<ContactPatch>& patches) {
  const int n = static_cast<int>(s.size());
  std::vector<std::vector<int>> adj(n);
  std::vector<char> grounded(n, 0);
  std::queue<int> frontier;
  for (const ContactPatch& p : patches) {
    if (p.body_b == kFloor) {
      if (!grounded[p.body_a]) frontier.push(p.body_a);
      grounded[p.body_a] = 1;
    } else {
      adj[p.body_a].push_back(p.body_b);
      adj[p.body_b].push_back(p.body_a);
    }
  }
  while (!frontier.empty()) {
    const int c = frontier.front();
    frontier.pop();
    for (int o : adj[c]) {
      if (!grounded[o]) {
        grounded[o] = 1;
        frontier.push(o);
      }
    }
  }
  for (int c = 0; c < n; ++c) {
    if (!grounded[c]) return true;
  }
  return false;
}

StabilityVerdict Classify(const Structure& s, const StabilityOptions& options) {
  StabilityVerdict v;
  const auto patches = BuildContactPatches(s, options);
  if (HasFloatingCube(s, patches)) {
    v.classification = StabilityClass::kFloating;
    return v;
  }
  v.feasible = EquilibriumFeasible(s, options).feasible;
  v.margin = v.feasible ? StabilityMargin(s, options) : 0.0;
  v.classification = v.feasible && v.margin >= options.delta ? StabilityClass::kStable
                                                             : StabilityClass::kUnstable;
  return v;
}

bool SettlesUnderPerturbation(const Structure& s, const PhysicsParams& params,
                              double kick_speed, int max_substeps) {
  std::vector<RigidBody> cubes;
  for (const CubePose& p : s) {
    RigidBody c = RigidBody::Cube(p.position);
    c.orientation = p.orientation;
    cubes.push_back(c);
  }
  const WorldState start = MakeStaticWorld(cubes);
  const SettleResult base = Settle(start, max_substeps, kSettleTol, params);
  if (!base.settled) return false;
  const Vec3 kicks[4] = {Vec3::UnitX(), -Vec3::UnitX(), Vec3::UnitY(), -Vec3::UnitY()};
  for (const Vec3& d : kicks) {
    WorldState w = start;
    for (RigidBody& c : w.cubes) c.linear_velocity = kick_speed * d;
    if (!Settle(w, max_substeps, kSettleTol, params).settled) return false;
  }
  return true;
}

}  // namespace builderbench
