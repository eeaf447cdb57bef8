#include "builderbench/physics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace builderbench {
namespace {

// Caps the Baumgarte push-out speed so deep pinches cannot explode.
constexpr double kMaxBiasVelocity = 0.5;
// Warm-start match radius, in body-a local coordinates.
constexpr double kWarmStartRadius2 = 2e-3 * 2e-3;
constexpr int kSettleWindow = 50;
constexpr double kSettleDisplacement = 0.002;

struct SolverBody {
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec3 w = Vec3::Zero();
  double inv_mass = 0.0;
  Mat3 inv_inertia = Mat3::Zero();
  // Bodies carried by the gripper (pads, a held cube) move with the
  // gripper body at index `parent`; `v` then holds only their velocity
  // relative to the gripper's translation.
  int parent = -1;
};

struct Constraint {
  int a, b;  // solver body index; -1 for the floor
  Vec3 ra, rb;
  Vec3 n, t1, t2;
  double mass_n, mass_t1, mass_t2;
  double bias;
  double jn = 0.0, jt1 = 0.0, jt2 = 0.0;
  Vec3 local_a;
};

bool CubeIsKinematic(const WorldState& world, int i) {
  return world.gripper.held_cube && *world.gripper.held_cube == i;
}

void AppendManifold(const Manifold& m, int a, int b, std::vector<Contact>& out) {
  for (int i = 0; i < m.count; ++i) {
    out.push_back({a, b, m.points[i].position, m.normal, m.points[i].depth});
  }
}

void DetectInto(const WorldState& world, const PhysicsParams& params,
                std::vector<Contact>& out) {
  out.clear();
  const int n = world.n();
  const double margin = params.penetration_slop;
  // Bounding-sphere prefilter radius for two cubes.
  const double cube_reach = 2.0 * std::sqrt(3.0) * kCubeHalfExtent + margin;

  std::array<OrientedBox, 9> local_boxes;
  std::vector<OrientedBox> boxes;
  OrientedBox* box_ptr = local_boxes.data();
  if (n > static_cast<int>(local_boxes.size())) {
    boxes.resize(n);
    box_ptr = boxes.data();
  }
  for (int i = 0; i < n; ++i) box_ptr[i] = world.cubes[i].Box();

  for (int i = 0; i < n; ++i) {
    if (auto m = CollideBoxFloor(box_ptr[i], margin)) {
      ReduceManifold(*m);
      AppendManifold(*m, i, kFloor, out);
    }
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (CubeIsKinematic(world, i) && CubeIsKinematic(world, j)) continue;
      if ((box_ptr[i].center - box_ptr[j].center).squaredNorm() > cube_reach * cube_reach) {
        continue;
      }
      if (auto m = CollideBoxes(box_ptr[i], box_ptr[j], margin)) {
        ReduceManifold(*m);
        AppendManifold(*m, i, j, out);
      }
    }
  }
  const auto pads = PadBoxes(world.gripper);
  const double pad_reach = std::sqrt(3.0) * kCubeHalfExtent +
                           Vec3(kPadHalfWidth, kPadHalfThickness, kPadHalfHeight).norm() +
                           margin;
  for (int p = 0; p < 2; ++p) {
    for (int i = 0; i < n; ++i) {
      if (CubeIsKinematic(world, i)) continue;
      if ((box_ptr[i].center - pads[p].center).squaredNorm() > pad_reach * pad_reach) {
        continue;
      }
      if (auto m = CollideBoxes(box_ptr[i], pads[p], margin)) {
        ReduceManifold(*m);
        AppendManifold(*m, i, n + p, out);
      }
    }
  }
}

Mat3 WorldInverseInertia(const RigidBody& body) {
  const Mat3 R = body.orientation.toRotationMatrix();
  return R * body.inertia.cwiseInverse().asDiagonal() * R.transpose();
}

// Velocity of a kinematic pad at world point p.
void PadVelocity(const GripperState& g, int side, const Vec3& pad_center, Vec3& v,
                 Vec3& w) {
  const Vec3 omega(0.0, 0.0, g.yaw_rate);
  const Vec3 local_y = g.Orientation() * Vec3::UnitY();
  const double sign = side == 0 ? -1.0 : 1.0;
  v = g.linear_velocity + omega.cross(pad_center - g.position) +
      sign * 0.5 * g.finger_rate * local_y;
  w = omega;
}

double EffectiveMass(const SolverBody* a, const SolverBody* b, const Vec3& ra,
                     const Vec3& rb, const Vec3& dir) {
  double k = 0.0;
  if (a) {
    const Vec3 c = ra.cross(dir);
    k += a->inv_mass + c.dot(a->inv_inertia * c);
  }
  if (b) {
    const Vec3 c = rb.cross(dir);
    k += b->inv_mass + c.dot(b->inv_inertia * c);
  }
  return k > 0.0 ? 1.0 / k : 0.0;
}

void ApplyImpulse(SolverBody* a, SolverBody* b, const Vec3& ra, const Vec3& rb,
                  const Vec3& impulse) {
  if (a) {
    a->v += a->inv_mass * impulse;
    a->w += a->inv_inertia * ra.cross(impulse);
  }
  if (b) {
    b->v -= b->inv_mass * impulse;
    b->w -= b->inv_inertia * rb.cross(impulse);
  }
}

Vec3 PointVelocity(const std::vector<SolverBody>& bodies, int id, const Vec3& r) {
  if (id < 0) return Vec3::Zero();
  const SolverBody& b = bodies[id];
  Vec3 v = b.v + b.w.cross(r);
  if (b.parent >= 0) v += bodies[b.parent].v;
  return v;
}

// The body that receives impulses applied at `id`, or null when immovable.
SolverBody* Dynamic(std::vector<SolverBody>& bodies, int id) {
  if (id < 0) return nullptr;
  SolverBody* b = &bodies[id];
  if (b->parent >= 0) return &bodies[b->parent];
  return b->inv_mass > 0.0 ? b : nullptr;
}

void SyncHeldCube(WorldState& world) {
  GripperState& g = world.gripper;
  if (!g.held_cube) return;
  RigidBody& c = world.cubes[*g.held_cube];
  const Quat qg = g.Orientation();
  const Vec3 r = qg * g.held_offset;
  c.position = g.position + r;
  c.orientation = (qg * g.held_rotation).normalized();
  const Vec3 omega(0.0, 0.0, g.yaw_rate);
  c.linear_velocity = g.linear_velocity + omega.cross(r);
  c.angular_velocity = omega;
}

void DriveGripper(GripperState& g, const PhysicsParams& params) {
  const double dt = params.substep_dt;
  const Vec3 acc = params.gripper_kp * (g.setpoints.position - g.position) -
                   params.gripper_kd * g.linear_velocity;
  g.linear_velocity += dt * acc;
  g.position += dt * g.linear_velocity;
  const Vec3 lo(-kWorkspaceXY, -kWorkspaceXY, kWorkspaceZMin);
  const Vec3 hi(kWorkspaceXY, kWorkspaceXY, kWorkspaceZMax);
  for (int k = 0; k < 3; ++k) {
    if (g.position[k] < lo[k] || g.position[k] > hi[k]) {
      g.position[k] = std::clamp(g.position[k], lo[k], hi[k]);
      g.linear_velocity[k] = 0.0;
    }
  }

  const double yaw_acc = params.gripper_kp * (g.setpoints.yaw - g.yaw) -
                         params.gripper_kd * g.yaw_rate;
  g.yaw_rate += dt * yaw_acc;
  g.yaw += dt * g.yaw_rate;

  const double max_step = params.finger_speed * dt;
  const double lower = g.held_cube ? kCubeSize : 0.0;
  const double target = std::clamp(g.setpoints.finger_width, lower, kMaxFingerWidth);
  const double prev = g.finger_width;
  g.finger_width = std::clamp(prev + std::clamp(target - prev, -max_step, max_step),
                              0.0, kMaxFingerWidth);
  g.finger_rate = (g.finger_width - prev) / dt;
}

bool Finite(const Vec3& v) { return v.allFinite(); }

}  // namespace

RigidBody RigidBody::Cube(const Vec3& position, double yaw, double mass) {
  RigidBody b;
  b.position = position;
  b.orientation = YawQuat(yaw);
  b.half_extent = kCubeHalfExtent;
  b.mass = mass;
  const double s = 2.0 * kCubeHalfExtent;
  b.inertia = Vec3::Constant(mass / 6.0 * s * s);
  b.kind = BodyKind::kCube;
  return b;
}

OrientedBox RigidBody::Box() const {
  OrientedBox box;
  box.center = position;
  box.axes = orientation.toRotationMatrix();
  box.half = Vec3::Constant(half_extent);
  return box;
}

std::string PhysicsParams::Canonical() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "substep_dt=%.17g;substeps_per_control=%d;gravity=%.17g;friction_mu=%.17g;"
                "restitution=%.17g;solver_iterations=%d;baumgarte_beta=%.17g;"
                "penetration_slop=%.17g;gripper_kp=%.17g;gripper_kd=%.17g;"
                "finger_speed=%.17g",
                substep_dt, substeps_per_control, gravity, friction_mu, restitution,
                solver_iterations, baumgarte_beta, penetration_slop, gripper_kp, gripper_kd,
                finger_speed);
  return buf;
}

std::array<OrientedBox, 2> PadBoxes(const GripperState& g) {
  const Mat3 R = g.Orientation().toRotationMatrix();
  const Vec3 y = R.col(1);
  const double offset = 0.5 * g.finger_width + kPadHalfThickness;
  std::array<OrientedBox, 2> pads;
  for (int side = 0; side < 2; ++side) {
    pads[side].center = g.position + (side == 0 ? -offset : offset) * y;
    pads[side].axes = R;
    pads[side].half = Vec3(kPadHalfWidth, kPadHalfThickness, kPadHalfHeight);
  }
  return pads;
}

std::vector<Contact> DetectContacts(const WorldState& world, const PhysicsParams& params) {
  std::vector<Contact> out;
  DetectInto(world, params, out);
  return out;
}

void SolveContacts(WorldState& world, const std::vector<Contact>& contacts,
                   const PhysicsParams& params) {
  const int n = world.n();
  const double dt = params.substep_dt;
  const double mu = params.friction_mu;

  thread_local std::vector<SolverBody> bodies;
  thread_local std::vector<Constraint> rows;
  bodies.assign(n + 3, SolverBody{});
  for (int i = 0; i < n; ++i) {
    const RigidBody& c = world.cubes[i];
    SolverBody& s = bodies[i];
    s.x = c.position;
    s.v = c.linear_velocity;
    s.w = c.angular_velocity;
    if (CubeIsKinematic(world, i)) {
      s.parent = n + 2;
      s.v -= world.gripper.linear_velocity;
    } else {
      s.inv_mass = 1.0 / c.mass;
      s.inv_inertia = WorldInverseInertia(c);
    }
  }
  const auto pads = PadBoxes(world.gripper);
  for (int p = 0; p < 2; ++p) {
    SolverBody& s = bodies[n + p];
    s.x = pads[p].center;
    PadVelocity(world.gripper, p, pads[p].center, s.v, s.w);
    s.v -= world.gripper.linear_velocity;
    s.parent = n + 2;
  }
  SolverBody& gripper = bodies[n + 2];
  gripper.x = world.gripper.position;
  gripper.v = world.gripper.linear_velocity;
  gripper.inv_mass = 1.0 / kGripperMass;

  rows.clear();
  rows.reserve(contacts.size());
  for (const Contact& c : contacts) {
    Constraint row;
    row.a = c.body_a;
    row.b = c.body_b;
    SolverBody* a = row.a >= 0 ? &bodies[row.a] : nullptr;
    SolverBody* b = row.b >= 0 ? &bodies[row.b] : nullptr;
    row.ra = a ? Vec3(c.point - a->x) : Vec3::Zero();
    row.rb = b ? Vec3(c.point - b->x) : Vec3::Zero();
    row.n = c.normal;
    TangentBasis(row.n, row.t1, row.t2);
    SolverBody* da = Dynamic(bodies, row.a);
    SolverBody* db = Dynamic(bodies, row.b);
    // Carried bodies only translate with the gripper.
    const Vec3 ra_eff = da && da->inv_inertia.isZero() ? Vec3::Zero() : row.ra;
    const Vec3 rb_eff = db && db->inv_inertia.isZero() ? Vec3::Zero() : row.rb;
    row.mass_n = EffectiveMass(da, db, ra_eff, rb_eff, row.n);
    row.mass_t1 = EffectiveMass(da, db, ra_eff, rb_eff, row.t1);
    row.mass_t2 = EffectiveMass(da, db, ra_eff, rb_eff, row.t2);
    const double depth = c.penetration_depth;
    if (depth < 0.0) {
      // Speculative: allow closing the gap within this substep.
      row.bias = depth / dt;
    } else {
      row.bias = std::min(params.baumgarte_beta / dt *
                              std::max(depth - params.penetration_slop, 0.0),
                          kMaxBiasVelocity);
    }
    const RigidBody& body_a = world.cubes[row.a];
    row.local_a = body_a.orientation.conjugate() * (c.point - body_a.position);
    for (const ContactImpulse& w : world.warm_start) {
      if (w.body_a == row.a && w.body_b == row.b &&
          (w.local_point - row.local_a).squaredNorm() < kWarmStartRadius2) {
        row.jn = w.normal;
        row.jt1 = w.tangent1;
        row.jt2 = w.tangent2;
        break;
      }
    }
    if (row.mass_n == 0.0) continue;
    rows.push_back(row);
  }

  for (Constraint& row : rows) {
    SolverBody* a = Dynamic(bodies, row.a);
    SolverBody* b = Dynamic(bodies, row.b);
    ApplyImpulse(a, b, row.ra, row.rb, row.jn * row.n + row.jt1 * row.t1 + row.jt2 * row.t2);
  }

  for (int it = 0; it < params.solver_iterations; ++it) {
    for (Constraint& row : rows) {
      SolverBody* a = Dynamic(bodies, row.a);
      SolverBody* b = Dynamic(bodies, row.b);

      Vec3 vrel = PointVelocity(bodies, row.a, row.ra) - PointVelocity(bodies, row.b, row.rb);
      const double vn = vrel.dot(row.n);
      double dj = row.mass_n * (row.bias - vn);
      const double jn_old = row.jn;
      row.jn = std::max(jn_old + dj, 0.0);
      dj = row.jn - jn_old;
      ApplyImpulse(a, b, row.ra, row.rb, dj * row.n);

      const double limit = mu * row.jn;
      vrel = PointVelocity(bodies, row.a, row.ra) - PointVelocity(bodies, row.b, row.rb);
      double dt1 = -row.mass_t1 * vrel.dot(row.t1);
      const double jt1_old = row.jt1;
      row.jt1 = std::clamp(jt1_old + dt1, -limit, limit);
      dt1 = row.jt1 - jt1_old;
      double dt2 = -row.mass_t2 * vrel.dot(row.t2);
      const double jt2_old = row.jt2;
      row.jt2 = std::clamp(jt2_old + dt2, -limit, limit);
      dt2 = row.jt2 - jt2_old;
      ApplyImpulse(a, b, row.ra, row.rb, dt1 * row.t1 + dt2 * row.t2);
    }
  }

  for (int i = 0; i < n; ++i) {
    if (CubeIsKinematic(world, i)) continue;
    world.cubes[i].linear_velocity = bodies[i].v;
    world.cubes[i].angular_velocity = bodies[i].w;
  }
  world.gripper.linear_velocity = gripper.v;
  SyncHeldCube(world);
  world.warm_start.clear();
  for (const Constraint& row : rows) {
    world.warm_start.push_back({row.a, row.b, row.local_a, row.jn, row.jt1, row.jt2});
  }
}

void Substep(WorldState& world, const PhysicsParams& params) {
  const double dt = params.substep_dt;
  DriveGripper(world.gripper, params);
  SyncHeldCube(world);

  const int n = world.n();
  for (int i = 0; i < n; ++i) {
    if (CubeIsKinematic(world, i)) continue;
    world.cubes[i].linear_velocity.z() -= params.gravity * dt;
  }

  thread_local std::vector<Contact> contacts;
  DetectInto(world, params, contacts);
  GripperState& g = world.gripper;
  if (g.finger_rate < 0.0) {
    for (const Contact& c : contacts) {
      if (c.body_b >= n && c.penetration_depth > params.penetration_slop) {
        // Closing fingers stall against a cube.
        g.finger_width -= dt * g.finger_rate;
        g.finger_rate = 0.0;
        break;
      }
    }
  }
  SolveContacts(world, contacts, params);

  for (int i = 0; i < n; ++i) {
    if (CubeIsKinematic(world, i)) continue;
    RigidBody& c = world.cubes[i];
    c.position += dt * c.linear_velocity;
    const Vec3& w = c.angular_velocity;
    Quat dq(0.0, 0.5 * dt * w.x(), 0.5 * dt * w.y(), 0.5 * dt * w.z());
    dq = dq * c.orientation;
    c.orientation.coeffs() += dq.coeffs();
    c.orientation.normalize();
  }

  if (!IsFinite(world)) {
    throw NonFiniteState("physics state became non-finite at t=" + std::to_string(world.t));
  }
}

void StepPhysicsInPlace(WorldState& world, const PhysicsParams& params) {
  for (int s = 0; s < params.substeps_per_control; ++s) Substep(world, params);
}

WorldState StepPhysics(WorldState world, const PhysicsParams& params) {
  StepPhysicsInPlace(world, params);
  return world;
}

void UpdateGrasp(WorldState& world) {
  GripperState& g = world.gripper;
  if (g.held_cube) {
    if (g.setpoints.finger_width > kGraspReleaseWidth) {
      // The cube keeps the gripper velocity it was carried with.
      g.held_cube.reset();
    }
    return;
  }
  if (g.setpoints.finger_width > kGraspAttachWidth) return;
  const Quat qg = g.Orientation();
  int best = -1;
  double best_d = kGraspRadius;
  for (int i = 0; i < world.n(); ++i) {
    const Vec3 d = world.cubes[i].position - g.position;
    const double horizontal = std::hypot(d.x(), d.y());
    if (horizontal < best_d && std::abs(d.z()) <= kPadHalfHeight) {
      best = i;
      best_d = horizontal;
    }
  }
  if (best < 0) return;
  const RigidBody& c = world.cubes[best];
  g.held_cube = best;
  g.held_offset = qg.conjugate() * (c.position - g.position);
  g.held_rotation = (qg.conjugate() * c.orientation).normalized();
  world.warm_start.clear();
}

SettleResult Settle(WorldState world, int max_substeps, double tol,
                    const PhysicsParams& params) {
  std::vector<Vec3> start;
  start.reserve(world.cubes.size());
  for (const RigidBody& c : world.cubes) start.push_back(c.position);

  SettleResult result;
  int quiet = 0;
  bool converged = false;
  int steps = 0;
  for (; steps < max_substeps; ++steps) {
    Substep(world, params);
    bool still = true;
    for (const RigidBody& c : world.cubes) {
      if (c.linear_velocity.norm() >= tol || c.angular_velocity.norm() >= tol) {
        still = false;
        break;
      }
    }
    quiet = still ? quiet + 1 : 0;
    if (quiet >= kSettleWindow) {
      converged = true;
      ++steps;
      break;
    }
  }
  double max_disp = 0.0;
  for (size_t i = 0; i < start.size(); ++i) {
    max_disp = std::max(max_disp, (world.cubes[i].position - start[i]).norm());
  }
  result.world = std::move(world);
  result.substeps = steps;
  result.max_displacement = max_disp;
  result.settled = converged && max_disp < kSettleDisplacement;
  return result;
}

WorldState MakeStaticWorld(std::vector<RigidBody> cubes) {
  WorldState w;
  w.cubes = std::move(cubes);
  w.gripper.position = Vec3(-0.35, -0.35, 0.45);
  w.gripper.setpoints.position = w.gripper.position;
  return w;
}

bool IsFinite(const WorldState& world) {
  const GripperState& g = world.gripper;
  if (!Finite(g.position) || !Finite(g.linear_velocity) || !std::isfinite(g.yaw) ||
      !std::isfinite(g.yaw_rate) || !std::isfinite(g.finger_width)) {
    return false;
  }
  for (const RigidBody& c : world.cubes) {
    if (!Finite(c.position) || !Finite(c.linear_velocity) || !Finite(c.angular_velocity) ||
        !c.orientation.coeffs().allFinite()) {
      return false;
    }
  }
  return true;
}

}  // namespace builderbench
