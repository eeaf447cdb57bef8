#include "builderbench/scripted.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace builderbench {
namespace {

constexpr double kAlignTol = 0.003;
constexpr double kHeldRadius = 0.015;
constexpr double kPlacedTol = 0.01;
constexpr double kHover = 0.06;

Vec3 At(const Observation& obs, size_t offset) {
  return Vec3(obs[offset], obs[offset + 1], obs[offset + 2]);
}

double Horizontal(const Vec3& a, const Vec3& b) { return (a - b).head<2>().norm(); }

}  // namespace

void ScriptedPolicy::Reset(uint64_t) {
  setpoint_.reset();
  release_steps_ = 0;
  pick_ = -1;
}

Action ScriptedPolicy::MoveTo(const Vec3& desired, double finger) {
  Action a{0.0, 0.0, 0.0, 0.0, finger};
  Vec3& sp = *setpoint_;
  for (int k = 0; k < 3; ++k) {
    a[k] = std::clamp((desired[k] - sp[k]) / kMoveScale, -1.0, 1.0);
    sp[k] += kMoveScale * a[k];
  }
  sp.x() = std::clamp(sp.x(), -kWorkspaceXY, kWorkspaceXY);
  sp.y() = std::clamp(sp.y(), -kWorkspaceXY, kWorkspaceXY);
  sp.z() = std::clamp(sp.z(), kWorkspaceZMin, kWorkspaceZMax);
  return a;
}

Action ScriptedPolicy::Act(const Observation& obs, std::span<const double> goal) {
  const Vec3 gripper = At(obs, 0);
  const double width = obs[10];
  if (!setpoint_) setpoint_ = gripper;
  const int n = static_cast<int>((obs.size() - 11) / 13);
  const int k = static_cast<int>(goal.size() / 3);
  std::vector<Vec3> cubes(n);
  for (int i = 0; i < n; ++i) cubes[i] = At(obs, 11 + 13 * i);
  std::vector<Vec3> targets(k);
  for (int j = 0; j < k; ++j) targets[j] = Vec3(goal[3 * j], goal[3 * j + 1], goal[3 * j + 2]);

  int held = -1;
  if (width < kMaxFingerWidth - 0.005) {
    double best = kHeldRadius;
    for (int i = 0; i < n; ++i) {
      const double d = (cubes[i] - gripper).norm();
      if (d < best) {
        best = d;
        held = i;
      }
    }
  }

  // Targets already filled by a free cube, and the cubes filling them.
  std::vector<char> cube_used(n, 0);
  int open_target = -1;
  for (int j = 0; j < k; ++j) {
    int filler = -1;
    for (int i = 0; i < n; ++i) {
      if (i != held && !cube_used[i] && (cubes[i] - targets[j]).norm() < kPlacedTol) filler = i;
    }
    if (filler >= 0) {
      cube_used[filler] = 1;
    } else if (open_target < 0) {
      open_target = j;
    }
  }

  double top = 0.0;
  for (int i = 0; i < n; ++i) {
    if (i != held) top = std::max(top, cubes[i].z());
  }
  for (const Vec3& t : targets) top = std::max(top, t.z());
  const double travel = std::min(top + kHover, kWorkspaceZMax - 0.05);

  if (release_steps_ > 0) {
    --release_steps_;
    return MoveTo(Vec3(setpoint_->x(), setpoint_->y(), travel), 1.0);
  }

  if (held >= 0) {
    if (open_target < 0) {
      release_steps_ = 10;
      return MoveTo(*setpoint_, 1.0);
    }
    const Vec3& target = targets[open_target];
    const Vec3 offset = cubes[held] - gripper;
    if (Horizontal(cubes[held], target) > kAlignTol) {
      if (gripper.z() < travel - 0.01 && Horizontal(cubes[held], target) > 0.02) {
        return MoveTo(Vec3(setpoint_->x(), setpoint_->y(), travel), -1.0);
      }
      return MoveTo(Vec3(target.x() - offset.x(), target.y() - offset.y(), travel), -1.0);
    }
    const Vec3 drop(target.x() - offset.x(), target.y() - offset.y(),
                    target.z() - offset.z() + 0.002);
    const bool last = open_target == k - 1;
    if ((cubes[held] - target).norm() < 0.004) {
      if (hold_ && last) return MoveTo(drop, -1.0);
      release_steps_ = 10;
      return MoveTo(*setpoint_, 1.0);
    }
    return MoveTo(drop, -1.0);
  }

  if (open_target < 0) return MoveTo(Vec3(setpoint_->x(), setpoint_->y(), travel), 1.0);

  // Nearest free cube to the open target, kept until it is placed.
  const Vec3& target = targets[open_target];
  const bool keep = pick_ >= 0 && pick_ < n && !cube_used[pick_];
  int pick = keep ? pick_ : -1;
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < n && !keep; ++i) {
    if (cube_used[i]) continue;
    const double d = (cubes[i] - target).norm();
    if (d < best) {
      best = d;
      pick = i;
    }
  }
  if (pick < 0) return MoveTo(*setpoint_, 1.0);
  pick_ = pick;
  const Vec3& cube = cubes[pick];
  const double hover = cube.z() + kHover;
  if (Horizontal(gripper, cube) > kAlignTol) {
    if (gripper.z() < cube.z() + 0.04 && Horizontal(gripper, cube) > 0.01) {
      return MoveTo(Vec3(setpoint_->x(), setpoint_->y(), std::max(hover, travel)), 1.0);
    }
    return MoveTo(Vec3(cube.x(), cube.y(), std::max(hover, travel)), 1.0);
  }
  if (std::abs(gripper.z() - cube.z()) < 0.005) return MoveTo(Vec3(cube.x(), cube.y(), cube.z()), -1.0);
  return MoveTo(Vec3(cube.x(), cube.y(), cube.z()), 1.0);
}

}  // namespace builderbench
