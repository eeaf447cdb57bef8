#include "builderbench/reward.h"

#include <cmath>

namespace builderbench {

std::string ToString(RewardShape shape) {
  return shape == RewardShape::kDense ? "dense" : "sparse";
}

std::string ToString(Matching matching) {
  return matching == Matching::kInvariant ? "invariant" : "sensitive";
}

RewardShape ParseRewardShape(const std::string& s) {
  if (s == "dense") return RewardShape::kDense;
  if (s == "sparse") return RewardShape::kSparse;
  throw ConfigError("unknown reward shape '" + s + "' (dense|sparse)");
}

Matching ParseMatching(const std::string& s) {
  if (s == "invariant") return Matching::kInvariant;
  if (s == "sensitive") return Matching::kSensitive;
  throw ConfigError("unknown matching '" + s + "' (invariant|sensitive)");
}

Assignment MatchTargets(std::span<const Vec3> cubes, std::span<const Vec3> targets,
                        Matching matching) {
  if (matching == Matching::kInvariant) return AssignTargets(cubes, targets);
  if (targets.size() > cubes.size()) throw DimensionMismatch("more targets than cubes");
  Assignment a;
  a.mapping.resize(targets.size());
  a.distances.resize(targets.size());
  for (size_t i = 0; i < targets.size(); ++i) {
    a.mapping[i] = static_cast<int>(i);
    a.distances[i] = (cubes[i] - targets[i]).norm();
    a.total_cost += a.distances[i];
  }
  return a;
}

double DenseFromDistances(std::span<const double> distances) {
  double r = 0.0;
  for (double d : distances) r += 1.0 - std::tanh(d);
  return r;
}

double SparseFromDistances(std::span<const double> distances, double threshold) {
  for (double d : distances) {
    if (!(d < threshold)) return -1.0;
  }
  return 0.0;
}

double DenseReward(std::span<const Vec3> cubes, std::span<const Vec3> targets,
                   const RewardConfig& config) {
  return DenseFromDistances(MatchTargets(cubes, targets, config.matching).distances);
}

double SparseReward(std::span<const Vec3> cubes, std::span<const Vec3> targets,
                    const RewardConfig& config) {
  return SparseFromDistances(MatchTargets(cubes, targets, config.matching).distances,
                             config.threshold);
}

double Reward(std::span<const Vec3> cubes, std::span<const Vec3> targets,
              const RewardConfig& config) {
  return config.shape == RewardShape::kDense ? DenseReward(cubes, targets, config)
                                             : SparseReward(cubes, targets, config);
}

}  // namespace builderbench
