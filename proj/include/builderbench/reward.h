#ifndef BUILDERBENCH_REWARD_H_
#define BUILDERBENCH_REWARD_H_

#include <span>
#include <string>
#include <vector>

#include "builderbench/assignment.h"
#include "builderbench/common.h"

namespace builderbench {

enum class RewardShape { kSparse, kDense };
enum class Matching { kInvariant, kSensitive };

struct RewardConfig {
  RewardShape shape = RewardShape::kDense;
  Matching matching = Matching::kInvariant;
  double threshold = kSuccessThreshold;
};

std::string ToString(RewardShape shape);
std::string ToString(Matching matching);
RewardShape ParseRewardShape(const std::string& s);
Matching ParseMatching(const std::string& s);

// Pairing of cubes to targets under a matching mode. Invariant solves the
// assignment; sensitive pairs cube i with target i.
Assignment MatchTargets(std::span<const Vec3> cubes, std::span<const Vec3> targets,
                        Matching matching);

// Sum over targets of 1 - tanh(d_i); in (0, k].
double DenseReward(std::span<const Vec3> cubes, std::span<const Vec3> targets,
                   const RewardConfig& config);

// 0 when every matched distance is strictly below the threshold, else -1.
double SparseReward(std::span<const Vec3> cubes, std::span<const Vec3> targets,
                    const RewardConfig& config);

double Reward(std::span<const Vec3> cubes, std::span<const Vec3> targets,
              const RewardConfig& config);

// Both rewards from a precomputed matching.
double DenseFromDistances(std::span<const double> distances);
double SparseFromDistances(std::span<const double> distances, double threshold);

}  // namespace builderbench

#endif  // BUILDERBENCH_REWARD_H_
