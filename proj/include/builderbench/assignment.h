#ifndef BUILDERBENCH_ASSIGNMENT_H_
#define BUILDERBENCH_ASSIGNMENT_H_

#include <span>
#include <vector>

#include "builderbench/common.h"

namespace builderbench {

// Injective map target index -> cube index, with the summed Euclidean
// distance of the assigned pairs.
struct Assignment {
  std::vector<int> mapping;
  std::vector<double> distances;  // per target
  double total_cost = 0.0;
};

// Costs within this of the optimum are treated as ties.
inline constexpr double kAssignmentTieTolerance = 1e-12;

// Minimum-total-distance assignment of k targets to n >= k cubes (Hungarian
// method on the rectangular k x n matrix). Among optimal mappings the
// lexicographically smallest one is returned. Throws DimensionMismatch when
// k > n.
Assignment AssignTargets(std::span<const Vec3> cubes, std::span<const Vec3> targets);

// Exhaustive search over all injective maps in lexicographic order, same
// tie rule. Throws TooLarge for n > 8.
Assignment AssignBruteForce(std::span<const Vec3> cubes, std::span<const Vec3> targets);

// Hungarian solve on a raw row-major cost matrix (rows <= cols). Returns the
// column of each row; `cost` receives the optimal total.
std::vector<int> SolveAssignment(const std::vector<double>& cost, int rows, int cols,
                                 double* total = nullptr);

}  // namespace builderbench

#endif  // BUILDERBENCH_ASSIGNMENT_H_
