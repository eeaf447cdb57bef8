#include "builderbench/assignment.h"

#include <algorithm>
#include <limits>
#include <numeric>

namespace builderbench {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<double> DistanceMatrix(std::span<const Vec3> cubes,
                                   std::span<const Vec3> targets) {
  const size_t k = targets.size();
  const size_t n = cubes.size();
  std::vector<double> d(k * n);
  for (size_t i = 0; i < k; ++i) {
    for (size_t j = 0; j < n; ++j) d[i * n + j] = (cubes[j] - targets[i]).norm();
  }
  return d;
}

// Optimal cost of assigning `rows` to `cols` (subsets of the full matrix).
double SubproblemCost(const std::vector<double>& full, int full_cols,
                      const std::vector<int>& rows, const std::vector<int>& cols,
                      std::vector<int>* mapping) {
  if (rows.empty()) {
    if (mapping) mapping->clear();
    return 0.0;
  }
  std::vector<double> sub(rows.size() * cols.size());
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < cols.size(); ++c) {
      sub[r * cols.size() + c] = full[rows[r] * full_cols + cols[c]];
    }
  }
  std::vector<int> local = SolveAssignment(sub, static_cast<int>(rows.size()),
                                           static_cast<int>(cols.size()));
  double total = 0.0;
  for (size_t r = 0; r < rows.size(); ++r) total += sub[r * cols.size() + local[r]];
  if (mapping) {
    mapping->resize(rows.size());
    for (size_t r = 0; r < rows.size(); ++r) (*mapping)[r] = cols[local[r]];
  }
  return total;
}

Assignment Finish(const std::vector<double>& d, int n, std::vector<int> mapping) {
  Assignment a;
  a.mapping = std::move(mapping);
  a.distances.resize(a.mapping.size());
  for (size_t i = 0; i < a.mapping.size(); ++i) {
    a.distances[i] = d[i * n + a.mapping[i]];
    a.total_cost += a.distances[i];
  }
  return a;
}

}  // namespace

std::vector<int> SolveAssignment(const std::vector<double>& cost, int rows, int cols,
                                 double* total) {
  if (rows > cols) throw DimensionMismatch("assignment needs rows <= cols");
  // Shortest augmenting path with potentials; 1-based with a virtual column 0.
  std::vector<double> u(rows + 1, 0.0), v(cols + 1, 0.0);
  std::vector<int> p(cols + 1, 0), way(cols + 1, 0);
  for (int i = 1; i <= rows; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(cols + 1, kInf);
    std::vector<char> used(cols + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= cols; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * cols + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= cols; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(rows, -1);
  for (int j = 1; j <= cols; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  }
  if (total) {
    double t = 0.0;
    for (int i = 0; i < rows; ++i) t += cost[i * cols + row_to_col[i]];
    *total = t;
  }
  return row_to_col;
}

Assignment AssignTargets(std::span<const Vec3> cubes, std::span<const Vec3> targets) {
  const int k = static_cast<int>(targets.size());
  const int n = static_cast<int>(cubes.size());
  if (k > n) {
    throw DimensionMismatch("assignment with " + std::to_string(k) + " targets but only " +
                            std::to_string(n) + " cubes");
  }
  const std::vector<double> d = DistanceMatrix(cubes, targets);
  if (k == 0) return Assignment{};
  if (k == 1) {
    int best = 0;
    for (int j = 1; j < n; ++j) {
      if (d[j] < d[best] - kAssignmentTieTolerance) best = j;
    }
    return Finish(d, n, {best});
  }

  double optimum = 0.0;
  std::vector<int> current = SolveAssignment(d, k, n, &optimum);

  // Lexicographic refinement: fix rows in order, taking the smallest column
  // that still admits an optimal completion.
  std::vector<int> fixed;
  std::vector<char> taken(n, 0);
  double fixed_cost = 0.0;
  for (int i = 0; i < k; ++i) {
    std::vector<int> rest_rows;
    for (int r = i + 1; r < k; ++r) rest_rows.push_back(r);
    int chosen = current[i];
    std::vector<int> completion(current.begin() + i + 1, current.end());
    for (int j = 0; j < current[i]; ++j) {
      if (taken[j]) continue;
      std::vector<int> cols;
      for (int c = 0; c < n; ++c) {
        if (!taken[c] && c != j) cols.push_back(c);
      }
      std::vector<int> sub_map;
      const double rest = SubproblemCost(d, n, rest_rows, cols, &sub_map);
      if (fixed_cost + d[i * n + j] + rest <= optimum + kAssignmentTieTolerance) {
        chosen = j;
        completion = sub_map;
        break;
      }
    }
    fixed.push_back(chosen);
    taken[chosen] = 1;
    fixed_cost += d[i * n + chosen];
    for (int r = i + 1; r < k; ++r) current[r] = completion[r - i - 1];
    current[i] = chosen;
  }
  return Finish(d, n, fixed);
}

Assignment AssignBruteForce(std::span<const Vec3> cubes, std::span<const Vec3> targets) {
  const int k = static_cast<int>(targets.size());
  const int n = static_cast<int>(cubes.size());
  if (k > n) throw DimensionMismatch("brute force with k > n");
  if (n > 8) throw TooLarge("brute-force assignment is limited to n <= 8");
  const std::vector<double> d = DistanceMatrix(cubes, targets);
  if (k == 0) return Assignment{};

  std::vector<int> best;
  double best_cost = kInf;
  std::vector<int> cur(k, -1);
  std::vector<char> used(n, 0);
  // Depth-first enumeration visits injective maps in lexicographic order.
  auto recurse = [&](auto&& self, int row, double acc) -> void {
    if (row == k) {
      double total = 0.0;
      for (int i = 0; i < k; ++i) total += d[i * n + cur[i]];
      if (total < best_cost - kAssignmentTieTolerance) {
        best_cost = total;
        best = cur;
      }
      return;
    }
    for (int j = 0; j < n; ++j) {
      if (used[j]) continue;
      used[j] = 1;
      cur[row] = j;
      self(self, row + 1, acc + d[row * n + j]);
      used[j] = 0;
    }
  };
  recurse(recurse, 0, 0.0);
  return Finish(d, n, best);
}

}  // namespace builderbench
