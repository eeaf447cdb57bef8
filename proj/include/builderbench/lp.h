#ifndef BUILDERBENCH_LP_H_
#define BUILDERBENCH_LP_H_

#include <vector>

namespace builderbench {

// minimize c.x  subject to  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0.
// Rows are dense and must all have num_vars entries.
struct LinearProgram {
  int num_vars = 0;
  std::vector<double> c;
  std::vector<std::vector<double>> a_eq;
  std::vector<double> b_eq;
  std::vector<std::vector<double>> a_ub;
  std::vector<double> b_ub;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  std::vector<double> x;
  double objective = 0.0;
  int pivots = 0;
};

// Dense two-phase tableau simplex. Dantzig pricing, falling back to Bland's
// rule after a run of degenerate pivots, so it cannot cycle.
LpResult SolveLp(const LinearProgram& lp, double tol = 1e-9);

}  // namespace builderbench

#endif  // BUILDERBENCH_LP_H_
