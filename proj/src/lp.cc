#include "builderbench/lp.h"

#include <cmath>
#include <limits>

#include "builderbench/common.h"

namespace builderbench {
namespace {

constexpr int kDegenerateRunLimit = 50;
constexpr int kMaxPivots = 200000;

class Tableau {
 public:
  Tableau(int rows, int cols) : rows_(rows), cols_(cols), t_((rows + 1) * (cols + 1), 0.0) {}

  double& at(int r, int c) { return t_[r * (cols_ + 1) + c]; }
  double at(int r, int c) const { return t_[r * (cols_ + 1) + c]; }
  double& rhs(int r) { return at(r, cols_); }
  // Objective row lives at index rows_.
  double& cost(int c) { return at(rows_, c); }

  void Pivot(int pr, int pc) {
    const double inv = 1.0 / at(pr, pc);
    for (int c = 0; c <= cols_; ++c) at(pr, c) *= inv;
    at(pr, pc) = 1.0;
    for (int r = 0; r <= rows_; ++r) {
      if (r == pr) continue;
      const double f = at(r, pc);
      if (f == 0.0) continue;
      for (int c = 0; c <= cols_; ++c) at(r, c) -= f * at(pr, c);
      at(r, pc) = 0.0;
    }
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

 private:
  int rows_, cols_;
  std::vector<double> t_;
};

// Runs simplex iterations on the current objective row. Columns flagged in
// `blocked` never enter. Returns false when unbounded.
bool Iterate(Tableau& t, std::vector<int>& basis, const std::vector<char>& blocked,
             double tol, int& pivots) {
  int degenerate_run = 0;
  while (pivots < kMaxPivots) {
    const bool bland = degenerate_run >= kDegenerateRunLimit;
    int enter = -1;
    double best = -tol;
    for (int c = 0; c < t.cols(); ++c) {
      if (blocked[c]) continue;
      const double rc = t.cost(c);
      if (rc < -tol) {
        if (bland) {
          enter = c;
          break;
        }
        if (rc < best) {
          best = rc;
          enter = c;
        }
      }
    }
    if (enter < 0) return true;

    int leave = -1;
    double ratio = std::numeric_limits<double>::infinity();
    for (int r = 0; r < t.rows(); ++r) {
      const double a = t.at(r, enter);
      if (a <= tol) continue;
      const double q = t.rhs(r) / a;
      if (q < ratio - 1e-15 ||
          (std::abs(q - ratio) <= 1e-15 && leave >= 0 && basis[r] < basis[leave])) {
        ratio = q;
        leave = r;
      }
    }
    if (leave < 0) return false;
    degenerate_run = ratio <= tol ? degenerate_run + 1 : 0;
    t.Pivot(leave, enter);
    basis[leave] = enter;
    ++pivots;
  }
  return true;
}

}  // namespace

LpResult SolveLp(const LinearProgram& lp, double tol) {
  const int nv = lp.num_vars;
  const int m_eq = static_cast<int>(lp.a_eq.size());
  const int m_ub = static_cast<int>(lp.a_ub.size());
  const int m = m_eq + m_ub;
  if (static_cast<int>(lp.c.size()) != nv || static_cast<int>(lp.b_eq.size()) != m_eq ||
      static_cast<int>(lp.b_ub.size()) != m_ub) {
    throw DimensionMismatch("linear program dimensions disagree");
  }

  // Columns: variables, one slack per <= row, one artificial per row that
  // cannot start with its slack basic.
  std::vector<int> artificial_row;
  for (int i = 0; i < m_eq; ++i) artificial_row.push_back(i);
  for (int i = 0; i < m_ub; ++i) {
    if (lp.b_ub[i] < 0.0) artificial_row.push_back(m_eq + i);
  }
  const int n_art = static_cast<int>(artificial_row.size());
  const int slack0 = nv;
  const int art0 = nv + m_ub;
  const int cols = nv + m_ub + n_art;

  Tableau t(m, cols);
  std::vector<int> basis(m, -1);
  for (int i = 0; i < m_eq; ++i) {
    const double sign = lp.b_eq[i] < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < nv; ++j) t.at(i, j) = sign * lp.a_eq[i][j];
    t.rhs(i) = sign * lp.b_eq[i];
  }
  for (int i = 0; i < m_ub; ++i) {
    const int r = m_eq + i;
    const double sign = lp.b_ub[i] < 0.0 ? -1.0 : 1.0;
    for (int j = 0; j < nv; ++j) t.at(r, j) = sign * lp.a_ub[i][j];
    t.at(r, slack0 + i) = sign;
    t.rhs(r) = sign * lp.b_ub[i];
    if (sign > 0.0) basis[r] = slack0 + i;
  }
  for (int a = 0; a < n_art; ++a) {
    const int r = artificial_row[a];
    t.at(r, art0 + a) = 1.0;
    basis[r] = art0 + a;
  }

  LpResult result;
  std::vector<char> blocked(cols, 0);

  // Phase 1: minimise the sum of artificials.
  for (int a = 0; a < n_art; ++a) {
    const int r = artificial_row[a];
    for (int c = 0; c <= cols; ++c) {
      if (c >= art0 && c < art0 + n_art) continue;
      t.cost(c) -= t.at(r, c);
    }
  }
  Iterate(t, basis, blocked, tol, result.pivots);
  double scale = 1.0;
  for (int i = 0; i < m_eq; ++i) scale = std::max(scale, std::abs(lp.b_eq[i]));
  if (-t.cost(cols) > tol * scale * 10.0) {
    result.status = LpStatus::kInfeasible;
    return result;
  }
  // Drive zero-valued artificials out of the basis where possible.
  for (int r = 0; r < m; ++r) {
    if (basis[r] < art0) continue;
    for (int c = 0; c < art0; ++c) {
      if (std::abs(t.at(r, c)) > 1e-7) {
        t.Pivot(r, c);
        basis[r] = c;
        ++result.pivots;
        break;
      }
    }
  }
  for (int a = 0; a < n_art; ++a) blocked[art0 + a] = 1;

  // Phase 2.
  for (int c = 0; c <= cols; ++c) t.cost(c) = 0.0;
  for (int j = 0; j < nv; ++j) t.cost(j) = lp.c[j];
  for (int r = 0; r < m; ++r) {
    const int b = basis[r];
    const double cb = b < nv ? lp.c[b] : 0.0;
    if (cb == 0.0) continue;
    for (int c = 0; c <= cols; ++c) t.cost(c) -= cb * t.at(r, c);
  }
  if (!Iterate(t, basis, blocked, tol, result.pivots)) {
    result.status = LpStatus::kUnbounded;
    return result;
  }
  result.status = LpStatus::kOptimal;
  result.x.assign(nv, 0.0);
  for (int r = 0; r < m; ++r) {
    if (basis[r] < nv) result.x[basis[r]] = t.rhs(r);
  }
  result.objective = 0.0;
  for (int j = 0; j < nv; ++j) result.objective += lp.c[j] * result.x[j];
  return result;
}

}  // namespace builderbench
