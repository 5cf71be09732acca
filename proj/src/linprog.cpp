#include "rfw/linprog.hpp"

#include <limits>
#include <stdexcept>
#include <vector>

namespace rfw {

namespace {

constexpr double kCostTol = 1e-9;
constexpr double kPivotTol = 1e-10;

// Full-tableau simplex on  min c'z  s.t.  T z = rhs, z >= 0,  starting from the
// given basis. Columns in `blocked` may never enter. Returns false on
// unboundedness. Bland's rule throughout, so cycling cannot occur.
bool run_simplex(Matrix& T, Vector& rhs, Vector& cost, std::vector<Index>& basis,
                 const std::vector<bool>& blocked) {
  const Index m = T.rows();
  const Index n = T.cols();

  // Reduced costs: start from `cost` and cancel the basic columns.
  Vector red = cost;
  for (Index r = 0; r < m; ++r) {
    const Index j = basis[r];
    if (std::abs(red[j]) > 0.0) {
      red -= red[j] * T.row(r).transpose();
      red[j] = 0.0;  // kill residual round-off on the basic column
    }
  }

  while (true) {
    Index enter = -1;
    for (Index j = 0; j < n; ++j) {
      if (!blocked[j] && red[j] < -kCostTol) {
        enter = j;
        break;
      }
    }
    if (enter < 0) return true;  // optimal

    Index leave = -1;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (Index r = 0; r < m; ++r) {
      const double a = T(r, enter);
      if (a > kPivotTol) {
        const double ratio = rhs[r] / a;
        if (ratio < best_ratio - kPivotTol ||
            (ratio < best_ratio + kPivotTol &&
             (leave < 0 || basis[r] < basis[leave]))) {
          best_ratio = ratio;
          leave = r;
        }
      }
    }
    if (leave < 0) return false;  // unbounded

    const double piv = T(leave, enter);
    T.row(leave) /= piv;
    rhs[leave] /= piv;
    for (Index r = 0; r < m; ++r) {
      if (r == leave) continue;
      const double f = T(r, enter);
      if (f != 0.0) {
        T.row(r) -= f * T.row(leave);
        rhs[r] -= f * rhs[leave];
        if (rhs[r] < 0.0 && rhs[r] > -1e-12) rhs[r] = 0.0;
      }
    }
    const double fc = red[enter];
    red -= fc * T.row(leave).transpose();
    red[enter] = 0.0;
    basis[leave] = enter;
  }
}

}  // namespace

LpResult solve_lp(const Vector& c, const Matrix& A, const Vector& b) {
  const Index m = A.rows();
  const Index d = A.cols();
  if (c.size() != d || b.size() != m)
    throw std::invalid_argument("solve_lp: dimension mismatch");

  // Standard form variables: x = u - w with u, w >= 0, one slack per row,
  // one artificial per row. Rows with negative rhs are flipped first.
  const Index n_struct = 2 * d + m;
  const Index n = n_struct + m;

  Matrix T = Matrix::Zero(m, n);
  Vector rhs(m);
  for (Index i = 0; i < m; ++i) {
    const double s = (b[i] < 0.0) ? -1.0 : 1.0;
    T.block(i, 0, 1, d) = s * A.row(i);
    T.block(i, d, 1, d) = -s * A.row(i);
    T(i, 2 * d + i) = s;           // slack
    T(i, n_struct + i) = 1.0;      // artificial
    rhs[i] = s * b[i];
  }

  std::vector<Index> basis(m);
  for (Index i = 0; i < m; ++i) basis[i] = n_struct + i;

  // Phase 1: minimize the sum of artificials.
  Vector phase1_cost = Vector::Zero(n);
  phase1_cost.tail(m).setOnes();
  std::vector<bool> none(n, false);
  if (!run_simplex(T, rhs, phase1_cost, basis, none))
    throw std::runtime_error("solve_lp: phase 1 unbounded");

  double artificial_sum = 0.0;
  for (Index r = 0; r < m; ++r)
    if (basis[r] >= n_struct) artificial_sum += rhs[r];
  if (artificial_sum > 1e-7) return {LpStatus::Infeasible, Vector(), 0.0};

  // Pivot remaining zero-valued artificials out of the basis where possible;
  // a row with no structural pivot is redundant and its artificial stays at 0.
  for (Index r = 0; r < m; ++r) {
    if (basis[r] < n_struct) continue;
    Index j_piv = -1;
    for (Index j = 0; j < n_struct; ++j) {
      if (std::abs(T(r, j)) > 1e-8) {
        j_piv = j;
        break;
      }
    }
    if (j_piv < 0) continue;
    const double piv = T(r, j_piv);
    T.row(r) /= piv;
    rhs[r] /= piv;
    for (Index r2 = 0; r2 < m; ++r2) {
      if (r2 == r) continue;
      const double f = T(r2, j_piv);
      if (f != 0.0) {
        T.row(r2) -= f * T.row(r);
        rhs[r2] -= f * rhs[r];
      }
    }
    basis[r] = j_piv;
  }

  // Phase 2: original objective, artificials blocked.
  Vector phase2_cost = Vector::Zero(n);
  phase2_cost.head(d) = c;
  phase2_cost.segment(d, d) = -c;
  std::vector<bool> blocked(n, false);
  for (Index j = n_struct; j < n; ++j) blocked[j] = true;
  if (!run_simplex(T, rhs, phase2_cost, basis, blocked))
    return {LpStatus::Unbounded, Vector(), 0.0};

  Vector z = Vector::Zero(n);
  for (Index r = 0; r < m; ++r) z[basis[r]] = rhs[r];
  LpResult res;
  res.status = LpStatus::Optimal;
  res.x = z.head(d) - z.segment(d, d);
  res.objective = c.dot(res.x);
  return res;
}

}  // namespace rfw
