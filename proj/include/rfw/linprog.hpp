#pragma once

#include "rfw/types.hpp"

namespace rfw {

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpResult {
  LpStatus status = LpStatus::Infeasible;
  Vector x;
  double objective = 0.0;
};

// min <c, x>  s.t.  A x <= b,  x free.
// Dense two-phase simplex with Bland's rule.
LpResult solve_lp(const Vector& c, const Matrix& A, const Vector& b);

}  // namespace rfw
