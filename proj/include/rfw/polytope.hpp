#pragma once

#include <string>
#include <vector>

#include "rfw/types.hpp"

namespace rfw {

// Feasible set {x : A x - b <= 0}. Rows of A are the constraint normals.
struct Polytope {
  Matrix A;
  Vector b;
  std::vector<std::string> names;  // optional row labels

  Polytope() = default;
  Polytope(Matrix A_, Vector b_, std::vector<std::string> names_ = {});

  Index num_constraints() const { return A.rows(); }
  Index dim() const { return A.cols(); }
};

// Intersection point of d linearly independent constraint boundaries.
// May lie outside the polytope.
struct ActivePoint {
  Vector point;
  std::vector<Index> constraints;
  bool feasible = false;
};

struct GeometrySummary {
  double diameter = 0.0;    // max pairwise vertex distance
  double radius = 0.0;      // max vertex norm
  double rho_min = 0.0;     // min singular value over active constraint submatrices
  double alpha = 0.0;       // sqrt(d) / rho_min
  double L_A_raw = 0.0;     // max row norm of A
  std::vector<ActivePoint> active_points;
  std::vector<Vector> vertices;
};

struct NormalizedPolytope {
  Polytope polytope;
  double sigma_bar = 0.0;
  double scale = 0.0;  // 1 / (2 alpha L'_A)
};

constexpr double kFeasibilityTol = 1e-9;
constexpr double kDuplicateVertexTol = 1e-9;
constexpr std::size_t kDefaultEnumerationCap = 1'000'000;

// eps_i(x) = b_i - <a_i, x>; nonnegative entries mean feasible.
Vector residuals(const Polytope& P, const Vector& x);

bool is_feasible(const Polytope& P, const Vector& x, double tol = kFeasibilityTol);

// {x : A x - b + tau 1 <= 0}; may be empty.
Polytope shrink(const Polytope& P, double tau);

// Phase-one LP feasibility check.
bool is_empty(const Polytope& P);

// Euclidean projection by exhaustive active-set search over constraint subsets.
Vector project(const Polytope& P, const Vector& x,
               std::size_t cap = kDefaultEnumerationCap);

std::vector<Vector> enumerate_vertices(const Polytope& P,
                                       std::size_t cap = kDefaultEnumerationCap);

// Requires a bounded polytope within the enumeration cap.
GeometrySummary geometry_summary(const Polytope& P,
                                 std::size_t cap = kDefaultEnumerationCap);

// Scales (A, b) so that the max row norm becomes 1/(2 alpha); the feasible set
// is unchanged and the measurement noise level sigma rescales accordingly.
NormalizedPolytope normalize(const Polytope& P, double sigma,
                             const GeometrySummary& summary);
NormalizedPolytope normalize(const Polytope& P, double sigma);

std::string to_json(const Polytope& P);
Polytope polytope_from_json(const std::string& text);

}  // namespace rfw
