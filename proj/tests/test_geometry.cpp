#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rfw/oracles.hpp"
#include "rfw/polytope.hpp"
#include "rfw/types.hpp"

using namespace rfw;

namespace {

Polytope unit_box(Index d) {
  Matrix A(2 * d, d);
  Vector b(2 * d);
  A.setZero();
  for (Index j = 0; j < d; ++j) {
    A(j, j) = 1.0;
    b[j] = 1.0;
    A(d + j, j) = -1.0;
    b[d + j] = 0.0;
  }
  return Polytope(A, b);
}

// Dykstra's alternating-projection scheme onto the halfspace intersection;
// independent of the active-set search used by project().
Vector dykstra_project(const Polytope& P, const Vector& x, int sweeps = 4000) {
  const Index m = P.num_constraints();
  Vector z = x;
  Matrix corrections = Matrix::Zero(m, P.dim());
  for (int s = 0; s < sweeps; ++s) {
    for (Index i = 0; i < m; ++i) {
      const Vector y = z + corrections.row(i).transpose();
      const Vector a = P.A.row(i).transpose();
      const double viol = a.dot(y) - P.b[i];
      Vector proj = y;
      if (viol > 0.0) proj -= viol / a.squaredNorm() * a;
      corrections.row(i) = (y - proj).transpose();
      z = proj;
    }
  }
  return z;
}

// All pairwise constraint-boundary intersections in d=2, feasibility-filtered;
// cross-checks enumerate_vertices.
std::vector<Vector> pairwise_vertices_2d(const Polytope& P) {
  std::vector<Vector> out;
  for (Index i = 0; i < P.num_constraints(); ++i)
    for (Index j = i + 1; j < P.num_constraints(); ++j) {
      Matrix B(2, 2);
      B.row(0) = P.A.row(i);
      B.row(1) = P.A.row(j);
      if (std::abs(B.determinant()) < 1e-10) continue;
      Vector rhs(2);
      rhs << P.b[i], P.b[j];
      const Vector v = B.partialPivLu().solve(rhs);
      if (!is_feasible(P, v)) continue;
      bool dup = false;
      for (const Vector& w : out) dup = dup || (w - v).norm() <= 1e-9;
      if (!dup) out.push_back(v);
    }
  return out;
}

bool contains_point(const std::vector<Vector>& pts, const Vector& v) {
  for (const Vector& w : pts)
    if ((w - v).norm() <= 1e-8) return true;
  return false;
}

}  // namespace

TEST_CASE("residuals at the box center are all one half") {
  const Polytope box = unit_box(2);
  const Vector r = residuals(box, Vector::Constant(2, 0.5));
  REQUIRE(r.size() == 4);
  for (Index i = 0; i < 4; ++i) CHECK(r[i] == 0.5);
}

TEST_CASE("residuals vanish exactly on a face and reject bad dimensions") {
  const Polytope box = unit_box(2);
  Vector x(2);
  x << 1.0, 0.3;
  CHECK(residuals(box, x)[0] == 0.0);
  CHECK_THROWS_AS(residuals(box, Vector::Zero(3)), std::invalid_argument);
}

TEST_CASE("sloped machining constraint is slack at the first start point") {
  // Surface-finish limit 0.010035 x - 7.0877 y >= 0.0844, as a row of Ax <= b.
  const Problem cm = cutting_machine_problem(0);
  const Vector r = residuals(cm.polytope, cm.x0);
  const double margin = 0.010035 * 150.0 - 7.0877 * 0.09 - 0.0844;
  CHECK(r[0] == doctest::Approx(margin).epsilon(1e-12));
  CHECK(r.minCoeff() > 0.0);
}

TEST_CASE("shrink by zero is the identity") {
  const Polytope box = unit_box(3);
  const Polytope same = shrink(box, 0.0);
  CHECK((same.A - box.A).norm() == 0.0);
  CHECK((same.b - box.b).norm() == 0.0);
}

TEST_CASE("shrinking the unit box offsets every face inward") {
  const Polytope inner = shrink(unit_box(2), 0.1);
  Vector x(2);
  x << 0.1, 0.9;
  CHECK(is_feasible(inner, x));
  x << 0.0999, 0.5;
  CHECK(!is_feasible(inner, x, 0.0));
  CHECK_THROWS_AS(shrink(unit_box(2), -0.01), std::invalid_argument);
}

TEST_CASE("shrink monotonicity on random polytopes") {
  std::mt19937_64 rng(7);
  for (int rep = 0; rep < 20; ++rep) {
    const Polytope P = random_bounded_polytope(2, 2, rng);
    const Polytope inner = shrink(P, 0.12);
    const Polytope outer = shrink(P, 0.05);
    if (is_empty(inner)) continue;
    for (const Vector& v : enumerate_vertices(inner)) CHECK(is_feasible(outer, v));
  }
}

TEST_CASE("emptiness detection") {
  CHECK(!is_empty(unit_box(2)));

  Matrix A(2, 1);
  Vector b(2);
  A << 1.0, -1.0;
  b << 0.0, -1.0;  // x <= 0 and x >= 1
  CHECK(is_empty(Polytope(A, b)));

  // [0.6, 0.4] after shrinking the unit interval by 0.6.
  CHECK(is_empty(shrink(unit_box(1), 0.6)));
  CHECK(!is_empty(shrink(unit_box(1), 0.5)));
}

TEST_CASE("projection of interior points is the identity") {
  const Polytope box = unit_box(2);
  const Vector x = Vector::Constant(2, 0.25);
  CHECK((project(box, x) - x).norm() <= 1e-12);
}

TEST_CASE("projection onto the unit box clips one coordinate") {
  Vector x(2);
  x << 2.0, 0.5;
  Vector expect(2);
  expect << 1.0, 0.5;
  CHECK((project(unit_box(2), x) - expect).norm() <= 1e-12);
}

TEST_CASE("projection matches Dykstra and is idempotent and feasible") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> normal(0.0, 1.5);
  for (int rep = 0; rep < 15; ++rep) {
    const Polytope P = random_bounded_polytope(2, 2, rng);
    Vector x(2);
    x << normal(rng), normal(rng);
    const Vector p = project(P, x);
    CHECK(residuals(P, p).minCoeff() >= -kFeasibilityTol);
    CHECK((project(P, p) - p).norm() <= 1e-9);
    const Vector q = dykstra_project(P, x);
    CHECK((x - p).norm() <= (x - q).norm() + 1e-6);
    CHECK((p - q).norm() <= 1e-5);
  }
}

TEST_CASE("vertex enumeration recovers the box corners") {
  const std::vector<Vector> verts = enumerate_vertices(unit_box(2));
  REQUIRE(verts.size() == 4);
  for (double cx : {0.0, 1.0})
    for (double cy : {0.0, 1.0}) {
      Vector v(2);
      v << cx, cy;
      CHECK(contains_point(verts, v));
    }
}

TEST_CASE("vertex enumeration recovers the simplex corners") {
  Matrix A(3, 2);
  Vector b(3);
  A << -1.0, 0.0, 0.0, -1.0, 1.0, 1.0;
  b << 0.0, 0.0, 1.0;
  const std::vector<Vector> verts = enumerate_vertices(Polytope(A, b));
  REQUIRE(verts.size() == 3);
  Vector v(2);
  v << 0.0, 0.0;
  CHECK(contains_point(verts, v));
  v << 1.0, 0.0;
  CHECK(contains_point(verts, v));
  v << 0.0, 1.0;
  CHECK(contains_point(verts, v));
}

TEST_CASE("machining polytope vertices match the pairwise-intersection oracle") {
  const Polytope P = cutting_machine_problem(0).polytope;
  const std::vector<Vector> verts = enumerate_vertices(P);
  const std::vector<Vector> oracle = pairwise_vertices_2d(P);
  REQUIRE(verts.size() == oracle.size());
  for (const Vector& v : oracle) CHECK(contains_point(verts, v));
}

TEST_CASE("geometry summary of the unit box") {
  const GeometrySummary s = geometry_summary(unit_box(2));
  CHECK(s.rho_min == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(s.alpha == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(s.diameter == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(s.radius == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  CHECK(s.L_A_raw == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rho_min is homogeneous in the row scaling") {
  Polytope box = unit_box(2);
  const GeometrySummary base = geometry_summary(box);
  const double c = 0.37;
  box.A *= c;
  box.b *= c;
  const GeometrySummary scaled = geometry_summary(box);
  CHECK(scaled.rho_min == doctest::Approx(c * base.rho_min).epsilon(1e-12));
  CHECK(scaled.alpha == doctest::Approx(base.alpha / c).epsilon(1e-12));
}

TEST_CASE("rho_min matches an independent eigen-decomposition oracle") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 10; ++rep) {
    const Polytope P = random_bounded_polytope(2, 2, rng);
    const GeometrySummary s = geometry_summary(P);
    double rho = std::numeric_limits<double>::infinity();
    for (const ActivePoint& ap : s.active_points) {
      Matrix B(static_cast<Index>(ap.constraints.size()), P.dim());
      for (std::size_t k = 0; k < ap.constraints.size(); ++k)
        B.row(static_cast<Index>(k)) = P.A.row(ap.constraints[k]);
      // smallest singular value via the eigenvalues of B' B
      Eigen::SelfAdjointEigenSolver<Matrix> es(B.transpose() * B);
      rho = std::min(rho, std::sqrt(std::max(0.0, es.eigenvalues().minCoeff())));
    }
    CHECK(s.rho_min == doctest::Approx(rho).epsilon(1e-9));
  }
}

TEST_CASE("normalization scale is invariant under uniform row rescaling") {
  // alpha scales by 1/c and the max row norm by c, so the product driving the
  // normalization scale is the same before and after normalizing.
  const NormalizedPolytope once = normalize(unit_box(2), 0.02);
  const NormalizedPolytope twice = normalize(once.polytope, once.sigma_bar);
  CHECK(twice.scale == doctest::Approx(once.scale).epsilon(1e-12));
  CHECK((twice.polytope.A - once.scale * once.polytope.A).norm() <= 1e-12);
  CHECK(twice.sigma_bar ==
        doctest::Approx(once.scale * once.sigma_bar).epsilon(1e-12));
}

TEST_CASE("normalization rescales rows and preserves membership") {
  const Polytope box = unit_box(2);
  const NormalizedPolytope np = normalize(box, 0.01);
  double max_row = 0.0;
  for (Index i = 0; i < np.polytope.num_constraints(); ++i)
    max_row = std::max(max_row, np.polytope.A.row(i).norm());
  CHECK(max_row == doctest::Approx(1.0 / (2.0 * std::sqrt(2.0))).epsilon(1e-12));
  CHECK(np.sigma_bar == doctest::Approx(0.01 / (2.0 * std::sqrt(2.0))).epsilon(1e-12));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unif(-0.5, 1.5);
  for (int rep = 0; rep < 100; ++rep) {
    Vector x(2);
    x << unif(rng), unif(rng);
    CHECK(is_feasible(box, x, 0.0) == is_feasible(np.polytope, x, 0.0));
  }
}

TEST_CASE("concat identity norm matches a direct singular-value computation") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 25; ++rep) {
    Vector x(3);
    x << normal(rng), normal(rng), normal(rng);
    Matrix M(3, 4);
    M.leftCols(3) = Matrix::Identity(3, 3);
    M.col(3) = x;
    const double direct = M.jacobiSvd().singularValues()[0];
    CHECK(std::abs(concat_identity_norm(x) - direct) <= 1e-12);
  }
}

TEST_CASE("json round-trip is exact") {
  const Polytope P = cutting_machine_problem(0).polytope;
  const Polytope back = polytope_from_json(to_json(P));
  CHECK((P.A - back.A).norm() == 0.0);
  CHECK((P.b - back.b).norm() == 0.0);
  CHECK(P.names == back.names);
}

TEST_CASE("lemma 1 bound on sampled interior points") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const Polytope P = random_bounded_polytope(2, 1, rng);
    const GeometrySummary s = geometry_summary(P);
    Vector center = Vector::Zero(2);
    for (const Vector& v : s.vertices) center += v;
    center /= static_cast<double>(s.vertices.size());
    const double tau = 0.25 * residuals(P, center).minCoeff() /
                       std::max(1.0, s.L_A_raw);
    const Polytope Pt = shrink(P, tau);
    if (is_empty(Pt)) continue;
    for (int k = 0; k < 20; ++k) {
      Vector x = Vector::Zero(2);
      double total = 0.0;
      for (const Vector& v : s.vertices) {
        const double w = unif(rng);
        x += w * v;
        total += w;
      }
      x /= total;
      CHECK((x - project(Pt, x)).norm() <= s.alpha * tau + 1e-9);
    }
  }
}
