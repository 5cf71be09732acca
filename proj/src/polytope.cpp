#include "rfw/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <json.hpp>

#include "rfw/linprog.hpp"

namespace rfw {

namespace {

constexpr double kRankTol = 1e-10;

std::size_t binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0;
  k = std::min(k, n - k);
  std::size_t r = 1;
  for (std::size_t i = 1; i <= k; ++i) {
    r = r * (n - k + i) / i;
    if (r > 100'000'000'000ULL) return r;  // saturate, only compared to caps
  }
  return r;
}

// Visit all k-subsets of {0,...,n-1} in lexicographic order.
template <typename F>
void for_each_subset(Index n, Index k, F&& visit) {
  if (k > n) return;
  std::vector<Index> idx(k);
  for (Index i = 0; i < k; ++i) idx[i] = i;
  while (true) {
    visit(idx);
    Index i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (Index j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

Matrix rows_of(const Matrix& A, const std::vector<Index>& idx) {
  Matrix sub(static_cast<Index>(idx.size()), A.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) sub.row(static_cast<Index>(i)) = A.row(idx[i]);
  return sub;
}

Vector entries_of(const Vector& b, const std::vector<Index>& idx) {
  Vector sub(static_cast<Index>(idx.size()));
  for (std::size_t i = 0; i < idx.size(); ++i) sub[static_cast<Index>(i)] = b[idx[i]];
  return sub;
}

}  // namespace

Polytope::Polytope(Matrix A_, Vector b_, std::vector<std::string> names_)
    : A(std::move(A_)), b(std::move(b_)), names(std::move(names_)) {
  if (A.rows() < 1 || A.cols() < 1)
    throw std::invalid_argument("Polytope: need at least one row and one column");
  if (b.size() != A.rows())
    throw std::invalid_argument("Polytope: A and b row counts differ");
  if (!A.allFinite() || !b.allFinite())
    throw std::invalid_argument("Polytope: non-finite entry");
  for (Index i = 0; i < A.rows(); ++i)
    if (A.row(i).norm() == 0.0)
      throw std::invalid_argument("Polytope: all-zero constraint row");
  if (!names.empty() && names.size() != static_cast<std::size_t>(A.rows()))
    throw std::invalid_argument("Polytope: wrong number of row names");
}

Vector residuals(const Polytope& P, const Vector& x) {
  if (x.size() != P.dim())
    throw std::invalid_argument("residuals: point dimension mismatch");
  return P.b - P.A * x;
}

bool is_feasible(const Polytope& P, const Vector& x, double tol) {
  return residuals(P, x).minCoeff() >= -tol;
}

Polytope shrink(const Polytope& P, double tau) {
  if (tau < 0.0) throw std::invalid_argument("shrink: tau must be nonnegative");
  return Polytope(P.A, P.b - Vector::Constant(P.b.size(), tau), P.names);
}

bool is_empty(const Polytope& P) {
  const Vector c = Vector::Zero(P.dim());
  return solve_lp(c, P.A, P.b).status == LpStatus::Infeasible;
}

Vector project(const Polytope& P, const Vector& x, std::size_t cap) {
  if (x.size() != P.dim())
    throw std::invalid_argument("project: point dimension mismatch");
  const Index m = P.num_constraints();
  const Index d = P.dim();

  std::size_t total = 0;
  for (Index k = 0; k <= std::min(m, d); ++k) total += binomial(m, k);
  if (total > cap) throw std::runtime_error("project: enumeration cap exceeded");

  bool found = false;
  double best_dist2 = 0.0;
  Vector best;

  // The optimal active set is one of the enumerated subsets, and every
  // feasible candidate is at least as far from x as the true projection.
  for (Index k = 0; k <= std::min(m, d); ++k) {
    for_each_subset(m, k, [&](const std::vector<Index>& idx) {
      Vector y;
      if (k == 0) {
        y = x;
      } else {
        const Matrix As = rows_of(P.A, idx);
        Eigen::JacobiSVD<Matrix> svd(As);
        const double smax = svd.singularValues()[0];
        if (svd.singularValues().minCoeff() <= kRankTol * std::max(1.0, smax))
          return;  // rank-deficient subset
        const Vector viol = As * x - entries_of(P.b, idx);
        const Matrix G = As * As.transpose();
        y = x - As.transpose() * G.ldlt().solve(viol);
      }
      if (!is_feasible(P, y, kFeasibilityTol)) return;
      const double dist2 = (y - x).squaredNorm();
      if (!found || dist2 < best_dist2) {
        found = true;
        best_dist2 = dist2;
        best = y;
      }
    });
  }
  if (!found) throw std::runtime_error("project: polytope is empty");
  return best;
}

std::vector<Vector> enumerate_vertices(const Polytope& P, std::size_t cap) {
  std::vector<Vector> verts;
  const Index m = P.num_constraints();
  const Index d = P.dim();
  if (binomial(m, d) > cap)
    throw std::runtime_error("enumerate_vertices: enumeration cap exceeded");

  for_each_subset(m, d, [&](const std::vector<Index>& idx) {
    const Matrix Ab = rows_of(P.A, idx);
    Eigen::JacobiSVD<Matrix> svd(Ab, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smax = svd.singularValues()[0];
    if (svd.singularValues().minCoeff() <= kRankTol * std::max(1.0, smax)) return;
    const Vector v = svd.solve(entries_of(P.b, idx));
    if (!is_feasible(P, v, kFeasibilityTol)) return;
    for (const Vector& u : verts)
      if ((u - v).norm() <= kDuplicateVertexTol) return;
    verts.push_back(v);
  });
  return verts;
}

GeometrySummary geometry_summary(const Polytope& P, std::size_t cap) {
  const Index m = P.num_constraints();
  const Index d = P.dim();
  if (binomial(m, d) > cap)
    throw std::runtime_error("geometry_summary: enumeration cap exceeded");

  // Boundedness probe: the polytope must have a finite LP optimum along
  // every coordinate direction.
  for (Index j = 0; j < d; ++j) {
    for (double s : {1.0, -1.0}) {
      Vector c = Vector::Zero(d);
      c[j] = s;
      const LpResult lp = solve_lp(c, P.A, P.b);
      if (lp.status == LpStatus::Unbounded)
        throw std::runtime_error("geometry_summary: polytope is unbounded");
      if (lp.status == LpStatus::Infeasible)
        throw std::runtime_error("geometry_summary: polytope is empty");
    }
  }

  GeometrySummary g;
  g.L_A_raw = P.A.rowwise().norm().maxCoeff();
  g.rho_min = std::numeric_limits<double>::infinity();

  for_each_subset(m, d, [&](const std::vector<Index>& idx) {
    const Matrix Ab = rows_of(P.A, idx);
    Eigen::JacobiSVD<Matrix> svd(Ab, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double smin = svd.singularValues().minCoeff();
    const double smax = svd.singularValues()[0];
    if (smin <= kRankTol * std::max(1.0, smax)) return;  // degenerate, skipped
    g.rho_min = std::min(g.rho_min, smin);
    ActivePoint ap;
    ap.point = svd.solve(entries_of(P.b, idx));
    ap.constraints = idx;
    ap.feasible = is_feasible(P, ap.point, kFeasibilityTol);
    if (ap.feasible) {
      bool dup = false;
      for (const Vector& u : g.vertices)
        if ((u - ap.point).norm() <= kDuplicateVertexTol) dup = true;
      if (!dup) g.vertices.push_back(ap.point);
    }
    g.active_points.push_back(std::move(ap));
  });

  if (g.vertices.empty())
    throw std::runtime_error("geometry_summary: no vertices found");
  if (!std::isfinite(g.rho_min) || g.rho_min <= 0.0)
    throw std::runtime_error("geometry_summary: degenerate polytope");

  g.alpha = std::sqrt(static_cast<double>(d)) / g.rho_min;
  for (const Vector& v : g.vertices) {
    g.radius = std::max(g.radius, v.norm());
    for (const Vector& u : g.vertices)
      g.diameter = std::max(g.diameter, (v - u).norm());
  }
  return g;
}

NormalizedPolytope normalize(const Polytope& P, double sigma,
                             const GeometrySummary& summary) {
  if (summary.L_A_raw <= 0.0)
    throw std::invalid_argument("normalize: zero max row norm");
  NormalizedPolytope out;
  out.scale = 1.0 / (2.0 * summary.alpha * summary.L_A_raw);
  out.polytope = Polytope(out.scale * P.A, out.scale * P.b, P.names);
  out.sigma_bar = sigma * out.scale;
  return out;
}

NormalizedPolytope normalize(const Polytope& P, double sigma) {
  return normalize(P, sigma, geometry_summary(P));
}

std::string to_json(const Polytope& P) {
  nlohmann::json j;
  j["A"] = nlohmann::json::array();
  for (Index i = 0; i < P.A.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index k = 0; k < P.A.cols(); ++k) row.push_back(P.A(i, k));
    j["A"].push_back(row);
  }
  j["b"] = std::vector<double>(P.b.data(), P.b.data() + P.b.size());
  if (!P.names.empty()) j["names"] = P.names;
  return j.dump();
}

Polytope polytope_from_json(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text);
  const auto& rows = j.at("A");
  const Index m = static_cast<Index>(rows.size());
  if (m == 0) throw std::invalid_argument("polytope_from_json: empty A");
  const Index d = static_cast<Index>(rows[0].size());
  Matrix A(m, d);
  for (Index i = 0; i < m; ++i)
    for (Index k = 0; k < d; ++k) A(i, k) = rows[i][k].get<double>();
  const auto bv = j.at("b").get<std::vector<double>>();
  Vector b = Eigen::Map<const Vector>(bv.data(), static_cast<Index>(bv.size()));
  std::vector<std::string> names;
  if (j.contains("names")) names = j["names"].get<std::vector<std::string>>();
  return Polytope(std::move(A), std::move(b), std::move(names));
}

}  // namespace rfw
