#include "rfw/oracles.hpp"

#include <cmath>
#include <stdexcept>

namespace rfw {

namespace {

Vector ball_noise(Index d, double radius, std::uint64_t seed) {
  if (radius == 0.0) return Vector::Zero(d);
  std::mt19937_64 gen(seed ^ 0x9e3779b97f4a7c15ULL);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Vector n(d);
  for (Index i = 0; i < d; ++i) n[i] = normal(gen);
  const double norm = n.norm();
  if (norm == 0.0) return Vector::Zero(d);
  const double r = radius * std::pow(unif(gen), 1.0 / static_cast<double>(d));
  return (r / norm) * n;
}

}  // namespace

NoisyFeasibilityOracle::NoisyFeasibilityOracle(Polytope hidden, double sigma_bar,
                                               std::uint64_t seed,
                                               VicinityGuard guard, double r0)
    : hidden_(std::move(hidden)),
      sigma_bar_(sigma_bar),
      guard_(guard),
      r0_(r0),
      rng_(seed) {
  if (sigma_bar < 0.0)
    throw std::invalid_argument("NoisyFeasibilityOracle: negative noise scale");
}

Matrix NoisyFeasibilityOracle::query(const Matrix& X) {
  if (X.cols() != hidden_.dim())
    throw std::invalid_argument("nfo_query: dimension mismatch");
  const Index n = X.rows();
  const Index m = hidden_.num_constraints();

  if (guard_ != VicinityGuard::Off) {
    std::vector<Vector> checked;
    for (Index i = 0; i < n; ++i) {
      const Vector x = X.row(i).transpose();
      bool seen = false;
      for (const Vector& c : checked)
        if ((c - x).norm() <= 1e-14) seen = true;
      if (seen) continue;
      checked.push_back(x);
      bool ok = is_feasible(hidden_, x);
      if (!ok) ok = (x - project(hidden_, x)).norm() <= r0_ + kFeasibilityTol;
      if (!ok) {
        ++guard_trips_;
        if (guard_ == VicinityGuard::Strict)
          throw std::runtime_error("nfo_query: query point outside r0-vicinity");
      }
    }
  }

  Matrix Y = X * hidden_.A.transpose();
  Y.rowwise() -= hidden_.b.transpose();
  if (sigma_bar_ > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma_bar_);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < m; ++j) Y(i, j) += noise(rng_);
  }
  query_count_ += n;
  return Y;
}

StochasticGradientOracle::StochasticGradientOracle(Objective objective, Index dim,
                                                   double sigma0,
                                                   std::uint64_t seed,
                                                   int max_uses_per_token)
    : objective_(std::move(objective)),
      dim_(dim),
      sigma0_(sigma0),
      max_uses_(max_uses_per_token),
      rng_(seed) {
  if (sigma0 < 0.0)
    throw std::invalid_argument("StochasticGradientOracle: negative noise bound");
}

XiToken StochasticGradientOracle::mint_token() { return XiToken{rng_()}; }

Vector StochasticGradientOracle::evaluate(const Vector& x, const XiToken& token) {
  if (x.size() != dim_)
    throw std::invalid_argument("sfo_query: dimension mismatch");
  if (max_uses_ > 0) {
    int& uses = token_uses_[token.seed];
    if (++uses > max_uses_)
      throw std::runtime_error("sfo_query: stale sample token reused");
  }
  ++query_count_;
  return objective_.gradient(x) + ball_noise(dim_, sigma0_, token.seed);
}

namespace {

double cm_h1(double x, double y) {
  return 127.5365 - 0.84629 * x - 144.21 * y + 0.001703 * x * x + 0.3656 * x * y;
}

double cm_value(const Vector& p) {
  const double x = p[0], y = p[1];
  return 22.0 / (x * y) * (50.0 + 40.0 / cm_h1(x, y));
}

Vector cm_gradient(const Vector& p) {
  const double x = p[0], y = p[1];
  const double h = cm_h1(x, y);
  const double hx = -0.84629 + 2.0 * 0.001703 * x + 0.3656 * y;
  const double hy = -144.21 + 0.3656 * x;
  const double g = 22.0 / (x * y);
  const double r = 50.0 + 40.0 / h;
  Vector grad(2);
  grad[0] = -g * r / x - g * 40.0 * hx / (h * h);
  grad[1] = -g * r / y - g * 40.0 * hy / (h * h);
  return grad;
}

// Grid estimates of the gradient bound M and the Lipschitz constant L over
// the feasible region, computed once.
void cm_constants(double& L, double& M) {
  static double L_cached = 0.0, M_cached = 0.0;
  if (L_cached == 0.0) {
    const int n = 81;
    double max_grad = 0.0, max_hess = 0.0;
    const double hx = 1e-4, hy = 1e-7;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const double x = 100.0 + 100.0 * i / (n - 1);
        const double y = 0.08 + 0.08 * j / (n - 1);
        if (0.0844 - 0.010035 * x + 7.0877 * y > 0.0) continue;
        Vector p(2);
        p << x, y;
        max_grad = std::max(max_grad, cm_gradient(p).norm());
        Matrix H(2, 2);
        Vector px = p, py = p;
        px[0] += hx;
        Vector gxp = cm_gradient(px);
        px[0] -= 2 * hx;
        Vector gxm = cm_gradient(px);
        py[1] += hy;
        Vector gyp = cm_gradient(py);
        py[1] -= 2 * hy;
        Vector gym = cm_gradient(py);
        H.col(0) = (gxp - gxm) / (2 * hx);
        H.col(1) = (gyp - gym) / (2 * hy);
        H = 0.5 * (H + H.transpose()).eval();
        max_hess = std::max(max_hess, H.operatorNorm());
      }
    }
    M_cached = 1.05 * max_grad;
    L_cached = 1.05 * max_hess;
  }
  L = L_cached;
  M = M_cached;
}

Polytope box_polytope(Index d, double lo, double hi) {
  Matrix A(2 * d, d);
  Vector b(2 * d);
  A.setZero();
  for (Index j = 0; j < d; ++j) {
    A(2 * j, j) = 1.0;
    b[2 * j] = hi;
    A(2 * j + 1, j) = -1.0;
    b[2 * j + 1] = -lo;
  }
  return Polytope(std::move(A), std::move(b));
}

Objective quadratic_objective(const Vector& c, double M) {
  Objective f;
  f.value = [c](const Vector& x) { return (x - c).squaredNorm(); };
  f.gradient = [c](const Vector& x) { return Vector(2.0 * (x - c)); };
  f.L = 2.0;
  f.M = M;
  f.is_convex = true;
  return f;
}

double quadratic_grad_bound(const Polytope& P, const Vector& c) {
  double r = 0.0;
  for (const Vector& v : enumerate_vertices(P)) r = std::max(r, (v - c).norm());
  return 2.0 * r;
}

}  // namespace

Problem cutting_machine_problem(int start) {
  Matrix A(5, 2);
  Vector b(5);
  A << -0.010035, 7.0877,
       -1.0, 0.0,
        1.0, 0.0,
        0.0, -1.0,
        0.0, 1.0;
  b << -0.0844, -100.0, 200.0, -0.08, 0.16;

  Problem p;
  p.id = "cutting-machine";
  p.polytope = Polytope(A, b, {"h2", "x_min", "x_max", "y_min", "y_max"});
  p.x0 = Vector(2);
  if (start == 0)
    p.x0 << 150.0, 0.09;
  else
    p.x0 << 130.0, 0.09;
  p.objective.value = cm_value;
  p.objective.gradient = cm_gradient;
  p.objective.is_convex = false;
  cm_constants(p.objective.L, p.objective.M);
  return p;
}

Polytope random_bounded_polytope(Index d, Index extra_rows, std::mt19937_64& rng) {
  const Polytope box = box_polytope(d, 0.0, 1.0);
  if (extra_rows <= 0) return box;
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.1, 0.5);
  const Vector center = Vector::Constant(d, 0.5);
  Matrix A(2 * d + extra_rows, d);
  Vector b(2 * d + extra_rows);
  A.topRows(2 * d) = box.A;
  b.head(2 * d) = box.b;
  for (Index i = 0; i < extra_rows; ++i) {
    Vector a(d);
    do {
      for (Index j = 0; j < d; ++j) a[j] = normal(rng);
    } while (a.norm() < 1e-6);
    a.normalize();
    A.row(2 * d + i) = a.transpose();
    b[2 * d + i] = a.dot(center) + unif(rng);
  }
  return Polytope(std::move(A), std::move(b));
}

Problem synthetic_problem(const std::string& kind, Index d, Index m,
                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Problem p;
  p.id = kind;
  if (kind == "quad-box" || kind == "quad-box-outside") {
    p.polytope = box_polytope(d, 0.0, 1.0);
    Vector c(d);
    if (kind == "quad-box") {
      for (Index j = 0; j < d; ++j) c[j] = 0.25 + 0.5 * unif(rng);
      p.f_star = 0.0;
    } else {
      for (Index j = 0; j < d; ++j) c[j] = 1.2 + 0.6 * unif(rng);
      p.f_star = (c - project(p.polytope, c)).squaredNorm();
    }
    p.objective = quadratic_objective(c, quadratic_grad_bound(p.polytope, c));
    p.x0 = Vector::Constant(d, 0.5);
  } else if (kind == "quad-rand-poly") {
    const Index extra = std::max<Index>(0, m - 2 * d);
    p.polytope = random_bounded_polytope(d, extra, rng);
    Vector c(d);
    for (Index j = 0; j < d; ++j) c[j] = 0.2 + 0.9 * unif(rng);
    p.f_star = (c - project(p.polytope, c)).squaredNorm();
    p.objective = quadratic_objective(c, quadratic_grad_bound(p.polytope, c));
    p.x0 = Vector::Constant(d, 0.5);
  } else if (kind == "trig-box") {
    p.polytope = box_polytope(d, 0.0, 1.0);
    Vector c(d);
    for (Index j = 0; j < d; ++j) c[j] = 0.25 + 0.5 * unif(rng);
    const double amp = 0.3, omega = 6.0;
    p.objective.value = [c, amp, omega](const Vector& x) {
      double s = 0.0;
      for (Index j = 0; j < x.size(); ++j) s += std::sin(omega * x[j]);
      return (x - c).squaredNorm() + amp * s;
    };
    p.objective.gradient = [c, amp, omega](const Vector& x) {
      Vector g = 2.0 * (x - c);
      for (Index j = 0; j < x.size(); ++j) g[j] += amp * omega * std::cos(omega * x[j]);
      return g;
    };
    p.objective.L = 2.0 + amp * omega * omega;
    p.objective.M = quadratic_grad_bound(p.polytope, c) +
                    amp * omega * std::sqrt(static_cast<double>(d));
    p.objective.is_convex = false;
    p.x0 = Vector::Constant(d, 0.5);
  } else {
    throw std::invalid_argument("synthetic_problem: unknown kind '" + kind + "'");
  }
  return p;
}

Problem make_problem(const std::string& id, Index d, Index m, std::uint64_t seed) {
  if (id == "cutting-machine") return cutting_machine_problem(0);
  if (id == "cutting-machine-alt") return cutting_machine_problem(1);
  return synthetic_problem(id, d, m, seed);
}

}  // namespace rfw
