#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "rfw/oracles.hpp"
#include "rfw/polytope.hpp"
#include "rfw/solver.hpp"

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

bool lex_less(const Vector& a, const Vector& b) {
  for (Index j = 0; j < a.size(); ++j) {
    if (a[j] < b[j] - 1e-9) return true;
    if (a[j] > b[j] + 1e-9) return false;
  }
  return false;
}

}  // namespace

TEST_CASE("lmo picks the separable optimum on the unit box") {
  Vector c(2);
  c << 1.0, -1.0;
  const Vector v = lmo(unit_box(2), c);
  CHECK(v[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(v[1] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("lmo with a zero direction returns the lexicographically smallest vertex") {
  const Vector v = lmo(unit_box(3), Vector::Zero(3));
  CHECK(v.norm() <= 1e-8);
}

TEST_CASE("lmo matches brute-force enumeration with lexicographic ties") {
  std::mt19937_64 rng(29);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 300; ++rep) {
    const Index d = 2 + static_cast<Index>(rng() % 3);
    const Polytope P = random_bounded_polytope(d, 2, rng);
    Vector c(d);
    for (Index j = 0; j < d; ++j) c[j] = normal(rng);
    if (rep % 7 == 0) c.setZero();  // exercise the pure tie-break path
    const Vector v = lmo(P, c);

    const std::vector<Vector> verts = enumerate_vertices(P);
    double best = std::numeric_limits<double>::infinity();
    for (const Vector& w : verts) best = std::min(best, c.dot(w));
    CHECK(c.dot(v) <= best + 1e-8);
    // Among near-optimal vertices the result is lexicographically minimal.
    for (const Vector& w : verts)
      if (c.dot(w) <= best + 1e-10) CHECK(!lex_less(w, v));
  }
}

TEST_CASE("lmo output satisfies d independent constraints with equality") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 50; ++rep) {
    const Polytope P = random_bounded_polytope(3, 2, rng);
    Vector c(3);
    for (Index j = 0; j < 3; ++j) c[j] = normal(rng);
    const Vector v = lmo(P, c);
    const Vector r = residuals(P, v);
    std::vector<Index> tight;
    for (Index i = 0; i < r.size(); ++i)
      if (std::abs(r[i]) <= 1e-8) tight.push_back(i);
    REQUIRE(tight.size() >= 3);
    Matrix B(static_cast<Index>(tight.size()), 3);
    for (std::size_t k = 0; k < tight.size(); ++k)
      B.row(static_cast<Index>(k)) = P.A.row(tight[k]);
    CHECK(Eigen::FullPivLU<Matrix>(B).rank() == 3);
  }
}

TEST_CASE("lmo rejects infeasible and unbounded inputs") {
  Matrix A(2, 1);
  Vector b(2);
  A << 1.0, -1.0;
  b << -1.0, -1.0;
  Vector c(1);
  c << 1.0;
  CHECK_THROWS_AS(lmo(Polytope(A, b), c), std::runtime_error);

  Matrix A2(1, 2);
  Vector b2(1);
  A2 << 1.0, 0.0;
  b2 << 1.0;
  Vector c2(2);
  c2 << 0.0, 1.0;
  CHECK_THROWS_AS(lmo(Polytope(A2, b2), c2), std::runtime_error);
}

TEST_CASE("fw gap cases") {
  const Polytope box = unit_box(2);
  // Linear objective: at the minimizing vertex the gap vanishes.
  Vector grad(2);
  grad << 1.0, 2.0;
  const Vector vstar = lmo(box, grad);
  CHECK(fw_gap(box, grad, vstar) == doctest::Approx(0.0).epsilon(1e-10));
  // Zero gradient: gap vanishes anywhere.
  CHECK(fw_gap(box, Vector::Zero(2), Vector::Constant(2, 0.3)) == 0.0);
  // Brute force: gap equals max over vertices of <grad, x - v>.
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 40; ++rep) {
    const Polytope P = random_bounded_polytope(2, 2, rng);
    Vector g(2), x(2);
    g << normal(rng), normal(rng);
    x << 0.5, 0.5;
    double best = -std::numeric_limits<double>::infinity();
    for (const Vector& v : enumerate_vertices(P)) best = std::max(best, g.dot(x - v));
    CHECK(fw_gap(P, g, x) == doctest::Approx(best).epsilon(1e-9));
  }
}

TEST_CASE("step sizes follow the four schedules") {
  CHECK(schedule(Variant::NonconvexStochastic, 0).eta ==
        doctest::Approx(std::pow(2.0, -2.0 / 3.0)).epsilon(1e-14));
  CHECK(schedule(Variant::NonconvexStochastic, 5).rho ==
        doctest::Approx(std::pow(7.0, -2.0 / 3.0)).epsilon(1e-14));
  CHECK(schedule(Variant::NonconvexDeterministic, 2).eta ==
        doctest::Approx(0.5).epsilon(1e-14));
  CHECK(schedule(Variant::NonconvexDeterministic, 2).rho == 1.0);
  CHECK(schedule(Variant::ConvexStochastic, 3).eta == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(schedule(Variant::ConvexStochastic, 3).rho == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(schedule(Variant::ConvexDeterministic, 0).eta == 1.0);
  CHECK(schedule(Variant::ConvexDeterministic, 0).rho == 1.0);
  for (int t = 0; t < 100; ++t)
    for (Variant v : {Variant::NonconvexStochastic, Variant::NonconvexDeterministic,
                      Variant::ConvexStochastic, Variant::ConvexDeterministic}) {
      const StepSizes s = schedule(v, t);
      CHECK(s.eta > 0.0);
      CHECK(s.eta <= 1.0);
      CHECK(s.rho > 0.0);
      CHECK(s.rho <= 1.0);
    }
}

TEST_CASE("horizon homogeneity in the target accuracy") {
  ScheduleConstants c;
  c.C3 = 1.0;
  c.C4 = 1.0;
  c.C5 = 2.0;
  c.C6 = 2.0;
  c.C9 = 3.0;
  const double f_gap0 = 1.5;
  const std::int64_t T1 = horizon(Variant::ConvexDeterministic, 0.1, c, f_gap0);
  const std::int64_t T2 = horizon(Variant::ConvexDeterministic, 0.05, c, f_gap0);
  CHECK(T2 == 2 * T1);
  const std::int64_t S1 = horizon(Variant::NonconvexStochastic, 0.2, c, f_gap0);
  const std::int64_t S2 = horizon(Variant::NonconvexStochastic, 0.1, c, f_gap0);
  CHECK(S2 == 8 * S1);
  // Independent recomputation for the remaining variants.
  CHECK(horizon(Variant::NonconvexDeterministic, 0.1, c, f_gap0) ==
        static_cast<std::int64_t>(std::ceil(8.0 * f_gap0 * f_gap0 / 0.01)));
  CHECK(horizon(Variant::ConvexStochastic, 0.1, c, f_gap0) ==
        static_cast<std::int64_t>(std::ceil(4.0 * f_gap0 * f_gap0 / 0.01)));
  CHECK_THROWS_AS(horizon(Variant::ConvexDeterministic, 0.0, c, f_gap0),
                  std::invalid_argument);
}

TEST_CASE("step is the documented convex combination") {
  Vector x = Vector::Zero(2), v = Vector::Ones(2);
  CHECK((step(x, v, 1.0) - v).norm() == 0.0);
  CHECK((step(x, v, 0.5) - Vector::Constant(2, 0.5)).norm() == 0.0);
  CHECK_THROWS_AS(step(x, v, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(step(x, v, 1.5), std::invalid_argument);
}

TEST_CASE("variant names round-trip") {
  for (Variant v : {Variant::NonconvexStochastic, Variant::NonconvexDeterministic,
                    Variant::ConvexStochastic, Variant::ConvexDeterministic})
    CHECK(variant_from_name(variant_name(v)) == v);
  CHECK_THROWS_AS(variant_from_name("bogus"), std::invalid_argument);
}

TEST_CASE("a full run produces a consistent trace") {
  const Problem p = synthetic_problem("quad-box", 2, 4, 3);
  RunConfig cfg;
  cfg.variant = Variant::ConvexDeterministic;
  cfg.sigma = 1e-4;
  cfg.sigma0 = 0.0;
  cfg.r0 = 0.25;
  cfg.seed = 5;
  cfg.scale = 1.0;  // theorem-rate sampling, so the safety guarantee applies
  cfg.horizon_override = 40;
  const RunResult res = reliable_fw(cfg, p);

  REQUIRE(res.trace.size() == 40);
  CHECK(res.T == 40);
  CHECK(res.t0 == 39);  // convex variants return the final iterate
  CHECK((res.x_out - res.trace.back().x).norm() == 0.0);

  std::int64_t total_n = 0;
  for (std::size_t i = 0; i < res.trace.size(); ++i) {
    const IterateRecord& r = res.trace[i];
    CHECK(r.t == static_cast<std::int64_t>(i));
    total_n += r.n_t;
    CHECK(r.N_t == total_n);
    if (i > 0) CHECK(r.N_t > res.trace[i - 1].N_t);
    CHECK(r.eta == doctest::Approx(schedule(cfg.variant, r.t).eta).epsilon(1e-14));
  }
  CHECK(res.nfo_count == total_n);
  CHECK(res.sfo_count == 40);  // deterministic mode: one evaluation per step
  // Any feasibility slip is bounded by the estimation-error scale, and the
  // safe flag agrees with the recorded residuals.
  bool all_nonneg = true;
  for (const IterateRecord& r : res.trace) {
    // Margins are row-normalized distances; the beta error bound divides by
    // the (uniform) row norm L_A when expressed in the same unit.
    const double err_scale =
        res.constants.kappa * res.constants.C0 /
        (std::sqrt(static_cast<double>(r.N_t)) * res.constants.L_A);
    CHECK(r.min_true_residual >= -err_scale);
    all_nonneg = all_nonneg && r.min_true_residual >= -1e-9;
  }
  CHECK(res.safe == all_nonneg);
}

TEST_CASE("stochastic mode accounts for 2T-1 gradient evaluations") {
  const Problem p = synthetic_problem("quad-box", 2, 4, 3);
  RunConfig cfg;
  cfg.variant = Variant::NonconvexStochastic;
  cfg.sigma = 1e-4;
  cfg.sigma0 = 0.01;
  cfg.r0 = 0.25;
  cfg.seed = 5;
  cfg.scale = 1e-3;
  cfg.horizon_override = 25;
  const RunResult res = reliable_fw(cfg, p);
  CHECK(res.sfo_count == 2 * 25 - 1);
  CHECK(res.t0 >= 0);
  CHECK(res.t0 < 25);
}

TEST_CASE("identical seeds reproduce identical runs") {
  const Problem p = synthetic_problem("quad-box", 2, 4, 9);
  RunConfig cfg;
  cfg.variant = Variant::NonconvexStochastic;
  cfg.sigma = 0.01;
  cfg.sigma0 = 0.05;
  cfg.r0 = 0.2;
  cfg.seed = 77;
  cfg.scale = 1e-3;
  cfg.horizon_override = 20;
  const RunResult a = reliable_fw(cfg, p);
  const RunResult b = reliable_fw(cfg, p);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK((a.trace[i].x - b.trace[i].x).norm() == 0.0);
    CHECK((a.trace[i].g - b.trace[i].g).norm() == 0.0);
    CHECK(trace_csv_row(a.trace[i]) == trace_csv_row(b.trace[i]));
  }
  CHECK((a.x_out - b.x_out).norm() == 0.0);
  cfg.seed = 78;
  const RunResult c = reliable_fw(cfg, p);
  bool differs = false;
  for (std::size_t i = 0; i < a.trace.size(); ++i)
    differs = differs || (a.trace[i].g - c.trace[i].g).norm() > 0.0;
  CHECK(differs);
}

TEST_CASE("noise-free convex run tracks the 2 C9 / (t+2) envelope") {
  const Problem p = synthetic_problem("quad-box", 2, 4, 1);
  RunConfig cfg;
  cfg.variant = Variant::ConvexDeterministic;
  cfg.sigma = 0.0;
  cfg.sigma0 = 0.0;
  cfg.r0 = 0.25;
  cfg.seed = 1;
  cfg.horizon_override = 200;
  const RunResult res = reliable_fw(cfg, p);
  REQUIRE(p.f_star.has_value());
  for (const IterateRecord& r : res.trace) {
    const double bound = 2.0 * res.constants.C9 / (static_cast<double>(r.t) + 2.0);
    CHECK(r.f - *p.f_star <= bound + 1e-9);
  }
  CHECK(res.trace.back().f - *p.f_star <= 0.2);
}

TEST_CASE("true-polytope diagnostics never feed the algorithm") {
  // With zero noise the estimate equals the truth after one batch, so the
  // fw-gap diagnostic computed against the truth must be nonnegative along
  // the whole run and the iterates stay strictly feasible.
  const Problem p = synthetic_problem("quad-box", 2, 4, 21);
  RunConfig cfg;
  cfg.variant = Variant::ConvexDeterministic;
  cfg.sigma = 0.0;
  cfg.sigma0 = 0.0;
  cfg.r0 = 0.2;
  cfg.horizon_override = 30;
  const RunResult res = reliable_fw(cfg, p);
  for (const IterateRecord& r : res.trace) {
    CHECK(r.fw_gap_true >= -1e-10);
    CHECK(r.min_true_residual >= -1e-12);
    CHECK(r.grad_err == 0.0);
  }
}

TEST_CASE("trace csv schema is stable") {
  CHECK(trace_csv_header() ==
        "t,eta,rho,n_t,N_t,f,fw_gap_true,min_true_residual,safety_margin,"
        "grad_err,sfo_count,nfo_count");
  IterateRecord r;
  r.t = 3;
  r.eta = 0.5;
  r.rho = 1.0;
  r.n_t = 4;
  r.N_t = 16;
  r.f = 1.25;
  r.fw_gap_true = 0.5;
  r.min_true_residual = 0.125;
  r.safety_margin_val = 0.25;
  r.grad_err = 0.0;
  r.sfo_count = 7;
  r.nfo_count = 16;
  CHECK(trace_csv_row(r) == "3,0.5,1,4,16,1.25,0.5,0.125,0.25,0,7,16");
}

TEST_CASE("prepared runs resolve the horizon-zeta coupling") {
  const Problem p = synthetic_problem("quad-box", 2, 4, 3);
  RunConfig cfg;
  cfg.variant = Variant::ConvexDeterministic;
  cfg.sigma = 1e-4;
  cfg.r0 = 0.3;
  cfg.eps = 0.1;
  const PreparedRun prep = prepare_run(cfg, p);
  CHECK(prep.T == horizon(cfg.variant, cfg.eps, prep.constants, prep.f_gap0));
  CHECK(prep.constants.zeta ==
        doctest::Approx(cfg.delta / static_cast<double>(prep.T)).epsilon(1e-12));
  CHECK(!prep.f_gap0_estimated);  // quad-box publishes its optimum
}

TEST_CASE("oversized theorem horizons require an explicit override") {
  const Problem p = cutting_machine_problem(0);
  RunConfig cfg;
  cfg.variant = Variant::NonconvexStochastic;
  cfg.sigma = 0.01;
  cfg.r0 = 0.01;
  cfg.eps = 0.1;
  CHECK_THROWS_AS(reliable_fw(cfg, p), std::runtime_error);
}
