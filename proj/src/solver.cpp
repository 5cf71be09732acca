#include "rfw/solver.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "rfw/linprog.hpp"
#include "rfw/storm.hpp"

namespace rfw {

namespace {

constexpr double kTieTol = 1e-9;

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

Vector lmo(const Polytope& P, const Vector& c) {
  if (c.size() != P.dim()) throw std::invalid_argument("lmo: dimension mismatch");
  const Index m = P.num_constraints();
  const Index d = P.dim();

  // Optimal value first, then sequentially minimize each coordinate subject
  // to near-optimality of all previous levels: lexicographic tie-breaking.
  Matrix A(m + d + 1, d);
  Vector b(m + d + 1);
  A.topRows(m) = P.A;
  b.head(m) = P.b;

  LpResult lp = solve_lp(c, P.A, P.b);
  if (lp.status == LpStatus::Infeasible)
    throw std::runtime_error("lmo: infeasible polytope");
  if (lp.status == LpStatus::Unbounded)
    throw std::runtime_error("lmo: unbounded direction");
  A.row(m) = c.transpose();
  b[m] = lp.objective + kTieTol * (1.0 + std::abs(lp.objective));

  Vector x = lp.x;
  for (Index j = 0; j < d; ++j) {
    Vector ej = Vector::Zero(d);
    ej[j] = 1.0;
    const Index rows = m + 1 + j;
    lp = solve_lp(ej, A.topRows(rows), b.head(rows));
    // The stacked tolerance windows can fall below the solver's feasibility
    // tolerance on ill-scaled rows; refinement is best-effort, so keep the
    // last point rather than fail.
    if (lp.status != LpStatus::Optimal) break;
    x = lp.x;
    A.row(rows) = ej.transpose();
    b[rows] = lp.objective + kTieTol * (1.0 + std::abs(lp.objective));
  }

  // The stacked tie-break tolerances leave the solution within O(d kTieTol)
  // of a vertex; snap onto the exact intersection of the tight constraints.
  Vector r = P.b - P.A * x;
  std::vector<Index> tight;
  for (Index i = 0; i < m; ++i)
    if (std::abs(r[i]) <= 1e-4) tight.push_back(i);
  if (tight.size() >= static_cast<std::size_t>(d)) {
    Matrix B(static_cast<Index>(tight.size()), d);
    Vector rhs(static_cast<Index>(tight.size()));
    for (std::size_t k = 0; k < tight.size(); ++k) {
      B.row(static_cast<Index>(k)) = P.A.row(tight[k]);
      rhs[static_cast<Index>(k)] = P.b[tight[k]];
    }
    Eigen::ColPivHouseholderQR<Matrix> qr(B);
    if (qr.rank() == d) {
      const Vector snapped = qr.solve(rhs);
      const double obj = c.dot(x);
      if ((snapped - x).norm() <= 1e-3 &&
          (P.b - P.A * snapped).minCoeff() >= -kFeasibilityTol &&
          c.dot(snapped) <= obj + 1e-6 * (1.0 + std::abs(obj)))
        x = snapped;
    }
  }
  return x;
}

double fw_gap(const Polytope& P, const Vector& grad, const Vector& x) {
  const LpResult lp = solve_lp(grad, P.A, P.b);
  if (lp.status == LpStatus::Infeasible)
    throw std::runtime_error("fw_gap: infeasible polytope");
  if (lp.status == LpStatus::Unbounded)
    throw std::runtime_error("fw_gap: unbounded direction");
  return grad.dot(x) - lp.objective;
}

StepSizes schedule(Variant variant, std::int64_t t) {
  if (t < 0) throw std::invalid_argument("schedule: t must be nonnegative");
  const double tp2 = static_cast<double>(t) + 2.0;
  switch (variant) {
    case Variant::NonconvexStochastic: {
      const double v = std::pow(tp2, -2.0 / 3.0);
      return {v, v};
    }
    case Variant::NonconvexDeterministic:
      return {1.0 / std::sqrt(tp2), 1.0};
    case Variant::ConvexStochastic:
      return {1.0 / tp2, 1.0 / tp2};
    case Variant::ConvexDeterministic:
      return {2.0 / tp2, 1.0};
  }
  throw std::invalid_argument("schedule: unknown variant");
}

std::int64_t horizon(Variant variant, double eps, const ScheduleConstants& c,
                     double f_gap0) {
  if (eps <= 0.0) throw std::invalid_argument("horizon: eps must be positive");
  double T;
  switch (variant) {
    case Variant::NonconvexStochastic:
      T = std::max({216.0 * std::pow(f_gap0, 3) / std::pow(eps, 3),
                    c.C3 / std::pow(eps, 3), c.C4 / std::pow(eps, 1.5)});
      break;
    case Variant::NonconvexDeterministic:
      T = std::max(8.0 * f_gap0 * f_gap0, c.C5) / (eps * eps);
      break;
    case Variant::ConvexStochastic:
      T = std::max(4.0 * f_gap0 * f_gap0, c.C6) / (eps * eps);
      break;
    case Variant::ConvexDeterministic:
      T = 2.0 * c.C9 / eps;
      break;
    default:
      throw std::invalid_argument("horizon: unknown variant");
  }
  if (!(T < 9.0e18)) throw std::runtime_error("horizon: value overflows");
  return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(T)));
}

RunResult reliable_fw(const RunConfig& cfg, const Objective& objective,
                      NoisyFeasibilityOracle& nfo, StochasticGradientOracle& sfo,
                      const Vector& x0, const ScheduleConstants& constants,
                      const GeometrySummary& geom, std::int64_t T) {
  const Polytope& truth = nfo.hidden_polytope();  // diagnostics only
  const Index d = x0.size();
  const Index m = truth.num_constraints();
  if (T < 1) throw std::invalid_argument("reliable_fw: T must be >= 1");

  const bool convex = cfg.variant == Variant::ConvexStochastic ||
                      cfg.variant == Variant::ConvexDeterministic;
  const double lam2_term =
      1.0 + static_cast<double>(d) * geom.diameter * geom.diameter / (cfg.r0 * cfg.r0);

  RunResult res;
  res.constants = constants;
  res.T = T;
  res.trace.reserve(static_cast<std::size_t>(T));

  LeastSquaresState ls(d, m, x0, cfg.r0);
  StormState storm;
  Vector x = x0;
  Vector g;
  std::vector<double> etas, Ns;
  etas.reserve(static_cast<std::size_t>(T));
  Ns.reserve(static_cast<std::size_t>(T) + 1);

  for (std::int64_t t = 0; t < T; ++t) {
    const StepSizes ss = schedule(cfg.variant, t);
    const std::int64_t n_t = min_samples(cfg.variant, t, constants.C2, d, cfg.scale);

    Matrix X, Y;
    try {
      X = collect_data_points(x, n_t, cfg.r0);
      Y = nfo.query(X);
      ls.update(X, Y);
    } catch (const std::exception& e) {
      throw std::runtime_error("reliable_fw: data collection failed at t=" +
                               std::to_string(t) + ": " + e.what());
    }
    const EstimatedPolytope est = ls.estimate();

    if (t == 0) {
      const XiToken tok = sfo.mint_token();
      g = sfo.evaluate(x, tok);
      storm = storm_init(g, x);
    } else {
      const XiToken tok = sfo.mint_token();
      GradientSample at_x{sfo.evaluate(x, tok), tok.seed};
      if (ss.rho < 1.0) {
        GradientSample at_prev{sfo.evaluate(storm.x_prev, tok), tok.seed};
        g = storm_update(storm, at_x, at_prev, ss.rho, x);
      } else {
        g = at_x.g;  // momentum term vanishes; skip the second evaluation
        storm.g_prev = g;
        storm.x_prev = x;
        ++storm.t;
      }
    }

    // LMO over the estimate intersected with a box around the query mean;
    // early noisy estimates can be unbounded, the box guarantees termination.
    const Vector xbar = ls.mean_point();
    const double half = cfg.box_factor * geom.radius;
    Matrix Ab(m + 2 * d, d);
    Vector bb(m + 2 * d);
    Ab.topRows(m) = est.A_hat;
    bb.head(m) = est.b_hat;
    Ab.bottomRows(2 * d).setZero();
    for (Index j = 0; j < d; ++j) {
      Ab(m + 2 * j, j) = 1.0;
      bb[m + 2 * j] = xbar[j] + half;
      Ab(m + 2 * j + 1, j) = -1.0;
      bb[m + 2 * j + 1] = -(xbar[j] - half);
    }
    Vector v;
    try {
      v = lmo(Polytope(Ab, bb), g);
    } catch (const std::exception& e) {
      throw std::runtime_error("reliable_fw: LMO failed at t=" + std::to_string(t) +
                               ": " + e.what());
    }
    bool box_active = false;
    for (Index j = 0; j < d; ++j)
      if (v[j] >= xbar[j] + half - 1e-7 || v[j] <= xbar[j] - half + 1e-7)
        box_active = true;
    if (box_active) ++res.box_activations;

    IterateRecord rec;
    rec.t = t;
    rec.x = x;
    rec.g = g;
    rec.v_hat = v;
    rec.eta = ss.eta;
    rec.rho = ss.rho;
    rec.n_t = n_t;
    rec.N_t = ls.count();
    rec.f = objective.value(x);
    const Vector grad_true = objective.gradient(x);
    rec.fw_gap_true = fw_gap(truth, grad_true, x);
    // Row-normalized margins: signed Euclidean distance to each face, so the
    // safe threshold and the vicinity guard share one unit.
    Vector margins = residuals(truth, x);
    for (Index i = 0; i < m; ++i) margins[i] /= truth.A.row(i).norm();
    rec.min_true_residual = margins.minCoeff();
    rec.grad_err = (g - grad_true).norm();
    rec.q_norm = ls.ready() ? ls.q_matrix().operatorNorm()
                            : std::numeric_limits<double>::quiet_NaN();
    rec.box_active = box_active;

    const double Nt = static_cast<double>(ls.count());
    double kappa_t = 0.0;
    if (nfo.sigma_bar() > 0.0)
      kappa_t = nfo.sigma_bar() *
                psi_inverse(std::max(2.0, Nt), constants.zeta / static_cast<double>(m), d);
    rec.safety_margin_val =
        ls.ready() ? safety_margin(ls, est, x, kappa_t)
                   : std::numeric_limits<double>::quiet_NaN();

    etas.push_back(ss.eta);
    Ns.push_back(Nt);
    rec.h_val = (t == 0) ? constants.eps0 - constants.kappa * constants.C0 / std::sqrt(Nt)
                         : h_value(etas, Ns, t, constants);
    rec.nt2_ok = rec.h_val > 0.0 &&
                 constants.kappa * constants.kappa / Nt * lam2_term <=
                     rec.h_val * rec.h_val;

    rec.sfo_count = sfo.query_count();
    rec.nfo_count = nfo.query_count();
    res.trace.push_back(std::move(rec));

    x = step(x, v, ss.eta);
  }

  if (convex) {
    res.t0 = T - 1;
  } else {
    std::mt19937_64 rng(mix_seed(cfg.seed, 3));
    res.t0 = std::uniform_int_distribution<std::int64_t>(0, T - 1)(rng);
  }
  res.x_out = res.trace[static_cast<std::size_t>(res.t0)].x;
  res.final_estimate = ls.estimate();
  res.sfo_count = sfo.query_count();
  res.nfo_count = nfo.query_count();
  res.guard_trips = nfo.guard_trips();
  for (const IterateRecord& r : res.trace)
    if (r.min_true_residual < -1e-9) res.safe = false;
  return res;
}

PreparedRun prepare_run(const RunConfig& cfg, const Problem& problem) {
  if (cfg.sigma < 0.0)
    throw std::invalid_argument("prepare_run: sigma must be nonnegative");
  if (cfg.sigma0 < 0.0)
    throw std::invalid_argument("prepare_run: sigma0 must be nonnegative");
  if (cfg.r0 <= 0.0) throw std::invalid_argument("prepare_run: r0 must be positive");
  if (cfg.scale <= 0.0 || cfg.scale > 1.0)
    throw std::invalid_argument("prepare_run: scale must lie in (0,1]");
  if (cfg.delta <= 0.0 || cfg.delta >= 1.0)
    throw std::invalid_argument("prepare_run: delta must lie in (0,1)");
  PreparedRun prep;
  prep.geom = geometry_summary(problem.polytope);
  prep.normalized = normalize(problem.polytope, cfg.sigma, prep.geom);

  prep.f_gap0 = cfg.f_gap0;
  if (prep.f_gap0 <= 0.0) {
    const double f0 = problem.objective.value(problem.x0);
    if (problem.f_star.has_value()) {
      prep.f_gap0 = f0 - *problem.f_star;
    } else {
      // Vertex heuristic (valid only as a rough convex bound), doubled.
      double vmin = std::numeric_limits<double>::infinity();
      for (const Vector& v : prep.geom.vertices)
        vmin = std::min(vmin, problem.objective.value(v));
      prep.f_gap0 = 2.0 * std::max(f0 - vmin, 1e-6);
      prep.f_gap0_estimated = true;
    }
  }

  ConstantsInput ci;
  ci.x0 = problem.x0;
  ci.delta = cfg.delta;
  ci.r0 = cfg.r0;
  ci.tau = cfg.tau;
  ci.L = problem.objective.L;
  ci.M = problem.objective.M;
  ci.L0 = problem.objective.L;  // additive noise model: L0 = L
  ci.sigma0 = cfg.sigma0;
  ci.f_gap0 = prep.f_gap0;
  ci.variant = cfg.variant;
  ci.mode = cfg.kappa_mode;
  ci.scale = cfg.scale;

  // T enters the constants through zeta = delta/T and the constants set T;
  // iterate the (slowly varying) coupling.
  std::int64_t T = cfg.horizon_override > 0 ? cfg.horizon_override : 1000;
  for (int it = 0; it < 5; ++it) {
    ci.T = static_cast<double>(T);
    prep.constants = compute_constants(prep.normalized, prep.geom, ci);
    if (cfg.horizon_override > 0) break;
    std::int64_t T_new;
    try {
      T_new = horizon(cfg.variant, cfg.eps, prep.constants, prep.f_gap0);
    } catch (const std::runtime_error&) {
      // Theorem horizon beyond int64: keep the ledger printable; an actual
      // run still requires an explicit override.
      T_new = std::numeric_limits<std::int64_t>::max();
    }
    if (T_new == T) break;
    T = T_new;
  }
  prep.T = T;
  return prep;
}

RunResult reliable_fw(const RunConfig& cfg, const Problem& problem) {
  const PreparedRun prep = prepare_run(cfg, problem);
  if (prep.T > 100'000'000)
    throw std::runtime_error(
        "reliable_fw: theorem horizon exceeds 1e8 iterations; set a horizon override");

  NoisyFeasibilityOracle nfo(prep.normalized.polytope, prep.normalized.sigma_bar,
                             mix_seed(cfg.seed, 1), cfg.guard, cfg.r0);
  StochasticGradientOracle sfo(problem.objective, problem.polytope.dim(), cfg.sigma0,
                               mix_seed(cfg.seed, 2));
  RunResult res = reliable_fw(cfg, problem.objective, nfo, sfo, problem.x0,
                              prep.constants, prep.geom, prep.T);
  res.f_gap0_estimated = prep.f_gap0_estimated;
  return res;
}

std::string trace_csv_header() {
  return "t,eta,rho,n_t,N_t,f,fw_gap_true,min_true_residual,safety_margin,"
         "grad_err,sfo_count,nfo_count";
}

std::string trace_csv_row(const IterateRecord& r) {
  std::ostringstream os;
  os.precision(17);
  os << r.t << ',' << r.eta << ',' << r.rho << ',' << r.n_t << ',' << r.N_t << ','
     << r.f << ',' << r.fw_gap_true << ',' << r.min_true_residual << ','
     << r.safety_margin_val << ',' << r.grad_err << ',' << r.sfo_count << ','
     << r.nfo_count;
  return os.str();
}

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::NonconvexStochastic: return "nonconvex-stochastic";
    case Variant::NonconvexDeterministic: return "nonconvex-deterministic";
    case Variant::ConvexStochastic: return "convex-stochastic";
    case Variant::ConvexDeterministic: return "convex-deterministic";
  }
  return "unknown";
}

Variant variant_from_name(const std::string& name) {
  if (name == "nonconvex-stochastic") return Variant::NonconvexStochastic;
  if (name == "nonconvex-deterministic") return Variant::NonconvexDeterministic;
  if (name == "convex-stochastic") return Variant::ConvexStochastic;
  if (name == "convex-deterministic") return Variant::ConvexDeterministic;
  throw std::invalid_argument("unknown variant '" + name + "'");
}

}  // namespace rfw
