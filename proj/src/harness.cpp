#include "rfw/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <random>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "rfw/storm.hpp"

namespace fs = std::filesystem;

namespace rfw {

namespace {

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

Vector random_feasible(const std::vector<Vector>& verts, std::mt19937_64& rng) {
  std::exponential_distribution<double> ed(1.0);
  double total = 0.0;
  Vector x = Vector::Zero(verts.front().size());
  for (const Vector& v : verts) {
    const double w = ed(rng);
    total += w;
    x += w * v;
  }
  return x / total;
}

Matrix beta_of(const Polytope& P) {
  Matrix beta(P.dim() + 1, P.num_constraints());
  beta.topRows(P.dim()) = P.A.transpose();
  beta.bottomRows(1) = P.b.transpose();
  return beta;
}

// ---------- verify suites ----------

VerifyReport verify_lemma1(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 11));
  int violations = 0, checks = 0, skipped = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  for (int p = 0; p < 200; ++p) {
    const Index d = 2 + (p % 2);
    const Polytope P = random_bounded_polytope(d, 2, rng);
    const GeometrySummary geom = geometry_summary(P);
    Vector center = Vector::Zero(d);
    for (const Vector& v : geom.vertices) center += v;
    center /= static_cast<double>(geom.vertices.size());
    const double tau = residuals(P, center).minCoeff() / 2.0;
    if (tau <= 0.0 || is_empty(shrink(P, tau))) {
      ++skipped;
      continue;
    }
    const Polytope Dtau = shrink(P, tau);
    for (int i = 0; i < 100; ++i) {
      const Vector x = random_feasible(geom.vertices, rng);
      const double dist = (x - project(Dtau, x)).norm();
      const double bound = geom.alpha * tau + 1e-9;
      worst_slack = std::min(worst_slack, bound - dist);
      if (dist > bound) ++violations;
      ++checks;
    }
  }
  VerifyReport r;
  r.suite = "lemma1";
  r.pass = violations == 0 && checks > 0;
  std::ostringstream os;
  os << "checks=" << checks << " violations=" << violations << " skipped=" << skipped
     << " worst_slack=" << worst_slack;
  r.details = os.str();
  return r;
}

VerifyReport verify_qnorm(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 13));
  const Index d = 2;
  // Modest probe radius keeps the Lemma 3 bound O(1), where the pinned
  // absolute tolerance is meaningful against double-precision round-off.
  const double r0 = 0.2;
  const Polytope P = random_bounded_polytope(d, 2, rng);
  const GeometrySummary geom = geometry_summary(P);
  const NormalizedPolytope np = normalize(P, 0.01, geom);
  NoisyFeasibilityOracle nfo(np.polytope, np.sigma_bar, mix_seed(seed, 14));
  LeastSquaresState ls(d, np.polytope.num_constraints());
  int violations = 0, checks = 0;
  double worst_slack = std::numeric_limits<double>::infinity();
  Vector x = random_feasible(geom.vertices, rng);
  for (int t = 0; t < 50; ++t) {
    const Matrix X = collect_data_points(x, 8, r0);
    ls.update(X, nfo.query(X));
    const double bound =
        static_cast<double>(d) / (static_cast<double>(ls.count()) * r0 * r0) + 1e-12;
    const double qn = ls.q_matrix().operatorNorm();
    worst_slack = std::min(worst_slack, bound - qn);
    if (qn > bound) ++violations;
    ++checks;
    x = random_feasible(geom.vertices, rng);
  }
  VerifyReport r;
  r.suite = "qnorm";
  r.pass = violations == 0;
  std::ostringstream os;
  os << "checks=" << checks << " violations=" << violations
     << " worst_slack=" << worst_slack;
  r.details = os.str();
  return r;
}

VerifyReport verify_lemma4(std::uint64_t seed) {
  const Index d = 2;
  Matrix A(4, 2);
  Vector b(4);
  A << 1, 0, -1, 0, 0, 1, 0, -1;
  b << 1, 0, 1, 0;
  const Polytope box(A, b);
  const GeometrySummary geom = geometry_summary(box);
  const NormalizedPolytope np = normalize(box, 0.001, geom);
  const Matrix beta_true = beta_of(np.polytope);
  const double zeta = 0.05;
  const double r0 = 0.1;
  const double L_A = 1.0 / (2.0 * geom.alpha);
  const double C0 = std::sqrt(
      static_cast<double>(d) * ((1.0 + geom.radius * geom.radius) / (r0 * r0) + 1.0));
  const Vector x0 = Vector::Constant(d, 0.5);
  int contained = 0, violations = 0;
  for (int trial = 0; trial < 100; ++trial) {
    NoisyFeasibilityOracle nfo(np.polytope, np.sigma_bar, mix_seed(seed, 100 + trial));
    LeastSquaresState ls(d, np.polytope.num_constraints());
    const Matrix X = collect_data_points(x0, 40, r0);
    ls.update(X, nfo.query(X));
    const double N = static_cast<double>(ls.count());
    const double psi =
        psi_inverse(N, zeta / static_cast<double>(np.polytope.num_constraints()), d);
    if (!ellipsoid_contains(ls, beta_true, psi, np.sigma_bar)) continue;
    ++contained;
    const double C1 = np.sigma_bar * psi * (1.0 + geom.radius) * C0 / L_A;
    const EstimatedPolytope est = ls.estimate();
    for (const Vector& v : enumerate_vertices(est.as_polytope())) {
      const double dist = (v - project(np.polytope, v)).norm();
      if (dist > C1 / std::sqrt(N) + 1e-9) ++violations;
    }
  }
  VerifyReport r;
  r.suite = "lemma4";
  r.pass = violations == 0 && contained > 0;
  std::ostringstream os;
  os << "contained_trials=" << contained << " vertex_violations=" << violations;
  r.details = os.str();
  return r;
}

VerifyReport verify_lemma5(std::uint64_t seed) {
  const Index d = 2;
  const double delta = 0.1, alpha = 2.0 / 3.0, sigma0 = 0.05;
  Vector c(2);
  c << 0.3, 0.6;
  Objective f;
  f.value = [c](const Vector& x) { return (x - c).squaredNorm(); };
  f.gradient = [c](const Vector& x) { return Vector(2.0 * (x - c)); };
  f.L = 2.0;
  const double Lambda = std::sqrt(2.0);  // unit-box diameter
  const std::vector<std::int64_t> checkpoints = {10, 50, 200};
  const int runs = 300;
  std::vector<int> violations(checkpoints.size(), 0);
  for (int run = 0; run < runs; ++run) {
    StochasticGradientOracle sfo(f, d, sigma0, mix_seed(seed, 500 + run));
    std::mt19937_64 rng(mix_seed(seed, 900 + run));
    std::uniform_int_distribution<int> corner(0, 3);
    Vector x = Vector::Constant(d, 0.5);
    XiToken tok = sfo.mint_token();
    StormState st = storm_init(sfo.evaluate(x, tok), x);
    Vector g = st.g_prev;
    for (std::int64_t t = 1; t <= checkpoints.back(); ++t) {
      const double eta = std::pow(static_cast<double>(t) + 1.0, -alpha);
      const int k = corner(rng);
      Vector v(d);
      v << (k & 1 ? 1.0 : 0.0), (k & 2 ? 1.0 : 0.0);
      const Vector x_next = x + eta * (v - x);
      const double rho = std::pow(static_cast<double>(t) + 2.0, -alpha);
      tok = sfo.mint_token();
      GradientSample at_x{sfo.evaluate(x_next, tok), tok.seed};
      GradientSample at_prev{sfo.evaluate(x, tok), tok.seed};
      g = storm_update(st, at_x, at_prev, rho, x_next);
      x = x_next;
      for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
        if (t == checkpoints[ci]) {
          const double err = (g - f.gradient(x)).norm();
          if (err > storm_error_bound(t, alpha, f.L, Lambda, sigma0, delta))
            ++violations[ci];
        }
      }
    }
  }
  const double limit =
      delta + 3.0 * std::sqrt(delta * (1.0 - delta) / static_cast<double>(runs));
  bool pass = true;
  std::ostringstream os;
  os << "runs=" << runs << " limit=" << limit;
  for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
    const double freq = static_cast<double>(violations[ci]) / runs;
    os << " t" << checkpoints[ci] << "_freq=" << freq;
    if (freq > limit) pass = false;
  }
  VerifyReport r;
  r.suite = "lemma5";
  r.pass = pass;
  r.details = os.str();
  return r;
}

VerifyReport verify_prop2(std::uint64_t seed) {
  const Index d = 2;
  Matrix A(4, 2);
  Vector b(4);
  A << 1, 0, -1, 0, 0, 1, 0, -1;
  b << 1, 0, 1, 0;
  const Polytope box(A, b);
  const GeometrySummary geom = geometry_summary(box);
  const NormalizedPolytope np = normalize(box, 1e-4, geom);
  const Matrix beta_true = beta_of(np.polytope);
  Vector c(2);
  c << 0.7, 0.35;
  Objective f;
  f.value = [c](const Vector& x) { return (x - c).squaredNorm(); };
  f.gradient = [c](const Vector& x) { return Vector(2.0 * (x - c)); };
  f.L = 2.0;
  const double Lambda = geom.diameter;
  const double r0 = 0.05;
  const double zeta = 0.05;
  const double L_A = 1.0 / (2.0 * geom.alpha);
  const double C0 = std::sqrt(
      static_cast<double>(d) * ((1.0 + geom.radius * geom.radius) / (r0 * r0) + 1.0));
  const Index m = np.polytope.num_constraints();

  NoisyFeasibilityOracle nfo(np.polytope, np.sigma_bar, mix_seed(seed, 21));
  LeastSquaresState ls(d, m);
  Vector x = Vector::Constant(d, 0.25);
  int checked = 0, violations = 0;
  for (std::int64_t t = 0; t < 50; ++t) {
    const double eta = 1.0 / std::sqrt(static_cast<double>(t) + 2.0);
    const Matrix X = collect_data_points(x, 40, r0);
    ls.update(X, nfo.query(X));
    const EstimatedPolytope est = ls.estimate();
    const Vector g = f.gradient(x);  // deterministic mode: rho = 1, sigma0 = 0
    const Vector v = lmo(est.as_polytope(), g);
    const Vector x_next = step(x, v, eta);

    const double N = static_cast<double>(ls.count());
    const double psi = psi_inverse(N, zeta / static_cast<double>(m), d);
    if (ellipsoid_contains(ls, beta_true, psi, np.sigma_bar)) {
      const double C1 = np.sigma_bar * psi * (1.0 + geom.radius) * C0 / L_A;
      const double lhs = fw_gap(np.polytope, g, x);
      const double rhs = (f.value(x) - f.value(x_next)) / eta +
                         (g - f.gradient(x)).norm() * (C1 / std::sqrt(N) + 2.0 * Lambda) +
                         g.norm() * C1 / std::sqrt(N) +
                         (f.L * eta / 2.0) * std::pow(C1 / std::sqrt(N) + Lambda, 2) +
                         1e-6;
      ++checked;
      if (lhs > rhs) ++violations;
    }
    x = x_next;
  }
  VerifyReport r;
  r.suite = "prop2";
  r.pass = violations == 0 && checked > 0;
  std::ostringstream os;
  os << "checked=" << checked << " violations=" << violations;
  r.details = os.str();
  return r;
}

VerifyReport verify_coverage(std::uint64_t seed) {
  // Simplex with unit-norm rows: x >= 0, y >= 0, (x + y)/sqrt(2) <= 1/sqrt(2).
  const Index d = 2;
  Matrix A(3, 2);
  Vector b(3);
  const double s = 1.0 / std::sqrt(2.0);
  A << -1, 0, 0, -1, s, s;
  b << 0, 0, s;
  const Polytope P(A, b);
  const NormalizedPolytope np = normalize(P, 0.01);
  const Matrix beta_true = beta_of(np.polytope);
  const double zeta = 0.1;
  const Vector x0 = Vector::Constant(d, 0.25);
  const int trials = 2000;
  int covered = 0;
  for (int trial = 0; trial < trials; ++trial) {
    NoisyFeasibilityOracle nfo(np.polytope, np.sigma_bar, mix_seed(seed, 3000 + trial));
    LeastSquaresState ls(d, 3);
    const Matrix X = collect_data_points(x0, 20, 0.1);
    ls.update(X, nfo.query(X));
    const double psi = psi_inverse(static_cast<double>(ls.count()), zeta / 3.0, d);
    if (ellipsoid_contains(ls, beta_true, psi, np.sigma_bar)) ++covered;
  }
  const double freq = static_cast<double>(covered) / trials;
  const double se = std::sqrt(zeta * (1.0 - zeta) / trials);
  VerifyReport r;
  r.suite = "coverage";
  r.pass = freq >= 1.0 - zeta - 3.0 * se;
  std::ostringstream os;
  os << "coverage=" << freq << " required=" << 1.0 - zeta - 3.0 * se
     << " slack=" << freq - (1.0 - zeta);
  r.details = os.str();
  return r;
}

VerifyReport verify_appendix_f(std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 77));
  std::normal_distribution<double> nd(0.0, 1.0);
  std::uniform_int_distribution<Index> dims(2, 5);
  int violations = 0;
  double worst = 0.0;
  auto note = [&](double err) {
    worst = std::max(worst, err);
    if (err > 1e-10) ++violations;
  };
  for (int it = 0; it < 1000; ++it) {
    const Index n = dims(rng);
    Matrix R(n, n);
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j) R(i, j) = nd(rng);
    const Matrix S = R.transpose() * R + Matrix::Identity(n, n);

    // Sherman-Morrison-Woodbury, rank one.
    Vector u(n), v(n);
    for (Index i = 0; i < n; ++i) {
      u[i] = nd(rng);
      v[i] = nd(rng);
    }
    const Matrix Sinv = S.inverse();
    const Matrix lhs = (S + u * v.transpose()).inverse();
    const Matrix rhs =
        Sinv - (Sinv * u) * (v.transpose() * Sinv) / (1.0 + v.dot(Sinv * u));
    note((lhs - rhs).norm() / std::max(1.0, rhs.norm()));

    // 2x2 block inverse via Schur complement on a symmetric partition.
    const Index k = n / 2;
    const Matrix Ab = S.topLeftCorner(k, k);
    const Matrix Bb = S.topRightCorner(k, n - k);
    const Matrix Cb = S.bottomLeftCorner(n - k, k);
    const Matrix Db = S.bottomRightCorner(n - k, n - k);
    const Matrix Dinv = Db.inverse();
    const Matrix TL = (Ab - Bb * Dinv * Cb).inverse();
    Matrix block(n, n);
    block.topLeftCorner(k, k) = TL;
    block.topRightCorner(k, n - k) = -TL * Bb * Dinv;
    block.bottomLeftCorner(n - k, k) = -Dinv * Cb * TL;
    block.bottomRightCorner(n - k, n - k) = Dinv + Dinv * Cb * TL * Bb * Dinv;
    note((block - S.inverse()).norm() / std::max(1.0, block.norm()));

    // |[I, x]| = sqrt(1 + |x|^2).
    Vector x(n);
    for (Index i = 0; i < n; ++i) x[i] = nd(rng);
    Matrix Ix(n, n + 1);
    Ix << Matrix::Identity(n, n), x;
    note(std::abs(Ix.operatorNorm() - concat_identity_norm(x)));

    // Ellipsoid re-parametrization: x0 - r S^{1/2} u, |u| <= 1.
    const Eigen::SelfAdjointEigenSolver<Matrix> es(S);
    const Matrix root = es.operatorSqrt();
    Vector x0(n), uu(n);
    for (Index i = 0; i < n; ++i) {
      x0[i] = nd(rng);
      uu[i] = nd(rng);
    }
    uu.normalize();
    const double radius = 0.5 + std::abs(nd(rng));
    const Vector p = x0 - radius * (root * uu);
    const Vector diff = p - x0;
    note(std::abs(diff.dot(S.inverse() * diff) - radius * radius) /
         (radius * radius));
  }
  VerifyReport r;
  r.suite = "appendixF";
  r.pass = violations == 0;
  std::ostringstream os;
  os << "instances=1000 violations=" << violations << " worst_err=" << worst;
  r.details = os.str();
  return r;
}

}  // namespace

std::vector<std::string> verify_suites() {
  return {"lemma1", "qnorm", "lemma4", "lemma5", "prop2", "coverage", "appendixF"};
}

VerifyReport verify(const std::string& suite_id, std::uint64_t seed) {
  if (suite_id == "lemma1") return verify_lemma1(seed);
  if (suite_id == "qnorm") return verify_qnorm(seed);
  if (suite_id == "lemma4") return verify_lemma4(seed);
  if (suite_id == "lemma5") return verify_lemma5(seed);
  if (suite_id == "prop2") return verify_prop2(seed);
  if (suite_id == "coverage") return verify_coverage(seed);
  if (suite_id == "appendixF") return verify_appendix_f(seed);
  throw std::invalid_argument("verify: unknown suite '" + suite_id + "'");
}

std::string constants_report(const Problem& problem, const RunConfig& cfg) {
  const PreparedRun prep = prepare_run(cfg, problem);
  const ScheduleConstants& c = prep.constants;
  const Index d = problem.polytope.dim();
  std::ostringstream os;
  os << "problem=" << problem.id << '\n'
     << "variant=" << variant_name(cfg.variant) << '\n'
     << "d=" << d << '\n'
     << "m=" << problem.polytope.num_constraints() << '\n'
     << "sigma=" << fmt(cfg.sigma) << '\n'
     << "sigma_bar=" << fmt(prep.normalized.sigma_bar) << '\n'
     << "sigma0=" << fmt(cfg.sigma0) << '\n'
     << "delta=" << fmt(cfg.delta) << '\n'
     << "r0=" << fmt(cfg.r0) << '\n'
     << "T="
     << (prep.T == std::numeric_limits<std::int64_t>::max() ? std::string("overflow")
                                                            : std::to_string(prep.T))
     << '\n'
     << "f_gap0=" << fmt(prep.f_gap0) << '\n'
     << "f_gap0_estimated=" << (prep.f_gap0_estimated ? 1 : 0) << '\n'
     << "Lambda=" << fmt(prep.geom.diameter) << '\n'
     << "Gamma=" << fmt(prep.geom.radius) << '\n'
     << "rho_min=" << fmt(prep.geom.rho_min) << '\n'
     << "alpha=" << fmt(prep.geom.alpha) << '\n'
     << "eps0=" << fmt(c.eps0) << '\n'
     << "L_A=" << fmt(c.L_A) << '\n'
     << "tau=" << fmt(c.tau) << '\n'
     << "zeta=" << fmt(c.zeta) << '\n'
     << "psi_inv=" << fmt(c.psi_inv) << '\n'
     << "kappa=" << fmt(c.kappa) << '\n'
     << "N_ref=" << fmt(c.N_ref) << '\n'
     << "C0=" << fmt(c.C0) << '\n'
     << "C1=" << fmt(c.C1) << '\n'
     << "C2=" << fmt(c.C2) << '\n'
     << "C3=" << fmt(c.C3) << '\n'
     << "C4=" << fmt(c.C4) << '\n'
     << "C5=" << fmt(c.C5) << '\n'
     << "C6=" << fmt(c.C6) << '\n'
     << "C7=" << fmt(c.C7) << '\n'
     << "C8=" << fmt(c.C8) << '\n'
     << "C9=" << fmt(c.C9) << '\n';
  const auto n0_entry = [&](const char* key, double scale) {
    os << key << '=';
    try {
      os << min_samples(cfg.variant, 0, c.C2, d, scale);
    } catch (const std::runtime_error&) {
      os << "overflow";  // exceeds int64; report instead of aborting the ledger
    }
    os << '\n';
  };
  n0_entry("n0_theory", 1.0);
  n0_entry("n0_practical", cfg.scale);
  return os.str();
}

// ---------- plots ----------

namespace {

struct Viewport {
  double xmin, xmax, ymin, ymax;
  double width = 640.0, height = 420.0, margin = 50.0;

  double px(double x) const {
    return margin + (x - xmin) / (xmax - xmin) * (width - 2 * margin);
  }
  double py(double y) const {
    return height - margin - (y - ymin) / (ymax - ymin) * (height - 2 * margin);
  }
};

void pad_degenerate(double& lo, double& hi) {
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
}

std::string polygon_path(const std::vector<Vector>& verts, const Viewport& vp) {
  // Angular sort around the centroid gives the boundary order of a convex set.
  Vector c = Vector::Zero(2);
  for (const Vector& v : verts) c += v;
  c /= static_cast<double>(verts.size());
  std::vector<Vector> sorted = verts;
  std::sort(sorted.begin(), sorted.end(), [&](const Vector& a, const Vector& b) {
    return std::atan2(a[1] - c[1], a[0] - c[0]) < std::atan2(b[1] - c[1], b[0] - c[0]);
  });
  std::ostringstream os;
  os.precision(8);
  for (std::size_t i = 0; i < sorted.size(); ++i)
    os << (i == 0 ? "M " : "L ") << vp.px(sorted[i][0]) << ' ' << vp.py(sorted[i][1])
       << ' ';
  os << 'Z';
  return os.str();
}

}  // namespace

std::string plot_objective_svg(const std::vector<IterateRecord>& trace) {
  if (trace.empty()) throw std::invalid_argument("plot_objective_svg: empty trace");
  Viewport vp{};
  vp.xmin = static_cast<double>(trace.front().nfo_count);
  vp.xmax = static_cast<double>(trace.back().nfo_count);
  vp.ymin = vp.ymax = trace.front().f;
  for (const IterateRecord& r : trace) {
    vp.ymin = std::min(vp.ymin, r.f);
    vp.ymax = std::max(vp.ymax, r.f);
  }
  pad_degenerate(vp.xmin, vp.xmax);
  pad_degenerate(vp.ymin, vp.ymax);

  std::ostringstream os;
  os.precision(8);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << vp.width
     << "\" height=\"" << vp.height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<line x1=\"" << vp.margin << "\" y1=\"" << vp.height - vp.margin << "\" x2=\""
     << vp.width - vp.margin << "\" y2=\"" << vp.height - vp.margin
     << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << vp.margin << "\" y1=\"" << vp.margin << "\" x2=\"" << vp.margin
     << "\" y2=\"" << vp.height - vp.margin << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << vp.width / 2 << "\" y=\"" << vp.height - 10
     << "\" text-anchor=\"middle\" font-size=\"13\">NFO calls</text>\n"
     << "<text x=\"15\" y=\"" << vp.height / 2
     << "\" font-size=\"13\" transform=\"rotate(-90 15 " << vp.height / 2
     << ")\" text-anchor=\"middle\">f(x_t)</text>\n"
     << "<text x=\"" << vp.margin << "\" y=\"" << vp.height - vp.margin + 16
     << "\" font-size=\"11\">" << vp.xmin << "</text>\n"
     << "<text x=\"" << vp.width - vp.margin << "\" y=\"" << vp.height - vp.margin + 16
     << "\" text-anchor=\"end\" font-size=\"11\">" << vp.xmax << "</text>\n"
     << "<text x=\"" << vp.margin - 4 << "\" y=\"" << vp.py(vp.ymin)
     << "\" text-anchor=\"end\" font-size=\"11\">" << vp.ymin << "</text>\n"
     << "<text x=\"" << vp.margin - 4 << "\" y=\"" << vp.py(vp.ymax) + 10
     << "\" text-anchor=\"end\" font-size=\"11\">" << vp.ymax << "</text>\n"
     << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"";
  for (const IterateRecord& r : trace)
    os << vp.px(static_cast<double>(r.nfo_count)) << ',' << vp.py(r.f) << ' ';
  os << "\"/>\n</svg>\n";
  return os.str();
}

std::string plot_overlay_svg(const Polytope& truth, const Polytope& estimate,
                             const std::vector<IterateRecord>& trace) {
  if (truth.dim() != 2)
    throw std::invalid_argument("plot_overlay_svg: only d=2 supported");
  const std::vector<Vector> tv = enumerate_vertices(truth);
  std::vector<Vector> ev;
  try {
    ev = enumerate_vertices(estimate);
  } catch (const std::exception&) {
    ev.clear();  // estimate may be degenerate early on; plot truth only
  }

  Viewport vp{};
  vp.xmin = vp.xmax = tv.front()[0];
  vp.ymin = vp.ymax = tv.front()[1];
  auto grow = [&](const Vector& p) {
    vp.xmin = std::min(vp.xmin, p[0]);
    vp.xmax = std::max(vp.xmax, p[0]);
    vp.ymin = std::min(vp.ymin, p[1]);
    vp.ymax = std::max(vp.ymax, p[1]);
  };
  for (const Vector& p : tv) grow(p);
  for (const Vector& p : ev) grow(p);
  for (const IterateRecord& r : trace) grow(r.x);
  const double padx = 0.1 * (vp.xmax - vp.xmin), pady = 0.1 * (vp.ymax - vp.ymin);
  vp.xmin -= padx;
  vp.xmax += padx;
  vp.ymin -= pady;
  vp.ymax += pady;
  pad_degenerate(vp.xmin, vp.xmax);
  pad_degenerate(vp.ymin, vp.ymax);

  std::ostringstream os;
  os.precision(8);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << vp.width
     << "\" height=\"" << vp.height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<path d=\"" << polygon_path(tv, vp)
     << "\" fill=\"none\" stroke=\"black\" stroke-width=\"1.5\"/>\n";
  if (ev.size() >= 3)
    os << "<path d=\"" << polygon_path(ev, vp)
       << "\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"1.2\" "
          "stroke-dasharray=\"6 4\"/>\n";
  if (!trace.empty()) {
    os << "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\" points=\"";
    for (const IterateRecord& r : trace) os << vp.px(r.x[0]) << ',' << vp.py(r.x[1]) << ' ';
    os << "\"/>\n"
       << "<circle cx=\"" << vp.px(trace.front().x[0]) << "\" cy=\""
       << vp.py(trace.front().x[1]) << "\" r=\"3\" fill=\"#2ca02c\"/>\n"
       << "<circle cx=\"" << vp.px(trace.back().x[0]) << "\" cy=\""
       << vp.py(trace.back().x[1]) << "\" r=\"3\" fill=\"#1f77b4\"/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

// ---------- experiment runner ----------

ExperimentSummary run(const ExperimentSpec& spec) {
  if (spec.trials < 1) throw std::invalid_argument("run: trials must be >= 1");
  const Problem problem =
      make_problem(spec.problem_id, spec.dim, spec.m, spec.config.seed);
  prepare_run(spec.config, problem);  // surface invalid configs before any trial
  fs::create_directories(spec.out_dir);

  {
    std::ostringstream os;
    os << "problem=" << spec.problem_id << '\n'
       << "dim=" << spec.dim << '\n'
       << "m=" << spec.m << '\n'
       << "variant=" << variant_name(spec.config.variant) << '\n'
       << "eps=" << fmt(spec.config.eps) << '\n'
       << "delta=" << fmt(spec.config.delta) << '\n'
       << "tau=" << fmt(spec.config.tau) << '\n'
       << "r0=" << fmt(spec.config.r0) << '\n'
       << "sigma=" << fmt(spec.config.sigma) << '\n'
       << "sigma0=" << fmt(spec.config.sigma0) << '\n'
       << "seed=" << spec.config.seed << '\n'
       << "scale=" << fmt(spec.config.scale) << '\n'
       << "horizon=" << spec.config.horizon_override << '\n'
       << "trials=" << spec.trials << '\n'
       << "plots=" << (spec.plots ? 1 : 0) << '\n'
       << "strict_vicinity=" << (spec.config.guard == VicinityGuard::Strict ? 1 : 0)
       << '\n';
    write_file(fs::path(spec.out_dir) / "config.txt", os.str());
  }

  std::vector<TrialOutcome> outcomes(static_cast<std::size_t>(spec.trials));
  std::atomic<int> next{0};
  std::mutex err_mutex;
  std::string first_error;
  RunResult first_result;  // kept for plots
  std::mutex first_mutex;

  auto worker = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= spec.trials) return;
      try {
        RunConfig cfg = spec.config;
        cfg.seed = mix_seed(spec.config.seed, static_cast<std::uint64_t>(i));
        RunResult res = reliable_fw(cfg, problem);

        std::ostringstream csv;
        csv << trace_csv_header() << '\n';
        for (const IterateRecord& r : res.trace) csv << trace_csv_row(r) << '\n';
        std::ostringstream name;
        name << "trace_" << std::setw(4) << std::setfill('0') << i << ".csv";
        write_file(fs::path(spec.out_dir) / name.str(), csv.str());

        TrialOutcome& out = outcomes[static_cast<std::size_t>(i)];
        out.trial = i;
        out.safe = res.safe;
        out.f_out = problem.objective.value(res.x_out);
        out.sfo_count = res.sfo_count;
        out.nfo_count = res.nfo_count;
        out.guard_trips = res.guard_trips;
        out.T = res.T;
        out.box_activations = res.box_activations;
        if (i == 0) {
          std::lock_guard<std::mutex> lock(first_mutex);
          first_result = std::move(res);
        }
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (first_error.empty())
          first_error = "trial " + std::to_string(i) + ": " + e.what();
      }
    }
  };

  int nthreads = spec.threads > 0 ? spec.threads
                                  : static_cast<int>(std::thread::hardware_concurrency());
  nthreads = std::max(1, std::min(nthreads, spec.trials));
  std::vector<std::thread> pool;
  for (int i = 0; i < nthreads; ++i) pool.emplace_back(worker);
  for (std::thread& th : pool) th.join();
  if (!first_error.empty()) throw std::runtime_error("run: " + first_error);

  ExperimentSummary summary;
  summary.trials = spec.trials;
  summary.outcomes = outcomes;
  double f_sum = 0.0;
  std::int64_t nfo_total = 0, sfo_total = 0, guard_total = 0;
  for (const TrialOutcome& o : outcomes) {
    if (!o.safe) ++summary.unsafe_trials;
    f_sum += o.f_out;
    nfo_total += o.nfo_count;
    sfo_total += o.sfo_count;
    guard_total += o.guard_trips;
  }
  summary.violation_fraction =
      static_cast<double>(summary.unsafe_trials) / spec.trials;
  summary.binomial_se = std::sqrt(
      summary.violation_fraction * (1.0 - summary.violation_fraction) / spec.trials);

  {
    std::ostringstream os;
    os << "trials=" << summary.trials << '\n'
       << "unsafe_trials=" << summary.unsafe_trials << '\n'
       << "violation_fraction=" << fmt(summary.violation_fraction) << '\n'
       << "binomial_se=" << fmt(summary.binomial_se) << '\n'
       << "violation_ci_upper="
       << fmt(std::min(1.0, summary.violation_fraction + 1.96 * summary.binomial_se))
       << '\n'
       << "mean_f_out=" << fmt(f_sum / spec.trials) << '\n'
       << "T=" << outcomes.front().T << '\n'
       << "nfo_total=" << nfo_total << '\n'
       << "sfo_total=" << sfo_total << '\n'
       << "guard_trips_total=" << guard_total << '\n';
    const fs::path path = fs::path(spec.out_dir) / "summary.txt";
    write_file(path, os.str());
    summary.summary_path = path.string();
  }

  if (spec.plots && !first_result.trace.empty()) {
    write_file(fs::path(spec.out_dir) / "objective.svg",
               plot_objective_svg(first_result.trace));
    if (problem.polytope.dim() == 2) {
      const NormalizedPolytope np = normalize(problem.polytope, spec.config.sigma);
      write_file(fs::path(spec.out_dir) / "overlay.svg",
                 plot_overlay_svg(np.polytope,
                                  first_result.final_estimate.as_polytope(),
                                  first_result.trace));
    }
  }
  return summary;
}

}  // namespace rfw
