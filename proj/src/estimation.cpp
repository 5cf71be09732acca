#include "rfw/estimation.hpp"

#include <cmath>
#include <stdexcept>

namespace rfw {

Matrix collect_data_points(const Vector& x_t, std::int64_t n_t, double r0) {
  const Index d = x_t.size();
  if (r0 <= 0.0) throw std::invalid_argument("collect_data_points: r0 must be positive");
  if (n_t <= 0 || n_t % (2 * d) != 0)
    throw std::invalid_argument("collect_data_points: n_t must be a positive multiple of 2d");
  const std::int64_t blocks = n_t / (2 * d);
  Matrix X(n_t, d);
  Index row = 0;
  for (std::int64_t k = 0; k < blocks; ++k) {
    for (Index j = 0; j < 2 * d; ++j, ++row) {
      X.row(row) = x_t.transpose();
      if (j < d)
        X(row, j) += r0;
      else
        X(row, j - d) -= r0;
    }
  }
  return X;
}

double psi_inverse(double N, double zeta, Index d) {
  if (N < 2.0) throw std::invalid_argument("psi_inverse: need N >= 2");
  if (zeta <= 0.0 || zeta >= 1.0)
    throw std::invalid_argument("psi_inverse: zeta must lie in (0,1)");
  const double l = std::log(N * N / zeta);
  const double first = std::sqrt(128.0 * static_cast<double>(d) * std::log(N) * l);
  const double second = (8.0 / 3.0) * l;
  return std::max(first, second);
}

LeastSquaresState::LeastSquaresState(Index d, Index m)
    : LeastSquaresState(d, m, Vector::Zero(d), 1.0) {}

LeastSquaresState::LeastSquaresState(Index d, Index m, Vector shift, double scale)
    : d_(d), m_(m), shift_(std::move(shift)), scale_(scale) {
  if (d < 1 || m < 1)
    throw std::invalid_argument("LeastSquaresState: need d >= 1 and m >= 1");
  if (shift_.size() != d || scale_ <= 0.0)
    throw std::invalid_argument("LeastSquaresState: bad frame");
  G_ = Matrix::Zero(d + 1, d + 1);
  C_ = Matrix::Zero(d + 1, m);
  sum_x_ = Vector::Zero(d);
}

void LeastSquaresState::update(const Matrix& X_new, const Matrix& Y_new) {
  if (X_new.cols() != d_ || Y_new.cols() != m_ || X_new.rows() != Y_new.rows())
    throw std::invalid_argument("update_least_squares: dimension mismatch");
  Vector u(d_ + 1);
  u[d_] = -1.0;
  Vector Gu(d_ + 1);
  for (Index i = 0; i < X_new.rows(); ++i) {
    u.head(d_) = (X_new.row(i).transpose() - shift_) / scale_;
    G_.noalias() += u * u.transpose();
    C_.noalias() += u * Y_new.row(i);
    sum_x_ += u.head(d_);
    ++N_;
    if (ready_) {
      Gu.noalias() = Ginv_ * u;
      Ginv_.noalias() -= Gu * (Gu.transpose() / (1.0 + u.dot(Gu)));
    }
  }

  if (N_ >= d_ + 1) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(G_, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0 || hi / lo > kMaxCondition)
      throw std::runtime_error("update_least_squares: degenerate query geometry");
    // Refresh from the Gram matrix at batch boundaries; the rank-one updates
    // carry the inverse between rows but drift over very long runs.
    Ginv_ = G_.ldlt().solve(Matrix::Identity(d_ + 1, d_ + 1));
    ready_ = true;
  }
}

Vector LeastSquaresState::mean_point() const {
  if (N_ == 0) throw std::runtime_error("LeastSquaresState: no data");
  return shift_ + scale_ * (sum_x_ / static_cast<double>(N_));
}

Matrix LeastSquaresState::q_matrix() const {
  if (!ready_) throw std::runtime_error("LeastSquaresState: not full rank yet");
  return Ginv_.topLeftCorner(d_, d_) / (scale_ * scale_);
}

Matrix LeastSquaresState::beta_hat() const {
  if (!ready_) throw std::runtime_error("LeastSquaresState: not full rank yet");
  const Matrix Bf = Ginv_ * C_;  // frame coefficients [a_tilde; b_tilde]
  Matrix B(d_ + 1, m_);
  B.topRows(d_) = Bf.topRows(d_) / scale_;
  B.row(d_) = Bf.row(d_) + shift_.transpose() * B.topRows(d_);
  return B;
}

double LeastSquaresState::gram_quadratic(const Vector& r) const {
  if (r.size() != d_ + 1)
    throw std::invalid_argument("gram_quadratic: dimension mismatch");
  Vector w(d_ + 1);
  w.head(d_) = scale_ * r.head(d_);
  w[d_] = r[d_] - shift_.dot(r.head(d_));
  return w.dot(G_ * w);
}

EstimatedPolytope LeastSquaresState::estimate() const {
  const Matrix B = beta_hat();
  EstimatedPolytope est;
  est.A_hat = B.topRows(d_).transpose();
  est.b_hat = B.row(d_).transpose();
  est.N = N_;
  return est;
}

double safety_margin(const LeastSquaresState& state, const EstimatedPolytope& est,
                     const Vector& x, double kappa) {
  if (!state.ready()) throw std::runtime_error("safety_margin: uninitialized state");
  const Vector eps = est.b_hat - est.A_hat * x;
  const double min_sq = eps.array().square().minCoeff();
  const Vector c = x - state.mean_point();
  const double quad =
      1.0 / static_cast<double>(state.count()) + c.dot(state.q_matrix() * c);
  return min_sq - kappa * kappa * quad;
}

bool in_safety_set(const LeastSquaresState& state, const EstimatedPolytope& est,
                   const Vector& x, double kappa) {
  const Vector eps = est.b_hat - est.A_hat * x;
  if (eps.minCoeff() < 0.0) return false;
  return safety_margin(state, est, x, kappa) >= 0.0;
}

bool ellipsoid_contains(const LeastSquaresState& state, const Matrix& beta_true,
                        double psi_inv, double sigma_bar) {
  const Matrix B = state.beta_hat();
  if (beta_true.rows() != B.rows() || beta_true.cols() != B.cols())
    throw std::invalid_argument("ellipsoid_contains: beta shape mismatch");
  const double bound = sigma_bar * sigma_bar * psi_inv * psi_inv;
  for (Index i = 0; i < B.cols(); ++i) {
    const Vector r = B.col(i) - beta_true.col(i);
    if (state.gram_quadratic(r) > bound) return false;
  }
  return true;
}

namespace {

double raw_samples(Variant variant, double t, double C2) {
  switch (variant) {
    case Variant::NonconvexStochastic:
      return 2.0 * C2 * std::cbrt(t + 1.0);
    case Variant::NonconvexDeterministic:
      return C2;
    case Variant::ConvexStochastic:
    case Variant::ConvexDeterministic:
      return 2.0 * C2 * (t + 1.0);
  }
  throw std::invalid_argument("min_samples: unknown variant");
}

// Continuous total-sample-count approximation used only to pin the kappa
// fixed point; the log-level dependence of psi^{-1} makes the rounding slack
// irrelevant.
double approx_total_samples(Variant variant, double T, double C2, Index d,
                            double scale) {
  double total;
  switch (variant) {
    case Variant::NonconvexStochastic:
      total = 2.0 * C2 * 0.75 * std::pow(T, 4.0 / 3.0);
      break;
    case Variant::NonconvexDeterministic:
      total = C2 * T;
      break;
    case Variant::ConvexStochastic:
    case Variant::ConvexDeterministic:
      total = C2 * T * (T + 1.0);
      break;
    default:
      throw std::invalid_argument("compute_constants: unknown variant");
  }
  return scale * total + 2.0 * static_cast<double>(d) * T;  // + rounding slack
}

}  // namespace

std::int64_t min_samples(Variant variant, std::int64_t t, double C2, Index d,
                         double scale) {
  if (scale <= 0.0 || scale > 1.0)
    throw std::invalid_argument("min_samples: scale must lie in (0,1]");
  const double raw = scale * raw_samples(variant, static_cast<double>(t), C2);
  const double block = 2.0 * static_cast<double>(d);
  const double blocks = std::max(1.0, std::ceil(raw / block));
  if (blocks * block > 9.0e18)
    throw std::runtime_error("min_samples: sample count overflows");
  return static_cast<std::int64_t>(blocks) * 2 * d;
}

ScheduleConstants compute_constants(const NormalizedPolytope& np,
                                    const GeometrySummary& geom,
                                    const ConstantsInput& in) {
  const Polytope& P = np.polytope;
  const Index d = P.dim();
  const Index m = P.num_constraints();
  if (in.delta <= 0.0 || in.delta >= 1.0)
    throw std::invalid_argument("compute_constants: delta must lie in (0,1)");
  if (in.r0 <= 0.0) throw std::invalid_argument("compute_constants: r0 must be positive");
  if (in.T < 1.0) throw std::invalid_argument("compute_constants: T must be >= 1");

  ScheduleConstants c;
  c.eps0 = residuals(P, in.x0).minCoeff();
  if (c.eps0 <= 0.0)
    throw std::invalid_argument("compute_constants: x0 is not strictly feasible");
  c.L_A = 1.0 / (2.0 * geom.alpha);
  c.tau = (in.tau > 0.0) ? in.tau : c.eps0 / 2.0;
  if (is_empty(shrink(P, c.tau)))
    throw std::invalid_argument("compute_constants: shrunk polytope is empty");
  c.zeta = (in.mode == KappaMode::PerIteration) ? in.delta / in.T : in.delta;

  const double Lam = geom.diameter;
  const double Gam = geom.radius;
  c.C0 = std::sqrt(static_cast<double>(d) * ((1.0 + Gam * Gam) / (in.r0 * in.r0) + 1.0));

  // kappa needs the total sample count, which needs C2, which needs kappa;
  // psi^{-1} grows only logarithmically in N, so iterate to the fixed point.
  double N_ref = std::max(100.0, 2.0 * static_cast<double>(d) * in.T);
  for (int it = 0; it < 50; ++it) {
    c.psi_inv = psi_inverse(std::max(2.0, N_ref), c.zeta / static_cast<double>(m), d);
    c.kappa = np.sigma_bar * c.psi_inv;
    c.C1 = c.kappa * (1.0 + Gam) * c.C0 / c.L_A;
    c.C2 = std::max({std::pow(4.0 * c.C1 * c.L_A / c.tau, 2),
                     std::pow(8.0 * c.kappa * c.C0 / c.tau, 2),
                     64.0 * c.kappa * c.kappa / (c.tau * c.tau) *
                         (1.0 + static_cast<double>(d) * Lam * Lam / (in.r0 * in.r0)),
                     c.C1 * c.C1});
    const double next =
        std::min(1e300, approx_total_samples(in.variant, in.T, c.C2, d, in.scale));
    if (std::abs(next - N_ref) <= 1e-12 * N_ref) {
      N_ref = next;
      break;
    }
    N_ref = next;
  }
  c.N_ref = N_ref;
  if (np.sigma_bar == 0.0) {
    // Noiseless oracle: the ellipsoid has zero radius and the sampling
    // requirements degenerate gracefully.
    c.kappa = 0.0;
    c.C1 = 0.0;
    c.C2 = 0.0;
  }

  const double logd = std::log(4.0 / in.delta);
  c.C3 = std::pow(18.0 * std::sqrt(2.0) * (2.0 * Lam + 1.0) *
                      (in.sigma0 + in.L0 * Lam) * std::sqrt(logd),
                  3);
  c.C4 = std::pow(9.0 * (in.M + in.sigma0) + 6.0 * in.L * (1.0 + Lam) * (1.0 + Lam), 1.5);
  c.C5 = std::pow(4.0 * in.M + 2.0 * in.L * (1.0 + Lam * Lam), 2);
  c.C6 = std::pow(2.0 * std::max({16.0 * std::sqrt(2.0) * (1.0 + Lam) *
                                      (in.L0 * Lam + in.sigma0) * std::sqrt(logd),
                                  4.0 * std::sqrt(2.0) * (in.M + in.sigma0),
                                  in.L * in.L * (Lam + 2.0)}),
                  2);
  c.C7 = 4.0 * (in.L0 * Lam + in.sigma0) * std::sqrt(2.0 * logd);
  c.C8 = std::max({in.f_gap0, 4.0 * c.C7 * (1.0 + Lam),
                   4.0 * std::sqrt(2.0) * (in.M + in.sigma0),
                   in.L * in.L * (Lam + 2.0)});
  c.C9 = std::max({in.f_gap0, 4.0 * in.M, 2.0 * in.L * in.L * (Lam + 2.0)});
  return c;
}

double h_value(const std::vector<double>& eta, const std::vector<double>& N,
               std::int64_t t, const ScheduleConstants& c) {
  if (t < 1) throw std::invalid_argument("h_value: need t >= 1");
  const std::size_t tt = static_cast<std::size_t>(t);
  if (eta.size() < tt || N.size() < tt + 1)
    throw std::invalid_argument("h_value: schedule too short");
  for (std::size_t k = 0; k <= tt; ++k)
    if (N[k] <= 0.0) throw std::invalid_argument("h_value: nonpositive sample count");

  // Suffix products prod_{j=k+1}^{t-1} (1 - eta_j), accumulated backwards.
  double h = 0.0;
  double suffix = 1.0;
  for (std::size_t k = tt; k-- > 0;) {
    h += (c.tau / 2.0 - c.C1 * c.L_A / std::sqrt(N[k])) * eta[k] * suffix;
    suffix *= 1.0 - eta[k];
  }
  h += c.eps0 * suffix;
  h -= c.kappa * c.C0 / std::sqrt(N[tt]);
  return h;
}

}  // namespace rfw
