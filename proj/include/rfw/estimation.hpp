#pragma once

#include <cstdint>
#include <vector>

#include "rfw/polytope.hpp"
#include "rfw/types.hpp"

namespace rfw {

enum class Variant {
  NonconvexStochastic,
  NonconvexDeterministic,
  ConvexStochastic,
  ConvexDeterministic,
};

// Confidence split inside psi^{-1}: per-iteration uses zeta = delta/T, global
// uses zeta = delta. Both calibrations are in circulation; per-iteration is
// the default.
enum class KappaMode { PerIteration, Global };

// The multiset {x_t +- r0 e_j}, each point repeated n_t/(2d) times, in
// block-major order: within a block +e_1..+e_d then -e_1..-e_d.
Matrix collect_data_points(const Vector& x_t, std::int64_t n_t, double r0);

// max{sqrt(128 d log N log(N^2/zeta)), (8/3) log(N^2/zeta)}. Requires N >= 2.
double psi_inverse(double N, double zeta, Index d);

struct EstimatedPolytope {
  Matrix A_hat;  // m x d
  Vector b_hat;
  std::int64_t N = 0;  // measurement count behind the estimate

  Polytope as_polytope() const { return Polytope(A_hat, b_hat); }
};

// Running least-squares state over augmented rows [x, -1]. Incremental
// rank-one updates keep (Xbar' Xbar)^{-1} current once full rank is reached.
// The regression runs internally in the affine frame (x - shift)/scale and
// maps estimates back exactly; centering at the start point with scale r0
// keeps the normal matrix well conditioned even for badly scaled problems.
class LeastSquaresState {
 public:
  LeastSquaresState(Index d, Index m);
  LeastSquaresState(Index d, Index m, Vector shift, double scale);

  // Appends the rows of X_new with measurements Y_new (one row per query).
  // Throws when the normal matrix condition number exceeds kMaxCondition.
  void update(const Matrix& X_new, const Matrix& Y_new);

  bool ready() const { return ready_; }
  Index dim() const { return d_; }
  Index num_constraints() const { return m_; }
  std::int64_t count() const { return N_; }

  Vector mean_point() const;
  const Matrix& gram() const { return G_; }  // frame-coordinates Xbar' Xbar
  Matrix q_matrix() const;                   // Q_t in original coordinates
  Matrix beta_hat() const;                   // (d+1) x m estimate, original coords
  EstimatedPolytope estimate() const;

  // r' (Xbar' Xbar) r in original coordinates, evaluated through the frame
  // for accuracy; feeds the confidence-ellipsoid quadratic form.
  double gram_quadratic(const Vector& r) const;

  static constexpr double kMaxCondition = 1e12;

 private:
  Index d_, m_;
  Vector shift_;
  double scale_ = 1.0;
  Matrix G_, Ginv_, C_;
  Vector sum_x_;
  std::int64_t N_ = 0;
  bool ready_ = false;
};

// min_i eps_hat_i(x)^2 - kappa^2 (1/N_t + (x - xbar)' Q_t (x - xbar)).
double safety_margin(const LeastSquaresState& state, const EstimatedPolytope& est,
                     const Vector& x, double kappa);

// Membership in S_t(zeta): nonnegative estimated residuals and margin >= 0.
bool in_safety_set(const LeastSquaresState& state, const EstimatedPolytope& est,
                   const Vector& x, double kappa);

// True iff every column beta_i of beta_true satisfies
// (beta_hat_i - beta_i)' Sigma_t^{-1} (beta_hat_i - beta_i) <= psi_inv^2,
// with Sigma_t = sigma_bar^2 (Xbar' Xbar)^{-1}.
bool ellipsoid_contains(const LeastSquaresState& state, const Matrix& beta_true,
                        double psi_inv, double sigma_bar);

struct ScheduleConstants {
  double eps0 = 0.0;     // min_i b_i - <a_i, x0> on the normalized polytope
  double L_A = 0.0;      // 1/(2 alpha) after normalization
  double tau = 0.0;
  double kappa = 0.0;    // sigma_bar * psi^{-1}(zeta/m) at N_ref
  double psi_inv = 0.0;
  double N_ref = 0.0;    // total-measurement count used to pin kappa
  double zeta = 0.0;
  double C0 = 0.0, C1 = 0.0, C2 = 0.0, C3 = 0.0, C4 = 0.0;
  double C5 = 0.0, C6 = 0.0, C7 = 0.0, C8 = 0.0, C9 = 0.0;
};

struct ConstantsInput {
  Vector x0;
  double delta = 0.05;
  double T = 1000.0;       // horizon used for the zeta = delta/T split
  double r0 = 0.01;
  double tau = -1.0;       // <= 0 selects the default eps0/2
  double L = 0.0, M = 0.0, L0 = 0.0, sigma0 = 0.0;
  double f_gap0 = 0.0;     // upper bound on f(x0) - f(x*)
  Variant variant = Variant::NonconvexStochastic;
  KappaMode mode = KappaMode::PerIteration;
  double scale = 1.0;      // practical-mode sampling scale
};

// Constant ledger on the normalized polytope. `geom` describes the original
// polytope (alpha, Lambda, Gamma are scale-invariant where needed). kappa and
// C2 are coupled through the total sample count, resolved by fixed-point
// iteration.
ScheduleConstants compute_constants(const NormalizedPolytope& np,
                                    const GeometrySummary& geom,
                                    const ConstantsInput& in);

// Per-iteration sample count of the given variant, scaled and rounded up to
// a positive multiple of 2d.
std::int64_t min_samples(Variant variant, std::int64_t t, double C2, Index d,
                         double scale = 1.0);

// Safety lower bound h({eta_k},{N_k}) at step t >= 1:
// eps0 prod(1-eta_j) + sum_k (tau/2 - C1 L_A/sqrt(N_k)) eta_k prod_{j>k}(1-eta_j)
//   - kappa C0 / sqrt(N_t).
// eta must hold eta_0..eta_{t-1} and N must hold N_0..N_t (cumulative counts).
double h_value(const std::vector<double>& eta, const std::vector<double>& N,
               std::int64_t t, const ScheduleConstants& c);

}  // namespace rfw
