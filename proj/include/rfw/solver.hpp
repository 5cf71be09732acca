#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfw/estimation.hpp"
#include "rfw/oracles.hpp"
#include "rfw/polytope.hpp"
#include "rfw/types.hpp"

namespace rfw {

struct RunConfig {
  Variant variant = Variant::NonconvexStochastic;
  double eps = 0.1;
  double delta = 0.05;
  double tau = -1.0;       // <= 0 selects eps0/2
  double r0 = 0.01;
  double sigma = 0.01;     // NFO noise before normalization
  double sigma0 = 0.0;     // SFO noise bound
  std::uint64_t seed = 0;
  double scale = 1.0;      // practical-mode sampling scale
  std::int64_t horizon_override = 0;  // > 0 replaces the theorem horizon
  double box_factor = 10.0;           // LMO bounding-box half-width, in units of Gamma
  KappaMode kappa_mode = KappaMode::PerIteration;
  VicinityGuard guard = VicinityGuard::Off;
  double f_gap0 = 0.0;     // upper bound on f(x0) - f(x*); 0 -> vertex heuristic
};

struct IterateRecord {
  std::int64_t t = 0;
  Vector x, g, v_hat;
  double eta = 0.0, rho = 0.0;
  std::int64_t n_t = 0, N_t = 0;
  double f = 0.0;
  double fw_gap_true = 0.0;       // diagnostic against the true polytope
  double min_true_residual = 0.0;  // min row-normalized margin (signed distance)
  double safety_margin_val = 0.0; // margin of x_t in S_t at the running kappa
  double grad_err = 0.0;          // |g_t - grad f(x_t)|
  double q_norm = 0.0;            // spectral norm of Q_t
  std::int64_t sfo_count = 0, nfo_count = 0;
  bool box_active = false;        // LMO bounding box tight at v_hat
  double h_val = 0.0;             // safe-sampling lower bound h at step t
  bool nt2_ok = false;            // kappa^2/N_t (1 + d Lambda^2/r0^2) <= h^2
};

struct RunResult {
  Vector x_out;
  std::int64_t t0 = 0;  // index of the returned iterate
  std::vector<IterateRecord> trace;
  ScheduleConstants constants;
  EstimatedPolytope final_estimate;
  std::int64_t T = 0;
  std::int64_t sfo_count = 0, nfo_count = 0, guard_trips = 0;
  bool safe = true;                  // every iterate truly feasible (diagnostic)
  bool f_gap0_estimated = false;     // vertex heuristic supplied f(x0) - f*
  std::int64_t box_activations = 0;
};

// Vertex of P minimizing <c, v>, ties broken lexicographically by coordinates.
// Throws on infeasible input; the caller must supply a bounded P.
Vector lmo(const Polytope& P, const Vector& c);

// <grad, x> - min_{v in P} <grad, v>; nonnegative for feasible x.
double fw_gap(const Polytope& P, const Vector& grad, const Vector& x);

// (eta_t, rho_t) for the four theorem variants.
struct StepSizes {
  double eta = 0.0;
  double rho = 0.0;
};
StepSizes schedule(Variant variant, std::int64_t t);

// Theorem horizon for target accuracy eps; returns at least 1.
std::int64_t horizon(Variant variant, double eps, const ScheduleConstants& c,
                     double f_gap0);

inline Vector step(const Vector& x_t, const Vector& v_hat, double eta_t) {
  if (eta_t <= 0.0 || eta_t > 1.0)
    throw std::invalid_argument("step: eta_t must lie in (0,1]");
  return x_t + eta_t * (v_hat - x_t);
}

// Constant ledger, horizon and normalization for a run, resolving the
// zeta = delta/T coupling between the two.
struct PreparedRun {
  ScheduleConstants constants;
  std::int64_t T = 0;
  double f_gap0 = 0.0;
  bool f_gap0_estimated = false;
  GeometrySummary geom;
  NormalizedPolytope normalized;
};
PreparedRun prepare_run(const RunConfig& cfg, const Problem& problem);

// Algorithm core against prepared oracles; geom describes the true polytope
// and feeds diagnostics only.
RunResult reliable_fw(const RunConfig& cfg, const Objective& objective,
                      NoisyFeasibilityOracle& nfo, StochasticGradientOracle& sfo,
                      const Vector& x0, const ScheduleConstants& constants,
                      const GeometrySummary& geom, std::int64_t T);

// Convenience wrapper: normalizes the problem, builds the oracles and the
// constant ledger (iterating the zeta = delta/T coupling), then runs.
RunResult reliable_fw(const RunConfig& cfg, const Problem& problem);

std::string trace_csv_header();
std::string trace_csv_row(const IterateRecord& r);

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

}  // namespace rfw
