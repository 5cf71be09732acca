#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "rfw/types.hpp"

namespace rfw {

// Gradient oracle sample together with the randomness token it was drawn
// under; storm_update checks that both evaluations of a step share one token.
struct GradientSample {
  Vector g;
  std::uint64_t xi = 0;
};

struct StormState {
  Vector g_prev;
  Vector x_prev;
  std::int64_t t = 0;
};

inline StormState storm_init(const Vector& g0, const Vector& x0) {
  return StormState{g0, x0, 0};
}

// g_t = G_t(x_t) + (1 - rho_t)[g_{t-1} - G_t(x_{t-1})], then advances the
// state to (g_t, x_t).
inline Vector storm_update(StormState& state, const GradientSample& at_x,
                           const GradientSample& at_xprev, double rho_t,
                           const Vector& x_t) {
  if (at_x.xi != at_xprev.xi)
    throw std::invalid_argument("storm_update: mismatched sample tokens");
  if (rho_t <= 0.0 || rho_t > 1.0)
    throw std::invalid_argument("storm_update: rho_t must lie in (0,1]");
  Vector g = at_x.g + (1.0 - rho_t) * (state.g_prev - at_xprev.g);
  state.g_prev = g;
  state.x_prev = x_t;
  ++state.t;
  return g;
}

// High-probability error bound of the STORM estimate at step t:
// 2/(t+2)^{alpha/2} (2 L0 Lambda + 3^alpha sigma0/(3^alpha - 1)) sqrt(2 log(4/delta)).
inline double storm_error_bound(std::int64_t t, double alpha, double L0,
                                double Lambda, double sigma0, double delta) {
  if (alpha <= 0.0 || alpha > 1.0)
    throw std::invalid_argument("storm_error_bound: alpha must lie in (0,1]");
  const double p3 = std::pow(3.0, alpha);
  return 2.0 / std::pow(static_cast<double>(t) + 2.0, alpha / 2.0) *
         (2.0 * L0 * Lambda + p3 * sigma0 / (p3 - 1.0)) *
         std::sqrt(2.0 * std::log(4.0 / delta));
}

}  // namespace rfw
