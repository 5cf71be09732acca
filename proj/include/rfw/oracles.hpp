#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <unordered_map>

#include "rfw/polytope.hpp"
#include "rfw/types.hpp"

namespace rfw {

struct Objective {
  std::function<double(const Vector&)> value;
  std::function<Vector(const Vector&)> gradient;
  double L = 0.0;   // gradient Lipschitz constant
  double M = 0.0;   // uniform gradient norm bound on the feasible set
  bool is_convex = false;
};

enum class VicinityGuard { Off, Record, Strict };

// Returns y = A x - b + theta for the hidden (normalized) polytope, with
// iid zero-mean Gaussian noise of standard deviation sigma_bar per entry.
class NoisyFeasibilityOracle {
 public:
  NoisyFeasibilityOracle(Polytope hidden, double sigma_bar, std::uint64_t seed,
                         VicinityGuard guard = VicinityGuard::Off, double r0 = 0.0);

  // One measurement row per query row; the counter advances by the number of rows.
  Matrix query(const Matrix& X);

  std::int64_t query_count() const { return query_count_; }
  std::int64_t guard_trips() const { return guard_trips_; }
  const Polytope& hidden_polytope() const { return hidden_; }
  double sigma_bar() const { return sigma_bar_; }

 private:
  Polytope hidden_;
  double sigma_bar_;
  VicinityGuard guard_;
  double r0_;
  std::mt19937_64 rng_;
  std::int64_t query_count_ = 0;
  std::int64_t guard_trips_ = 0;
};

// Sample token for one STORM step: the same token evaluated at two points
// reuses the identical noise realization.
struct XiToken {
  std::uint64_t seed = 0;
};

// Additive bounded-noise gradient oracle: G(x, xi) = grad f(x) + eps(xi),
// with eps(xi) drawn uniformly from the ball of radius sigma0.
class StochasticGradientOracle {
 public:
  StochasticGradientOracle(Objective objective, Index dim, double sigma0,
                           std::uint64_t seed, int max_uses_per_token = 2);

  XiToken mint_token();
  Vector evaluate(const Vector& x, const XiToken& token);

  std::int64_t query_count() const { return query_count_; }
  const Objective& objective() const { return objective_; }
  double sigma0() const { return sigma0_; }

 private:
  Objective objective_;
  Index dim_;
  double sigma0_;
  int max_uses_;
  std::mt19937_64 rng_;
  std::unordered_map<std::uint64_t, int> token_uses_;
  std::int64_t query_count_ = 0;
};

struct Problem {
  std::string id;
  Objective objective;
  Polytope polytope;
  Vector x0;
  std::optional<double> f_star;  // known optimal value, when available
};

// The nonlinear machining model: two design variables, one sloped
// constraint plus four box rows. start = 0 or 1 selects the initial point.
Problem cutting_machine_problem(int start = 0);

// kinds: quad-box, quad-box-outside, quad-rand-poly, trig-box
Problem synthetic_problem(const std::string& kind, Index d, Index m,
                          std::uint64_t seed);

// Registry addressable by string id, e.g. "cutting-machine", "quad-box".
Problem make_problem(const std::string& id, Index d, Index m, std::uint64_t seed);

// Box [0,1]^d (unit-norm rows) plus extra random halfspaces keeping the
// center strictly feasible.
Polytope random_bounded_polytope(Index d, Index extra_rows, std::mt19937_64& rng);

}  // namespace rfw
