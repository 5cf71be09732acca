#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfw/solver.hpp"

namespace rfw {

struct ExperimentSpec {
  std::string problem_id = "cutting-machine";
  Index dim = 2;
  Index m = 4;  // constraint count for synthetic problems
  RunConfig config;
  int trials = 1;
  std::string out_dir = "out";
  bool plots = false;
  int threads = 0;  // 0 -> hardware concurrency
};

struct TrialOutcome {
  int trial = 0;
  bool safe = true;
  double f_out = 0.0;
  std::int64_t sfo_count = 0, nfo_count = 0, guard_trips = 0;
  std::int64_t T = 0;
  std::int64_t box_activations = 0;
};

struct ExperimentSummary {
  int trials = 0;
  int unsafe_trials = 0;
  double violation_fraction = 0.0;
  double binomial_se = 0.0;  // sqrt(p(1-p)/n) at the measured fraction
  std::vector<TrialOutcome> outcomes;
  std::string summary_path;
};

// Runs the experiment: per-trial trace CSVs, key=value config echo and
// summary, optional SVG plots. Trials run on a worker pool; per-trial seeds
// derive from the master seed and the trial index only.
ExperimentSummary run(const ExperimentSpec& spec);

struct VerifyReport {
  std::string suite;
  bool pass = false;
  std::string details;  // measured margins, one line per check
};

// Suites: lemma1, qnorm, lemma4, lemma5, prop2, coverage, appendixF.
VerifyReport verify(const std::string& suite_id, std::uint64_t seed = 0);
std::vector<std::string> verify_suites();

// Flat key=value constant ledger for a problem under the given config.
std::string constants_report(const Problem& problem, const RunConfig& cfg);

// Polyline plot of f(x_t) against cumulative NFO calls.
std::string plot_objective_svg(const std::vector<IterateRecord>& trace);

// d=2 overlay: true polytope solid, estimate dashed, iterate path.
std::string plot_overlay_svg(const Polytope& truth, const Polytope& estimate,
                             const std::vector<IterateRecord>& trace);

}  // namespace rfw
