#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "rfw/harness.hpp"

namespace {

struct CliOptions {
  std::string problem = "cutting-machine";
  std::string variant = "nonconvex-stochastic";
  std::string out = "out";
  double eps = 0.1, delta = 0.05, tau = -1.0;
  double sigma = 0.01, sigma0 = 0.0, r0 = 0.01, scale = 1.0;
  std::int64_t horizon = 0;
  std::uint64_t seed = 0;
  int trials = 1, dim = 2, m = 4, threads = 0;
  bool plots = false, strict_vicinity = false;
};

void add_config_flags(CLI::App* sub, CliOptions& o) {
  sub->add_option("--problem", o.problem, "problem id (cutting-machine, quad-box, ...)");
  sub->add_option("--variant", o.variant,
                  "nonconvex-stochastic | nonconvex-deterministic | "
                  "convex-stochastic | convex-deterministic");
  sub->add_option("--eps", o.eps, "target accuracy");
  sub->add_option("--delta", o.delta, "confidence level");
  sub->add_option("--tau", o.tau, "shrinkage (<=0 selects eps0/2)");
  sub->add_option("--sigma", o.sigma, "feasibility-oracle noise level");
  sub->add_option("--sigma0", o.sigma0, "gradient-oracle noise bound");
  sub->add_option("--r0", o.r0, "exceeding margin / probe radius");
  sub->add_option("--seed", o.seed, "master seed");
  sub->add_option("--scale", o.scale, "practical-mode sampling scale in (0,1]");
  sub->add_option("--horizon", o.horizon, "horizon override (0 uses the theorem value)");
  sub->add_option("--dim", o.dim, "dimension for synthetic problems");
  sub->add_option("--m", o.m, "constraint count for synthetic problems");
}

rfw::RunConfig to_run_config(const CliOptions& o) {
  rfw::RunConfig cfg;
  cfg.variant = rfw::variant_from_name(o.variant);
  cfg.eps = o.eps;
  cfg.delta = o.delta;
  cfg.tau = o.tau;
  cfg.r0 = o.r0;
  cfg.sigma = o.sigma;
  cfg.sigma0 = o.sigma0;
  cfg.seed = o.seed;
  cfg.scale = o.scale;
  cfg.horizon_override = o.horizon;
  cfg.guard = o.strict_vicinity ? rfw::VicinityGuard::Strict : rfw::VicinityGuard::Record;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Reliable Frank-Wolfe: safe optimization over an unknown polytope"};
  app.require_subcommand(1);

  CliOptions opt;
  std::string suite;
  std::uint64_t verify_seed = 0;

  CLI::App* run_cmd = app.add_subcommand("run", "run a seeded experiment");
  add_config_flags(run_cmd, opt);
  run_cmd->add_option("--trials", opt.trials, "number of Monte-Carlo trials");
  run_cmd->add_option("--out", opt.out, "output directory");
  run_cmd->add_option("--threads", opt.threads, "worker threads (0 = auto)");
  run_cmd->add_flag("--plots", opt.plots, "emit SVG plots");
  run_cmd->add_flag("--strict-vicinity", opt.strict_vicinity,
                    "abort when a query leaves the r0-vicinity");

  CLI::App* verify_cmd = app.add_subcommand("verify", "run a numerical check suite");
  verify_cmd->add_option("suite", suite, "suite id, or 'all'")->required();
  verify_cmd->add_option("--seed", verify_seed, "suite seed");

  CLI::App* constants_cmd =
      app.add_subcommand("constants", "print the constant ledger");
  add_config_flags(constants_cmd, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run_cmd->parsed()) {
      rfw::ExperimentSpec spec;
      spec.problem_id = opt.problem;
      spec.dim = opt.dim;
      spec.m = opt.m;
      spec.config = to_run_config(opt);
      spec.trials = opt.trials;
      spec.out_dir = opt.out;
      spec.plots = opt.plots;
      spec.threads = opt.threads;
      const rfw::ExperimentSummary summary = rfw::run(spec);
      std::cout << "trials=" << summary.trials
                << " unsafe=" << summary.unsafe_trials
                << " violation_fraction=" << summary.violation_fraction
                << "\nsummary written to " << summary.summary_path << '\n';
      return 0;
    }
    if (verify_cmd->parsed()) {
      std::vector<std::string> suites =
          suite == "all" ? rfw::verify_suites() : std::vector<std::string>{suite};
      bool all_pass = true;
      for (const std::string& s : suites) {
        const rfw::VerifyReport report = rfw::verify(s, verify_seed);
        std::cout << report.suite << ": " << (report.pass ? "PASS" : "FAIL") << " ("
                  << report.details << ")\n";
        all_pass = all_pass && report.pass;
      }
      return all_pass ? 0 : 1;
    }
    if (constants_cmd->parsed()) {
      const rfw::Problem problem =
          rfw::make_problem(opt.problem, opt.dim, opt.m, opt.seed);
      std::cout << rfw::constants_report(problem, to_run_config(opt));
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
