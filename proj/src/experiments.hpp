#pragma once

// Experiment harness: each run_* operation simulates a scenario, extracts the
// quantity the corresponding statement is about (pathwise shift discrepancy,
// pull-back gaps, contraction of paired or coupled systems, mean-field error
// versus ensemble size, law periodicity), fits rates, and returns a Report
// with a PASS / FAIL / INCONCLUSIVE verdict.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ensemble.hpp"
#include "ratefit.hpp"
#include "scenario.hpp"
#include "timegrid.hpp"

namespace mvp {

enum class Verdict { Pass, Fail, Inconclusive };
const char* verdict_name(Verdict v);

struct Series {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

struct FitRecord {
  std::string name;
  RateFit fit;
};

struct Report {
  std::string experiment;
  std::string scenario;
  std::uint64_t seed = 0;
  int workers = 1;
  double t0 = 0.0, dt = 0.0;
  std::int64_t period_steps = 0, n_steps = 0;
  std::vector<Series> series;
  std::vector<FitRecord> fits;
  std::vector<std::pair<std::string, double>> details; // ordered numeric facts
  std::vector<std::string> notes;
  Verdict verdict = Verdict::Inconclusive;
  double runtime_s = 0.0; // wall clock; excluded from reproducibility checks
};

// Numeric detail lookup; fails with ValidationError when absent.
double report_detail(const Report& r, const std::string& key);
bool report_has_detail(const Report& r, const std::string& key);

struct ExpParams {
  std::uint64_t seed = 42;
  int workers = 1;
  double t0 = 0.0;
  double dt = 0.0;          // 0: regime default (1e-3 tau full, 2e-4 tau split)
  double periods = 0.0;     // horizon in periods; 0: per-experiment default
  std::int64_t n_particles = 0; // 0: per-experiment default
  std::int64_t m_ref = 0;       // reference ensemble size; 0: 16*max(N)
  std::int64_t r_replicas = 2000;
  std::int64_t poc_replicas = 16; // independent repeats of the chaos-gap runs
  std::vector<std::int64_t> n_list; // mean-field error runs; empty: default
  std::vector<int> horizons;        // pull-back look-backs; empty: {1,2,4,8,16,32}
  double rate_floor = 0.0;          // 0: regime default
  double slope_ceiling = -0.45;
  double eps0 = 0.5;                // reported overlay curve only
  double eps_coupling = 0.0;        // 0: scenario default
  InitSpec init;                    // default Gaussian(0,1)
};

// Period-aligned grid for an experiment; refuses dt that does not divide the
// scenario period to an integer step count.
TimeGrid experiment_grid(const Scenario& s, const ExpParams& p, double default_periods);
double default_dt(const Scenario& s);

// True when the scenario coefficients are not constant over [t_from, t_to]
// (probed at a fixed state set on interior phase points).
bool coefficients_vary_on(const Scenario& s, double t_from, double t_to);

// Verdict combinator for fit-based checks: r^2 < 0.5 means the fit is too
// weak to support either answer, so FAIL degrades to INCONCLUSIVE.
Verdict fit_verdict(bool pass, double r_squared);

// Shift identity: the run on [s+tau, t+tau] with base noise must reproduce,
// particle by particle, the run on [s, t] with period-shifted noise.
Report run_pathwise_periodicity(const Scenario& s, const ExpParams& p);

// Pull-back gaps over growing look-back horizons with a fresh init draw per
// horizon, fitted to an exponential in the look-back time.
Report run_pullback(const Scenario& s, const ExpParams& p);

// Two-init contraction: synchronous paired gap (fully dissipative) or the
// reflection-coupled pair with W1 between marginal laws (split form).
Report run_contraction(const Scenario& s, const InitSpec& init_a, const InitSpec& init_b,
                       const ExpParams& p);

// Mean-field error: tagged particles driven by the reference law versus the
// interacting system on shared drivers, across ensemble sizes.
Report run_poc(const Scenario& s, const ExpParams& p);

// Distributional periodicity: after burn-in, the law at t matches the law at
// t+tau up to sampling noise while the law at t+tau/2 stays separated.
Report run_law_periodicity(const Scenario& s, const ExpParams& p);

} // namespace mvp
