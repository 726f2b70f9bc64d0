#pragma once

// Euler-Maruyama integrators for the interacting particle system, the
// non-interacting tagged system driven by an external law proxy, and the
// pull-back construction over growing look-back horizons.

#include <cstdint>
#include <functional>
#include <vector>

#include "noise.hpp"
#include "scenario.hpp"
#include "timegrid.hpp"

namespace mvp {

inline constexpr int kMaxDim = 16;

struct Ensemble {
  std::int64_t n = 0;
  int d = 1;
  std::vector<double> states;            // n x d row-major
  std::int64_t time_index = 0;           // absolute grid step
  std::vector<std::uint64_t> driver_ids; // noise identity per particle slot
};

Ensemble make_ensemble(std::int64_t n, int d, std::int64_t time_index,
                       std::uint64_t driver_base = 0);

// Summary view of an ensemble (sorted reduction) plus raw sample access.
// The view borrows ens.states; keep the ensemble alive while using it.
MeasureStats stats_of(const Ensemble& ens);

struct InitSpec {
  enum class Kind { Deterministic, Gaussian } kind = Kind::Gaussian;
  std::vector<double> x0;      // deterministic: one d-vector broadcast to all
  double mean = 0.0, sd = 1.0; // gaussian parameters (componentwise)
};

// Draws (or assigns) initial states; Gaussian draws are keyed by
// (driver id, epoch) so distinct epochs give independent samples and equal
// epochs reproduce the same ones.
void fill_init(const InitSpec& init, Ensemble& ens, const NoiseBundle& noise, std::int64_t epoch);

struct StepOptions {
  int workers = 1;
  // Measure argument for the drift: explicit stats stream (closed-form law),
  // another ensemble (sampled law proxy), or the ensemble itself (default).
  const MeasureStats* external_stats = nullptr;
  const Ensemble* external_measure = nullptr;
  double guard_override = 0.0;         // 0 = scenario default
  std::vector<double>* scratch = nullptr; // optional reusable n*d buffer
};

void em_step(const Scenario& s, const TimeGrid& grid, Ensemble& ens, const NoiseBundle& noise,
             const StepOptions& opts = {});

struct SimOptions {
  int workers = 1;
  std::function<MeasureStats(std::int64_t)> stats_provider; // per-step law proxy
  double guard_override = 0.0;
};

// Advances grid.n_steps steps from ens.time_index; returns copies at the
// requested offsets (0 = initial state, n_steps = final).
std::vector<Ensemble> simulate(const Scenario& s, const TimeGrid& grid, Ensemble ens,
                               const NoiseBundle& noise,
                               const std::vector<std::int64_t>& snapshot_offsets,
                               const SimOptions& opts = {});

struct PullbackRun {
  std::int64_t t_target_step = 0;
  std::vector<int> horizons;          // look-back period counts
  std::vector<Ensemble> endpoints;    // state at the target step per horizon
  std::vector<double> gaps;           // mean-square successive endpoint gaps
};

// Runs the system from t_target - k*tau to t_target for each k, on one shared
// noise realization (absolute indexing), with an independent init draw per
// distinct k. Gaps pair particles by slot index, which share drivers.
PullbackRun pullback_run(const Scenario& s, const TimeGrid& grid, std::int64_t t_target_step,
                         const std::vector<int>& k_list, const InitSpec& init, std::int64_t N,
                         const NoiseBundle& noise, int workers);

struct ReferenceLaw {
  bool closed_form = false;
  std::function<MeasureStats(std::int64_t)> stats_at; // by absolute step
  std::vector<Ensemble> snapshots;
};

// Law proxy for the non-interacting system: exact closed-form stats stream
// when the scenario has one, otherwise a large-M particle run (M >= 1024).
ReferenceLaw reference_law(const Scenario& s, const TimeGrid& grid, std::int64_t M,
                           const InitSpec& init, const NoiseBundle& noise,
                           const std::vector<std::int64_t>& snapshot_offsets, int workers);

// Exact law summary of the periodic mean-field OU solution at time t.
MeasureStats closed_form_ou_stats(const Scenario& s, double t);

} // namespace mvp
