#pragma once

// Coefficient sets for the two dynamical regimes, the built-in example
// scenarios, and the constants derived from their dissipativity data.
//
// Fully dissipative form:   dX = b_t(X, mu) dt + sigma_t(X, mu) dW
// Split (partial) form:     dX = (bhat_t(X) + (btilde_t * mu)(X)) dt
//                                + sqrt(alpha_t) dB + sigma_hat_t(X) dW
//
// All diffusion coefficients used by the built-ins are diagonal, so sigma is
// represented as a d-vector acting componentwise on the driver increment.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "common.hpp"

namespace mvp {

enum class Regime { FullyDissipative, PartiallyDissipative };
enum class StatsRequirement { None, MeanOnly, AbsMoment, Pairwise };
enum class ContractionLemma { Ergodicity52, PoC53 };

struct MeasureStats {
  std::vector<double> mean;    // d-vector
  double abs_moment = 0.0;     // mu(|.|)
  double second_moment = 0.0;  // mu(|.|^2)
  // Optional sample view for pairwise kernels (set when the measure argument
  // is an ensemble; null for summary-only stats).
  const double* samples = nullptr;
  std::int64_t n_samples = 0;
  int sample_dim = 0;
};

struct DerivedConstants {
  double lambda = 0.0;     // -(integral over one period of K1+K2); fully dissipative
  double alpha_bar = 0.0;  // (1/tau) integral of alpha; partial regime
  double c1 = 0.0;
  double c2 = 0.0;
  double c_star = 0.0;
  double k2_star = 0.0;    // admissible K2 threshold
};

// Pairwise-kernel dispatch: the generic path goes through std::function; the
// tanh difference kernel gets a tight specialized loop because it sits inside
// O(N^2) per-step sums.
enum class PairKernel { None, Generic, TanhDiff };

struct Scenario {
  std::string name;
  Regime regime = Regime::FullyDissipative;
  double tau = 1.0;
  int dim = 1;
  StatsRequirement stats_req = StatsRequirement::None;
  double divergence_guard = 1e8;

  // --- fully dissipative coefficients -----------------------------------
  std::function<void(double t, const double* x, const MeasureStats&, double* out)> drift;
  std::function<void(double t, const double* x, const MeasureStats&, double* out)> sigma_diag;
  std::function<double(double t)> K1t, K2t, K3t; // tau-periodic dissipativity data

  // --- split-form coefficients ------------------------------------------
  std::function<double(double t)> alpha;
  std::function<void(double t, const double* x, double* out)> bhat;
  std::function<void(double t, const double* x, const double* y, double* out)> btilde;
  std::function<void(double t, const double* x, double* out)> sigma_hat_diag;
  PairKernel pair_kernel = PairKernel::None;
  double tanh_gain = 0.0; // K2 factor of the TanhDiff kernel (before alpha_t)
  double K0 = 0.0, K1 = 0.0, K2 = 0.0, K3 = 0.0, l0 = 0.0;

  // mv_ou parameters kept for oracle access.
  struct OuParams {
    double a = 0.0, b = 0.0, A = 0.0, sigma0 = 0.0;
  } ou;
  bool has_ou_oracle = false;
};

// ---------------------------------------------------------------------------
// Built-in scenarios (addressable by name from the CLI).

struct MvOuParams {
  double a = 1.0;
  double b = 0.25;
  double A = 1.0;
  double sigma0 = 0.2;
  double tau = 1.0;
  int dim = 1;
};
Scenario make_mv_ou_periodic(const MvOuParams& p = {});

struct PiecewiseK1Params {
  double kappa = 0.1;    // constant value of K2(t)
  bool clamped = true;   // cubic active only where K1(t) <= 0
  double tau = 1.0;
};
Scenario make_piecewise_k1(const PiecewiseK1Params& p = {});

struct TruncatedOuParams {
  double n = 2.0;        // truncation radius of g_n
  double a = 1.0;
  double alpha_amp = 0.5; // alpha_t = 1 + alpha_amp*sin(2 pi t / tau)
  double tau = 1.0;
};
Scenario make_truncated_ou(const TruncatedOuParams& p = {});

struct DoubleWellParams {
  double theta = 0.5;     // potential scale: bhat = -alpha_t*theta*(|x|^2 x - x)
  double k2 = -1.0;       // interaction gain; < 0 means "admissible_k2 / 2"
  double alpha_amp = 0.5;
  double tau = 1.0;
  int dim = 1;
  bool sine_sigma = false; // state-dependent sigma_hat variant
  double k3 = 0.0;         // only used by the sine variant
};
Scenario make_double_well_partial(const DoubleWellParams& p = {});

Scenario make_scenario_by_name(const std::string& name);
std::vector<std::string> builtin_scenario_names();

// ---------------------------------------------------------------------------
// Operations.

// Drift with the measure argument read from stats (summary or sample view).
void eval_drift(const Scenario& s, double t, const double* x, const MeasureStats& stats,
                double* out);

struct DiffusionEval {
  double sqrt_alpha = 0.0;         // additive scale of the split regime (0 otherwise)
  std::vector<double> sigma_diag;  // diagonal of sigma (full regime) or sigma_hat
};
DiffusionEval eval_diffusion(const Scenario& s, double t, const double* x,
                             const MeasureStats& stats);

// Mean-field convolution (btilde * mu)(x) for all rows of xs against the
// sample set ys; single code path shared by eval_drift and the integrators.
void convolve_btilde_all(const Scenario& s, double t, const double* xs, std::int64_t n_x,
                         const double* ys, std::int64_t n_y, int d, int workers, double* out);

// Summary statistics of a raw sample block via fixed pairwise-tree reduction
// over value-sorted entries, so the result is invariant under permutations of
// the input rows. `presorted` skips the internal sort.
MeasureStats compute_stats(const double* states, std::int64_t n, int d, bool presorted = false);

// Value order (lexicographic over components) used by the sorted reductions.
void sort_sample_rows(std::vector<double>& rows, std::int64_t n, int d);

// Unique tau-periodic solution of m' = (b-a) m + A sin(2 pi t / tau).
double oracle_periodic_mean(double a, double b, double A, double tau, double t);

// Largest K2 in (0, K1/2) passing both contraction predicates (bisection to
// relative tolerance 1e-6).
double admissible_k2(double K0, double K1, double l0);

// Constants of the selected contraction lemma for a split-form scenario.
DerivedConstants contraction_constants(const Scenario& s, ContractionLemma lemma);

// lambda / alpha_bar (composite Simpson, 1e4 panels per period) plus the
// contraction constants where they apply.
DerivedConstants derived_constants(const Scenario& s);

// Composite Simpson quadrature over [a, b] with n panels (n made even).
double simpson(const std::function<double(double)>& f, double a, double b, int n);

// ---------------------------------------------------------------------------
// Randomized assumption spot-checks (diagnostics; never silently absorbed).

struct SpotCheckResult {
  int n_tuples = 0;
  int violations = 0;
  double max_excess = 0.0; // largest LHS - RHS over all tuples
};

// One-sided dissipativity check of the full regime on random
// (t, x, y, mu, nu) tuples with two-point empirical measures.
SpotCheckResult spot_check_dissipativity(const Scenario& s, std::uint64_t seed, int n_tuples);

// Interaction Lipschitz check of the split regime on random tuples.
SpotCheckResult spot_check_interaction_lipschitz(const Scenario& s, std::uint64_t seed,
                                                 int n_tuples);

} // namespace mvp
