#pragma once

// Mixed reflection/synchronous coupling of two split-form marginals sharing
// one driver set, the C^1 cutoff that blends the two, and the concave
// distance whose mean decays at the certified contraction rate.

#include <cstdint>
#include <vector>

#include "ensemble.hpp"
#include "noise.hpp"
#include "scenario.hpp"
#include "timegrid.hpp"

namespace mvp {

// C^1 ramp in [0,1]: 0 on [0, 5eps/8], 1 on [7eps/8, inf), cubic blend with
// value 1/2 at 3eps/4. Reflection is fully on only above the gap 7eps/8.
double cutoff_phi(double eps, double r);

// Householder reflection I - 2 n n^T across the hyperplane orthogonal to z
// (n = z/|z|); identity for z = 0. Row-major d x d.
std::vector<double> reflection_matrix(const std::vector<double>& z, int d);

// f(r) = c1 r + (1 - exp(-c2 r))/c2, concave increasing; c2 = 0 means the
// linear limit c1 r + r.
double concave_distance(double c1, double c2, double r);

struct CoupledPair {
  Ensemble a, b;
};

CoupledPair make_coupled_pair(std::int64_t n, int d, std::int64_t time_index,
                              std::uint64_t driver_base = 0);

struct CouplingConfig {
  double eps = -1.0;        // < 0: default 0.01*l0, or 0.01 when l0 = 0
  bool synchronous_only = false;
  int workers = 1;
  // Law proxies for the drift of each marginal; null means own empirical law.
  const MeasureStats* stats_a = nullptr;
  const Ensemble* measure_a = nullptr;
  const MeasureStats* stats_b = nullptr;
  const Ensemble* measure_b = nullptr;
  double guard_override = 0.0;
};

// One Euler step of both marginals. Pair i of marginal b receives the
// reflected share of marginal a's additive increment: with pre-step gap
// Z = a_i - b_i and phi = cutoff_phi(eps, |Z|),
//   a_i += dt*drift_a + sqrt(alpha)(sqrt(phi) dB* + sqrt(1-phi) dBhat) + sigma_hat(a_i) dW
//   b_i += dt*drift_b + sqrt(alpha)(sqrt(phi) P(Z) dB* + sqrt(1-phi) dBhat) + sigma_hat(b_i) dW
// which preserves each marginal's law exactly (phi is pre-step measurable).
void coupled_step(const Scenario& s, const TimeGrid& grid, CoupledPair& pair,
                  const NoiseBundle& noise, const CouplingConfig& cfg = {});

// (1/N) sum_i f(|a_i - b_i|) with the concave distance above.
double mean_f_distance(const CoupledPair& pair, double c1, double c2);

struct PairDiagnostics {
  double mean_f = 0.0;
  double mean_abs_gap = 0.0;
  double fraction_reflecting = 0.0; // share of pairs with phi > 1/2
};
PairDiagnostics pair_diagnostics(const CoupledPair& pair, double c1, double c2, double eps);

double default_coupling_eps(const Scenario& s);

} // namespace mvp
