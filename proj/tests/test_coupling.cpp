#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "common.hpp"
#include "coupling.hpp"
#include "ensemble.hpp"
#include "noise.hpp"
#include "ratefit.hpp"
#include "scenario.hpp"
#include "timegrid.hpp"

using namespace mvp;

namespace {

template <class F>
errc thrown_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return errc::ok;
}

// Split-form scenario with only the additive noise active.
Scenario free_noise_scenario(double alpha_val) {
  Scenario s;
  s.name = "free_noise";
  s.regime = Regime::PartiallyDissipative;
  s.tau = 1.0;
  s.dim = 1;
  s.stats_req = StatsRequirement::None;
  s.alpha = [alpha_val](double) { return alpha_val; };
  s.bhat = [](double, const double*, double* out) { out[0] = 0.0; };
  s.sigma_hat_diag = [](double, const double*, double* out) { out[0] = 0.0; };
  return s;
}

double slope_standard_error(const std::vector<double>& xs, const std::vector<double>& ys,
                            const LinFit& fit) {
  const std::size_t n = xs.size();
  double xbar = 0.0;
  for (double x : xs) xbar += x / n;
  double sxx = 0.0, sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (xs[i] - xbar) * (xs[i] - xbar);
    const double r = ys[i] - (fit.slope * xs[i] + fit.intercept);
    sse += r * r;
  }
  return std::sqrt(sse / (static_cast<double>(n) - 2.0) / sxx);
}

} // namespace

TEST_CASE("cutoff ramp boundaries, midpoint and smoothness") {
  for (double eps : {0.5, 1.0, 2.0}) {
    CHECK(cutoff_phi(eps, 0.0) == 0.0);
    CHECK(cutoff_phi(eps, 5.0 * eps / 8.0) == 0.0);
    CHECK(cutoff_phi(eps, 7.0 * eps / 8.0) == 1.0);
    CHECK(cutoff_phi(eps, 10.0 * eps) == 1.0);
    CHECK(std::abs(cutoff_phi(eps, 3.0 * eps / 4.0) - 0.5) <= 1e-12);
    // C^1 at both knots: central differences vanish.
    const double h = 1e-6 * eps;
    for (double knot : {5.0 * eps / 8.0, 7.0 * eps / 8.0}) {
      double fd = (cutoff_phi(eps, knot + h) - cutoff_phi(eps, knot - h)) / (2.0 * h);
      CHECK(std::abs(fd) < 1e-4);
    }
    // Monotone nondecreasing across the ramp.
    double prev = -1.0;
    for (int j = 0; j <= 1000; ++j) {
      double v = cutoff_phi(eps, eps * j / 1000.0);
      CHECK(v >= prev);
      prev = v;
    }
  }
  CHECK(thrown_code([] { (void)cutoff_phi(0.0, 0.1); }) == errc::domain_error);
  CHECK(thrown_code([] { (void)cutoff_phi(1.0, -0.1); }) == errc::domain_error);
}

TEST_CASE("householder reflection") {
  std::vector<double> z0 = {0.0, 0.0};
  std::vector<double> p0 = reflection_matrix(z0, 2);
  CHECK(p0[0] == 1.0);
  CHECK(p0[1] == 0.0);
  CHECK(p0[2] == 0.0);
  CHECK(p0[3] == 1.0);

  std::vector<double> z = {1.0, 1.0};
  std::vector<double> p = reflection_matrix(z, 2);
  CHECK(std::abs(p[0]) < 1e-15);
  CHECK(std::abs(p[1] + 1.0) < 1e-15);
  CHECK(std::abs(p[2] + 1.0) < 1e-15);
  CHECK(std::abs(p[3]) < 1e-15);

  SmallRng rng(41);
  for (int it = 0; it < 100; ++it) {
    const int d = 1 + static_cast<int>(it % 3);
    std::vector<double> v(d);
    double r2 = 0.0;
    for (double& c : v) {
      c = 2.0 * rng.uniform() - 1.0;
      r2 += c * c;
    }
    if (r2 < 1e-12) continue;
    std::vector<double> m = reflection_matrix(v, d);
    // P P^T = I
    for (int i = 0; i < d; ++i) {
      for (int j = 0; j < d; ++j) {
        double acc = 0.0;
        for (int k = 0; k < d; ++k) acc += m[i * d + k] * m[j * d + k];
        CHECK(std::abs(acc - (i == j ? 1.0 : 0.0)) < 1e-12);
      }
    }
    // P z = -z
    double nrm = std::sqrt(r2);
    for (int i = 0; i < d; ++i) {
      double acc = 0.0;
      for (int k = 0; k < d; ++k) acc += m[i * d + k] * v[k];
      CHECK(std::abs(acc + v[i]) < 1e-12 * (1.0 + nrm));
    }
    // det P = -1
    double det = 0.0;
    if (d == 1) {
      det = m[0];
    } else if (d == 2) {
      det = m[0] * m[3] - m[1] * m[2];
    } else {
      det = m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
            m[2] * (m[3] * m[7] - m[4] * m[6]);
    }
    CHECK(std::abs(det + 1.0) < 1e-12);
  }
}

TEST_CASE("concave distance function") {
  CHECK(concave_distance(1.0, 1.0, 0.0) == 0.0);
  CHECK(concave_distance(1.0, 1.0, 1.0) ==
        doctest::Approx(2.0 - std::exp(-1.0)).epsilon(1e-14));
  // Far field slope approaches c1.
  const double c1 = 0.7, c2 = 0.003;
  double r1 = 1e3 / c2, r2 = 2e3 / c2;
  double slope = (concave_distance(c1, c2, r2) - concave_distance(c1, c2, r1)) / (r2 - r1);
  CHECK(slope == doctest::Approx(c1).epsilon(1e-9));
  // Sandwich c1 r <= f <= (c1 + 1) r.
  for (int j = 1; j <= 1000; ++j) {
    double r = 5.0 * j / 1000.0;
    double f = concave_distance(c1, 2.0, r);
    CHECK(f >= c1 * r - 1e-12);
    CHECK(f <= (c1 + 1.0) * r + 1e-12);
  }
  // c2 = 0 is the exact linear limit.
  CHECK(concave_distance(0.3, 0.0, 2.5) == doctest::Approx((0.3 + 1.0) * 2.5).epsilon(1e-14));
  CHECK(thrown_code([] { (void)concave_distance(1.0, 1.0, -0.5); }) == errc::domain_error);
}

TEST_CASE("contraction constants on hand-computed scenarios") {
  Scenario s = free_noise_scenario(2.0);
  s.K0 = 1.0;
  s.K1 = 2.0;
  s.K2 = 0.1;
  s.l0 = 0.5;
  DerivedConstants e = contraction_constants(s, ContractionLemma::Ergodicity52);
  CHECK(e.alpha_bar == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(e.c2 == doctest::Approx(1.1).epsilon(1e-14));
  CHECK(e.c1 == doctest::Approx(std::exp(-0.55)).epsilon(1e-14));
  CHECK(e.c_star ==
        doctest::Approx(std::exp(-0.55) * 1.9 / (1.0 + std::exp(-0.55))).epsilon(1e-13));

  DerivedConstants p = contraction_constants(s, ContractionLemma::PoC53);
  CHECK(p.c2 == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(p.c1 == doctest::Approx(std::exp(-1.5)).epsilon(1e-14));
  CHECK(p.c_star ==
        doctest::Approx(2.0 * std::exp(-1.5) / (1.0 + std::exp(-1.5))).epsilon(1e-13));

  s.l0 = 0.0; // linear distance limit
  DerivedConstants e0 = contraction_constants(s, ContractionLemma::Ergodicity52);
  CHECK(e0.c1 == 1.0);
  CHECK(e0.c_star == doctest::Approx(1.9).epsilon(1e-14));
}

TEST_CASE("mean distance over a coupled pair") {
  CoupledPair pair = make_coupled_pair(4, 1, 0);
  pair.a.states = {0.0, 0.0, 0.02, 0.02};
  pair.b.states = {0.0, 0.0, 0.0, 0.0};
  CHECK(mean_f_distance(pair, 1.0, 1.0) > 0.0);

  CoupledPair same = make_coupled_pair(4, 1, 0);
  CHECK(mean_f_distance(same, 1.0, 1.0) == 0.0);

  CoupledPair one = make_coupled_pair(1, 1, 0);
  one.a.states = {1.0};
  one.b.states = {0.0};
  CHECK(mean_f_distance(one, 1.0, 1.0) ==
        doctest::Approx(2.0 - std::exp(-1.0)).epsilon(1e-14));

  PairDiagnostics diag = pair_diagnostics(pair, 1.0, 0.0, 0.01);
  CHECK(diag.fraction_reflecting == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(diag.mean_abs_gap == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(diag.mean_f == doctest::Approx(0.02).epsilon(1e-12));
}

TEST_CASE("reflected and synchronous shares of one coupled step") {
  Scenario s = free_noise_scenario(1.0);
  TimeGrid grid = make_period_grid(1.0, 100, 1);
  NoiseBundle noise(77, 1, grid.dt);
  CouplingConfig cfg;
  cfg.eps = 0.5;

  // Wide gap: fully reflecting, so the gap moves by twice the shared draw.
  CoupledPair wide = make_coupled_pair(8, 1, 0);
  for (std::int64_t i = 0; i < 8; ++i) {
    wide.a.states[i] = 5.0 + 0.1 * i;
    wide.b.states[i] = -5.0;
  }
  std::vector<double> za(8);
  for (std::int64_t i = 0; i < 8; ++i) za[i] = wide.a.states[i] - wide.b.states[i];
  coupled_step(s, grid, wide, noise, cfg);
  for (std::int64_t i = 0; i < 8; ++i) {
    double dbs = 0.0;
    noise.increment(Driver::B_STAR, wide.a.driver_ids[i], 0, &dbs);
    double znew = wide.a.states[i] - wide.b.states[i];
    CHECK(std::abs(znew - (za[i] + 2.0 * dbs)) < 1e-12);
  }

  // Narrow gap: fully synchronous, so the gap is frozen.
  CoupledPair narrow = make_coupled_pair(8, 1, 0);
  for (std::int64_t i = 0; i < 8; ++i) {
    narrow.a.states[i] = 0.1 + 0.01 * i;
    narrow.b.states[i] = narrow.a.states[i] - 0.05; // gap 0.05 < 5 eps/8
  }
  coupled_step(s, grid, narrow, noise, cfg);
  for (std::int64_t i = 0; i < 8; ++i) {
    CHECK(std::abs((narrow.a.states[i] - narrow.b.states[i]) - 0.05) < 1e-14);
  }

  // Exactly equal marginals stay equal bit for bit.
  CoupledPair equal = make_coupled_pair(8, 1, 0);
  fill_init(InitSpec{}, equal.a, noise, 0);
  equal.b.states = equal.a.states;
  for (int k = 0; k < 100; ++k) coupled_step(s, grid, equal, noise, cfg);
  CHECK(equal.a.states == equal.b.states);
  CHECK(equal.a.time_index == 100);
}

TEST_CASE("each marginal keeps the additive noise variance") {
  Scenario s = free_noise_scenario(1.0);
  TimeGrid grid = make_period_grid(1.0, 100, 1); // dt = 0.01
  NoiseBundle noise(99, 1, grid.dt);
  const std::int64_t n = 100000;
  CoupledPair pair = make_coupled_pair(n, 1, 0);
  // Gaps spread across both phi regimes.
  fill_init(InitSpec{}, pair.a, noise, 0);
  fill_init(InitSpec{}, pair.b, noise, 1);
  CouplingConfig cfg;
  cfg.eps = 2.0;
  std::vector<double> pre_a = pair.a.states, pre_b = pair.b.states;
  coupled_step(s, grid, pair, noise, cfg);
  for (int side = 0; side < 2; ++side) {
    const std::vector<double>& pre = side == 0 ? pre_a : pre_b;
    const std::vector<double>& post = side == 0 ? pair.a.states : pair.b.states;
    double sum = 0.0, sq = 0.0;
    for (std::int64_t i = 0; i < n; ++i) {
      double inc = post[i] - pre[i];
      sum += inc;
      sq += inc * inc;
    }
    double mean = sum / n;
    double var = sq / n - mean * mean;
    CHECK(std::abs(mean) < 3.0 * std::sqrt(grid.dt / n));
    CHECK(var == doctest::Approx(grid.dt).epsilon(0.02));
  }
}

TEST_CASE("weighted pair distance trends down at the certified rate") {
  Scenario s = make_double_well_partial();
  DerivedConstants dc = derived_constants(s);
  const std::int64_t m = 500;
  TimeGrid grid = make_period_grid(s.tau, m, 20 * m);
  NoiseBundle noise(42, 1, grid.dt);
  const std::int64_t n = 64;
  CoupledPair pair = make_coupled_pair(n, 1, 0);
  fill_init(InitSpec{}, pair.a, noise, 0);
  InitSpec off;
  off.mean = 2.0;
  fill_init(off, pair.b, noise, 1);

  CouplingConfig cfg;
  std::vector<double> ts, logw;
  DerivedConstants e52 = contraction_constants(s, ContractionLemma::Ergodicity52);
  for (int period = 0; period < 20; ++period) {
    for (std::int64_t k = 0; k < m; ++k) coupled_step(s, grid, pair, noise, cfg);
    double t = grid.time_at(pair.a.time_index);
    double f = mean_f_distance(pair, e52.c1, e52.c2);
    REQUIRE(f > 0.0);
    ts.push_back(t);
    logw.push_back(std::log(f) + e52.c_star * dc.alpha_bar * t);
  }
  LinFit fit = linear_fit(ts, logw);
  double se = slope_standard_error(ts, logw, fit);
  CHECK(fit.slope <= 2.0 * se);
}

TEST_CASE("empirical decay rate is insensitive to the cutoff width") {
  Scenario s = make_double_well_partial();
  const std::int64_t m = 500;
  TimeGrid grid = make_period_grid(s.tau, m, 20 * m);
  NoiseBundle noise(42, 1, grid.dt);
  const double eps0 = default_coupling_eps(s);
  double rates[2] = {0.0, 0.0};
  for (int v = 0; v < 2; ++v) {
    CoupledPair pair = make_coupled_pair(64, 1, 0);
    fill_init(InitSpec{}, pair.a, noise, 0);
    InitSpec off;
    off.mean = 2.0;
    fill_init(off, pair.b, noise, 1);
    CouplingConfig cfg;
    cfg.eps = v == 0 ? eps0 : eps0 / 2.0;
    std::vector<double> ts, fs;
    for (int half = 0; half < 40; ++half) {
      for (std::int64_t k = 0; k < m / 2; ++k) coupled_step(s, grid, pair, noise, cfg);
      ts.push_back(grid.time_at(pair.a.time_index));
      fs.push_back(mean_f_distance(pair, 1.0, 1.0));
    }
    rates[v] = fit_exponential(ts, fs).rate;
  }
  CHECK(rates[0] > 0.0);
  CHECK(std::abs(rates[1] - rates[0]) < 0.15 * std::abs(rates[0]));
}

TEST_CASE("coupling requires the split regime") {
  Scenario s = make_mv_ou_periodic();
  TimeGrid grid = make_period_grid(1.0, 100, 1);
  NoiseBundle noise(1, 1, grid.dt);
  CoupledPair pair = make_coupled_pair(4, 1, 0);
  CHECK(thrown_code([&] { coupled_step(s, grid, pair, noise); }) == errc::wrong_regime);
}
