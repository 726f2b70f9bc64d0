#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "common.hpp"
#include "ensemble.hpp"
#include "math_fast.hpp"
#include "noise.hpp"
#include "scenario.hpp"
#include "timegrid.hpp"

using namespace mvp;

namespace {

Scenario interaction_only_scenario() {
  Scenario s;
  s.name = "interaction_only";
  s.regime = Regime::PartiallyDissipative;
  s.tau = 1.0;
  s.dim = 1;
  s.stats_req = StatsRequirement::Pairwise;
  s.pair_kernel = PairKernel::Generic;
  s.alpha = [](double) { return 0.0; };
  s.bhat = [](double, const double*, double* out) { out[0] = 0.0; };
  s.btilde = [](double, const double* x, const double* y, double* out) { out[0] = y[0] - x[0]; };
  s.sigma_hat_diag = [](double, const double*, double* out) { out[0] = 0.0; };
  return s;
}

Scenario frozen_scenario() {
  Scenario s;
  s.name = "frozen";
  s.regime = Regime::FullyDissipative;
  s.tau = 1.0;
  s.dim = 1;
  s.stats_req = StatsRequirement::None;
  s.drift = [](double, const double*, const MeasureStats&, double* out) { out[0] = 0.0; };
  s.sigma_diag = [](double, const double*, const MeasureStats&, double* out) { out[0] = 0.0; };
  return s;
}

InitSpec det_init(double x0) {
  InitSpec init;
  init.kind = InitSpec::Kind::Deterministic;
  init.x0 = {x0};
  return init;
}

} // namespace

TEST_CASE("noise-free linear system decays geometrically") {
  MvOuParams p;
  p.a = 1.25;
  p.b = 0.25;
  p.A = 0.0;
  p.sigma0 = 0.0;
  Scenario s = make_mv_ou_periodic(p);
  TimeGrid grid = make_period_grid(1.0, 10, 10); // dt = 0.1, ten steps
  NoiseBundle noise(42, 1, grid.dt);
  Ensemble ens = make_ensemble(1, 1, 0);
  fill_init(det_init(1.0), ens, noise, 0);
  auto snaps = simulate(s, grid, ens, noise, {0, 10});
  REQUIRE(snaps.size() == 2);
  CHECK(snaps[0].states[0] == 1.0);
  // mean tracks the single particle, so the effective rate is a - b = 1.
  CHECK(snaps[1].states[0] == doctest::Approx(std::pow(0.9, 10)).epsilon(1e-12));
  CHECK(snaps[1].time_index == 10);
}

TEST_CASE("pairwise interaction convolution on a two-particle ensemble") {
  Scenario s = interaction_only_scenario();
  TimeGrid grid = make_period_grid(1.0, 10, 1);
  NoiseBundle noise(1, 1, grid.dt);
  Ensemble ens = make_ensemble(2, 1, 0);
  ens.states = {0.0, 2.0};
  em_step(s, grid, ens, noise);
  CHECK(ens.states[0] == doctest::Approx(0.1).epsilon(1e-14)); // + dt * mean(y - 0)
  CHECK(ens.states[1] == doctest::Approx(1.9).epsilon(1e-14)); // + dt * mean(y - 2)
  CHECK(ens.time_index == 1);
}

TEST_CASE("zero coefficients leave states untouched bit for bit") {
  Scenario s = frozen_scenario();
  TimeGrid grid = make_period_grid(1.0, 10, 20);
  NoiseBundle noise(3, 1, grid.dt);
  Ensemble ens = make_ensemble(5, 1, 0);
  fill_init(InitSpec{}, ens, noise, 0);
  std::vector<double> before = ens.states;
  auto snaps = simulate(s, grid, ens, noise, {20});
  CHECK(snaps[0].states == before);
}

TEST_CASE("pullback gaps") {
  MvOuParams p;
  p.a = 1.25;
  p.b = 0.25;
  p.A = 0.0;
  p.sigma0 = 0.0;
  Scenario s = make_mv_ou_periodic(p);
  TimeGrid grid = make_period_grid(1.0, 10, 10);
  NoiseBundle noise(42, 1, grid.dt);

  // Same horizon twice means the same init epoch and the same path: zero gap.
  PullbackRun same = pullback_run(s, grid, 0, {1, 1}, InitSpec{}, 16, noise, 1);
  REQUIRE(same.gaps.size() == 1);
  CHECK(same.gaps[0] == 0.0);

  // Deterministic start: endpoint from horizon k is q^(k m), so successive
  // mean-square gaps shrink by exactly q^(2m).
  PullbackRun run = pullback_run(s, grid, 0, {1, 2, 3}, det_init(1.0), 4, noise, 1);
  REQUIRE(run.gaps.size() == 2);
  const double q2m = std::pow(0.9, 20);
  CHECK(run.gaps[1] / run.gaps[0] == doctest::Approx(q2m).epsilon(1e-9));
  REQUIRE(run.endpoints.size() == 3);
  CHECK(run.endpoints[0].states[0] == doctest::Approx(std::pow(0.9, 10)).epsilon(1e-12));
}

TEST_CASE("closed-form law proxy matches the periodic oracle") {
  Scenario s = make_mv_ou_periodic();
  TimeGrid grid = make_period_grid(1.0, 100, 100);
  NoiseBundle noise(42, 1, grid.dt);
  ReferenceLaw rl = reference_law(s, grid, 2048, InitSpec{}, noise, {}, 1);
  CHECK(rl.closed_form);
  for (std::int64_t k : {std::int64_t{0}, std::int64_t{37}, std::int64_t{100}}) {
    MeasureStats st = rl.stats_at(k);
    double m = oracle_periodic_mean(1.0, 0.25, 1.0, 1.0, grid.phase_time(k));
    CHECK(std::abs(st.mean[0] - m) < 1e-8);
    CHECK(st.second_moment ==
          doctest::Approx(0.2 * 0.2 / (2.0 * 1.0) + m * m).epsilon(1e-10));
  }
}

TEST_CASE("tagged system with matching stats reproduces the interacting one") {
  Scenario s = make_mv_ou_periodic();
  TimeGrid grid = make_period_grid(1.0, 100, 50);
  NoiseBundle noise(7, 1, grid.dt);
  Ensemble a = make_ensemble(16, 1, 0);
  fill_init(InitSpec{}, a, noise, 0);
  Ensemble b = a;
  for (int k = 0; k < 50; ++k) {
    MeasureStats st = stats_of(b);
    em_step(s, grid, a, noise);
    StepOptions so;
    so.external_stats = &st;
    em_step(s, grid, b, noise, so);
  }
  CHECK(a.states == b.states);
}

TEST_CASE("particle relabeling commutes with the dynamics") {
  for (const char* name : {"mv_ou_periodic", "double_well_partial"}) {
    Scenario s = make_scenario_by_name(name);
    TimeGrid grid = make_period_grid(1.0, 100, 10);
    NoiseBundle noise(11, 1, grid.dt);
    const std::int64_t n = 16;
    Ensemble a = make_ensemble(n, 1, 0);
    fill_init(InitSpec{}, a, noise, 0);

    // Reversal permutation of both states and driver ids.
    Ensemble b = a;
    for (std::int64_t i = 0; i < n; ++i) {
      b.states[i] = a.states[n - 1 - i];
      b.driver_ids[i] = a.driver_ids[n - 1 - i];
    }
    auto sa = simulate(s, grid, a, noise, {10});
    auto sb = simulate(s, grid, b, noise, {10});
    for (std::int64_t i = 0; i < n; ++i) {
      CHECK(sb[0].states[i] == sa[0].states[n - 1 - i]);
    }
  }
}

TEST_CASE("running one period later on shifted noise is the identical computation") {
  for (const char* name : {"mv_ou_periodic", "double_well_partial"}) {
    Scenario s = make_scenario_by_name(name);
    const std::int64_t m = 100;
    NoiseBundle noise(13, 1, s.tau / m);
    const std::int64_t n_steps = 30;

    Ensemble e0 = make_ensemble(8, 1, 0);
    fill_init(det_init(0.5), e0, noise, 0);
    Ensemble e1 = e0;
    e1.time_index = m;

    TimeGrid g0 = make_period_grid(s.tau, m, n_steps);
    auto base = simulate(s, g0, e1, noise, {n_steps});
    auto shifted = simulate(s, g0, e0, noise.wiener_shift(1, m), {n_steps});
    CHECK(base[0].states == shifted[0].states);
  }
}

TEST_CASE("second moment stays bounded over a long horizon") {
  Scenario s = make_mv_ou_periodic();
  const std::int64_t m = 1000;
  TimeGrid grid = make_period_grid(1.0, m, 100 * m);
  NoiseBundle noise(42, 1, grid.dt);
  Ensemble ens = make_ensemble(64, 1, 0);
  fill_init(InitSpec{}, ens, noise, 0);
  std::vector<std::int64_t> offs;
  for (int k = 1; k <= 100; ++k) offs.push_back(k * m);
  auto snaps = simulate(s, grid, ens, noise, offs);
  double worst = 0.0;
  std::vector<double> m2;
  for (const auto& sn : snaps) {
    MeasureStats st = stats_of(sn);
    m2.push_back(st.second_moment);
    worst = std::max(worst, st.second_moment);
  }
  CHECK(worst < 2.0);
  // After burn-in the per-period second moment fluctuates around a fixed level.
  double first = 0.0, second = 0.0;
  for (int k = 50; k < 75; ++k) first += m2[k] / 25.0;
  for (int k = 75; k < 100; ++k) second += m2[k] / 25.0;
  CHECK(std::abs(second - first) < 0.02);
}

TEST_CASE("fast tanh stays within 5e-13 of the library") {
  double worst = 0.0;
  for (double x = -20.0; x <= 20.0; x += 1e-3) {
    worst = std::max(worst, std::abs(fast_tanh(x) - std::tanh(x)));
  }
  CHECK(worst < 5e-13);
}

TEST_CASE("worker count never changes the numbers") {
  Scenario s = make_double_well_partial();
  TimeGrid grid = make_period_grid(1.0, 100, 1);
  NoiseBundle noise(19, 1, grid.dt);
  Ensemble a = make_ensemble(33, 1, 0);
  fill_init(InitSpec{}, a, noise, 0);
  Ensemble b = a;
  StepOptions s1, s4;
  s1.workers = 1;
  s4.workers = 4;
  for (int k = 0; k < 5; ++k) {
    em_step(s, grid, a, noise, s1);
    em_step(s, grid, b, noise, s4);
  }
  CHECK(a.states == b.states);

  Scenario gen = interaction_only_scenario();
  std::vector<double> xs(7), ys(13);
  SmallRng rng(23);
  for (double& v : xs) v = 2.0 * rng.uniform() - 1.0;
  for (double& v : ys) v = 2.0 * rng.uniform() - 1.0;
  std::vector<double> o1(7), o3(7);
  convolve_btilde_all(gen, 0.3, xs.data(), 7, ys.data(), 13, 1, 1, o1.data());
  convolve_btilde_all(gen, 0.3, xs.data(), 7, ys.data(), 13, 1, 3, o3.data());
  CHECK(o1 == o3);
}

TEST_CASE("runaway states trip the divergence guard") {
  Scenario s = frozen_scenario();
  s.drift = [](double, const double* x, const MeasureStats&, double* out) {
    out[0] = 1e6 * x[0];
  };
  TimeGrid grid = make_period_grid(1.0, 10, 10);
  NoiseBundle noise(1, 1, grid.dt);
  Ensemble ens = make_ensemble(2, 1, 0);
  fill_init(det_init(1.0), ens, noise, 0);
  try {
    simulate(s, grid, ens, noise, {10});
    FAIL("expected a divergence error");
  } catch (const Error& e) {
    CHECK(e.code() == errc::divergence);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
    CHECK(std::string(e.what()).find("particle") != std::string::npos);
  }
}
