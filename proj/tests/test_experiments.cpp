#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"
#include "ensemble.hpp"
#include "experiments.hpp"
#include "ratefit.hpp"
#include "scenario.hpp"

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

} // namespace

TEST_CASE("exponential fit recovers planted rates") {
  std::vector<double> ts, vs;
  for (int k = 0; k <= 6; ++k) {
    ts.push_back(0.5 * k);
    vs.push_back(std::exp(-2.0 * 0.5 * k));
  }
  RateFit f = fit_exponential(ts, vs);
  CHECK(f.rate == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(f.C == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(f.r_squared >= 1.0 - 1e-10);
  CHECK(f.n_points == 7);

  std::vector<double> cs(7, 3.0);
  RateFit fc = fit_exponential(ts, cs);
  CHECK(fc.rate == 0.0);
  CHECK(fc.r_squared == 1.0);

  // Small multiplicative noise moves the slope only slightly.
  SmallRng rng(42);
  std::vector<double> noisy;
  for (int k = 0; k <= 6; ++k) {
    noisy.push_back(std::exp(-ts[k]) * (1.0 + 0.01 * (2.0 * rng.uniform() - 1.0)));
  }
  RateFit fn = fit_exponential(ts, noisy);
  CHECK(std::abs(fn.rate - 1.0) < 0.05);

  vs[3] = 0.0;
  CHECK(thrown_code([&] { (void)fit_exponential(ts, vs); }) == errc::non_positive_value);
  CHECK_THROWS_AS((void)fit_exponential({0.0, 1.0}, {1.0, 0.5}), Error);
}

TEST_CASE("power-law fit and plain least squares") {
  std::vector<double> ns, vs;
  for (double n : {8.0, 16.0, 32.0, 64.0, 128.0}) {
    ns.push_back(n);
    vs.push_back(3.0 / std::sqrt(n));
  }
  RateFit f = fit_power_law(ns, vs);
  CHECK(f.rate == doctest::Approx(-0.5).epsilon(1e-10));
  CHECK(f.C == doctest::Approx(3.0).epsilon(1e-10));

  LinFit lf = linear_fit({0.0, 1.0, 2.0}, {1.0, 3.0, 5.0});
  CHECK(lf.slope == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(lf.intercept == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(lf.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  LinFit cf = linear_fit({0.0, 1.0, 2.0}, {4.0, 4.0, 4.0});
  CHECK(cf.slope == 0.0);
  CHECK(cf.r_squared == 1.0);
}

TEST_CASE("mean-field rate curve") {
  CHECK(phi_rate(0.5, 1, 1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(phi_rate(0.5, 4, 1) == doctest::Approx(std::log(2.0) + 1.0).epsilon(1e-12));
  for (int d : {1, 4, 6}) {
    double prev = phi_rate(0.5, d, 2);
    for (std::int64_t n = 4; n <= 4096; n *= 2) {
      double cur = phi_rate(0.5, d, n);
      CHECK(cur < prev);
      prev = cur;
    }
  }
  CHECK(thrown_code([] { (void)phi_rate(0.0, 1, 8); }) == errc::domain_error);
}

TEST_CASE("block standard error and the exact sign test") {
  CHECK(block_se({1.0, 3.0}) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS((void)block_se({2.0}), Error);

  CHECK(sign_test_p(0, 10) == doctest::Approx(0.001953125).epsilon(1e-12));
  CHECK(sign_test_p(5, 5) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(sign_test_p(1, 9) == doctest::Approx(0.021484375).epsilon(1e-12));
  CHECK(sign_test_p(0, 0) == 1.0);
  CHECK(sign_test_p(3, 7) == sign_test_p(7, 3));
}

TEST_CASE("verdicts degrade to inconclusive on weak fits") {
  CHECK(fit_verdict(true, 0.9) == Verdict::Pass);
  CHECK(fit_verdict(false, 0.9) == Verdict::Fail);
  CHECK(fit_verdict(false, 0.3) == Verdict::Inconclusive);
  CHECK(fit_verdict(true, 0.3) == Verdict::Inconclusive);
}

TEST_CASE("experiment grids must align with the period") {
  Scenario s = make_mv_ou_periodic();
  ExpParams p;
  p.dt = 3e-4; // does not divide tau = 1 into an integer step count
  p.periods = 2;
  CHECK(thrown_code([&] { (void)experiment_grid(s, p, 5.0); }) == errc::grid_not_aligned);
  p.dt = 1e-3;
  TimeGrid g = experiment_grid(s, p, 5.0);
  CHECK(g.period_steps == 1000);
  CHECK(g.n_steps == 2000);
}

TEST_CASE("coefficient variation probe") {
  Scenario s = make_mv_ou_periodic();
  CHECK(coefficients_vary_on(s, 0.0, 0.5));
  MvOuParams flat;
  flat.A = 0.0;
  CHECK_FALSE(coefficients_vary_on(make_mv_ou_periodic(flat), 0.0, 0.5));
}

TEST_CASE("report details are fetched by name") {
  Report r;
  r.details.emplace_back("alpha", 1.5);
  CHECK(report_detail(r, "alpha") == 1.5);
  CHECK(report_has_detail(r, "alpha"));
  CHECK_FALSE(report_has_detail(r, "beta"));
  CHECK(thrown_code([&] { (void)report_detail(r, "beta"); }) == errc::validation_error);
}

TEST_CASE("noise-free pathwise identity is exact") {
  MvOuParams mv;
  mv.sigma0 = 0.0;
  Scenario s = make_mv_ou_periodic(mv);
  ExpParams p;
  p.seed = 42;
  p.dt = 1e-2;
  p.periods = 3;
  p.n_particles = 16;
  Report r = run_pathwise_periodicity(s, p);
  CHECK(r.verdict == Verdict::Pass);
  CHECK(report_detail(r, "max_discrepancy") == 0.0);
  CHECK(report_detail(r, "max_state_norm") > 0.0);
}

TEST_CASE("pathwise shift identity holds with noise on both regimes") {
  for (const char* name : {"mv_ou_periodic", "double_well_partial"}) {
    Scenario s = make_scenario_by_name(name);
    ExpParams p;
    p.seed = 42;
    p.dt = 1e-2;
    p.periods = 2;
    p.n_particles = 24;
    Report r = run_pathwise_periodicity(s, p);
    CHECK(r.verdict == Verdict::Pass);
    CHECK(report_detail(r, "max_discrepancy") == 0.0);
  }
}

TEST_CASE("pullback refuses scenarios without a decay exponent") {
  MvOuParams mv;
  mv.a = 0.5;
  mv.b = 0.5;
  Scenario s = make_mv_ou_periodic(mv);
  ExpParams p;
  p.seed = 42;
  p.dt = 1e-2;
  p.n_particles = 8;
  CHECK(thrown_code([&] { (void)run_pullback(s, p); }) == errc::not_contractive);
}

TEST_CASE("contraction run on identical initial laws reports a zero gap") {
  Scenario s = make_mv_ou_periodic();
  ExpParams p;
  p.seed = 42;
  p.dt = 1e-2;
  p.periods = 2;
  p.n_particles = 16;
  InitSpec init;
  init.kind = InitSpec::Kind::Deterministic;
  init.x0 = {1.0};
  Report r = run_contraction(s, init, init, p);
  CHECK(r.verdict == Verdict::Pass);
  CHECK(report_detail(r, "zero_gap") == 1.0);
}

TEST_CASE("law periodicity validations and floor scaling") {
  Scenario s = make_mv_ou_periodic();
  ExpParams p;
  p.seed = 42;
  p.dt = 1e-2;
  p.periods = 21;
  p.r_replicas = 16;
  CHECK(thrown_code([&] { (void)run_law_periodicity(s, p); }) == errc::validation_error);

  p.dt = 1.0 / 999.0; // odd period step count: half-period comparisons impossible
  p.r_replicas = 64;
  CHECK(thrown_code([&] { (void)run_law_periodicity(s, p); }) == errc::validation_error);

  // The Monte Carlo floor shrinks like 1/sqrt(R).
  p.dt = 2e-2;
  p.r_replicas = 1000;
  Report big = run_law_periodicity(s, p);
  p.r_replicas = 250;
  Report small = run_law_periodicity(s, p);
  double ratio = report_detail(small, "floor") / report_detail(big, "floor");
  CHECK(ratio == doctest::Approx(2.0).epsilon(0.30));
  CHECK(big.verdict == Verdict::Pass);
  CHECK(report_detail(big, "d_match") <= 1.5 * report_detail(big, "floor"));
  CHECK(report_detail(big, "d_mismatch") > 3.0 * report_detail(big, "floor"));
}
