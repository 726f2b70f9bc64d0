#include "acceptance.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "common.hpp"
#include "config.hpp"
#include "coupling.hpp"
#include "detsum.hpp"
#include "ensemble.hpp"
#include "experiments.hpp"
#include "metrics.hpp"
#include "output.hpp"
#include "runner.hpp"
#include "scenario.hpp"
#include "workers.hpp"

namespace mvp {
namespace acceptance {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Ctx {
  std::string out_dir;
  int workers = 1;
};

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  return buf;
}

void write_text(const std::string& dir, const std::string& name, const std::string& content) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  std::ofstream out(dir + "/" + name, std::ios::binary);
  out << content;
}

// Parses and runs one embedded config; artifacts land in out_dir/<label>.
Report run_cfg_report(const Ctx& ctx, const std::string& text, const std::string& label) {
  RunConfig cfg = parse_config_text(text, "acceptance:" + label);
  cfg.workers = ctx.workers;
  Report rep = run_report(cfg);
  if (!ctx.out_dir.empty()) write_run_outputs(rep, cfg, text, ctx.out_dir + "/" + label);
  return rep;
}

double gauss_draw(SmallRng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
}

// --- C1: run-on-shifted-interval equals run-with-shifted-noise --------------

CriterionResult c1_pathwise_shift(const Ctx& ctx) {
  CriterionResult res{1, "pathwise_shift_identity", true, "", 0.0};
  double worst = 0.0;
  for (const auto& name : builtin_scenario_names()) {
    const std::string text = "[scenario]\nname = " + name +
                             "\n[grid]\ndt = 0.001\nperiods = 5\n"
                             "[experiment]\nname = pathwise_periodicity\nseed = 42\nn = 256\n";
    const Report rep = run_cfg_report(ctx, text, "c1_" + name);
    const double disc = report_detail(rep, "max_discrepancy");
    const double tol = report_detail(rep, "tolerance");
    worst = std::max(worst, tol > 0.0 ? disc / tol : 0.0);
    if (rep.verdict != Verdict::Pass) res.passed = false;
  }
  res.detail = "4 scenarios, worst discrepancy/tolerance = " + num(worst);
  return res;
}

// --- C2: ensemble mean against the closed-form periodic mean ----------------

CriterionResult c2_mean_oracle(const Ctx& ctx) {
  CriterionResult res{2, "mv_ou_mean_oracle", true, "", 0.0};
  const Scenario s = make_mv_ou_periodic({});
  const std::int64_t m = 1000;
  const double dt = s.tau / static_cast<double>(m);
  const TimeGrid grid = make_period_grid(s.tau, m, 30 * m);
  const std::int64_t N = 4096;

  NoiseBundle noise(42, s.dim, grid.dt);
  Ensemble ens = make_ensemble(N, s.dim, 0, 0);
  fill_init(InitSpec{}, ens, noise, 0);
  std::vector<std::int64_t> offs;
  for (int j = 0; j < 8; ++j) offs.push_back(29 * m + j * (m / 8));
  SimOptions so;
  so.workers = ctx.workers;
  const std::vector<Ensemble> snaps = simulate(s, grid, ens, noise, offs, so);

  const double omega = 2.0 * kPi / s.tau;
  const double lam = s.ou.a - s.ou.b;
  const double max_m2 = omega * omega * s.ou.A / std::sqrt(lam * lam + omega * omega);

  Series ser;
  ser.name = "mean_vs_oracle";
  ser.columns = {"t", "sim_mean", "oracle_mean", "abs_error", "tolerance"};
  double worst = 0.0;
  for (std::size_t j = 0; j < snaps.size(); ++j) {
    const double t = grid.time_at(offs[j]);
    std::vector<double> v(snaps[j].states.begin(), snaps[j].states.end());
    std::sort(v.begin(), v.end());
    const double mean = pairwise_mean(v.size(), [&](std::size_t i) { return v[i]; });
    const double var = pairwise_mean(v.size(), [&](std::size_t i) {
      const double c = v[i] - mean;
      return c * c;
    });
    const double se = std::sqrt(std::max(var, 0.0) / static_cast<double>(N));
    const double oracle = oracle_periodic_mean(s.ou.a, s.ou.b, s.ou.A, s.tau, t);
    const double tol = 3.0 * se + 5.0 * dt * max_m2;
    const double err = std::abs(mean - oracle);
    worst = std::max(worst, err / tol);
    if (err > tol) res.passed = false;
    ser.rows.push_back({t, mean, oracle, err, tol});
  }
  if (!ctx.out_dir.empty())
    write_text(ctx.out_dir + "/c2_mean_oracle", "mean_vs_oracle.csv", series_to_csv(ser));
  res.detail = "8 phase points, worst |error|/tolerance = " + num(worst);
  return res;
}

// --- C3: synchronous linear contraction is exact ----------------------------

CriterionResult c3_linear_contraction(const Ctx& ctx) {
  CriterionResult res{3, "linear_contraction_exact", true, "", 0.0};
  const std::string text =
      "[scenario]\nname = mv_ou_periodic\n"
      "[grid]\ndt = 0.001\nperiods = 10\n"
      "[experiment]\nname = contraction\nseed = 42\nn = 512\n"
      "init = deterministic\ninit_x0 = 1\ninit_b = deterministic\ninit_b_x0 = -1\n";
  const Report rep = run_cfg_report(ctx, text, "c3_linear_contraction");

  const double a = 1.0, b = 0.25, dt = 1e-3;
  const double expect = (1.0 + (b - a) * dt) * (1.0 + (b - a) * dt);
  const double dev = std::max(std::abs(report_detail(rep, "step_ratio_min") - expect),
                              std::abs(report_detail(rep, "step_ratio_max") - expect));
  const double rate = report_detail(rep, "rate");
  const bool ratio_ok = dev <= 1e-12;
  const bool rate_ok = std::abs(rate - 1.5) <= 0.25 * 1.5;
  res.passed = ratio_ok && rate_ok && rep.verdict == Verdict::Pass;
  res.detail = "step-ratio deviation = " + num(dev) + " (cap 1e-12), rate = " + num(rate) +
               " (target 1.5 +-25%)";
  return res;
}

// --- C4: pull-back gaps shrink with look-back horizon -----------------------

CriterionResult c4_pullback(const Ctx& ctx) {
  CriterionResult res{4, "pullback_convergence", true, "", 0.0};
  std::string detail;
  for (const std::string name : {"piecewise_k1", "mv_ou_periodic"}) {
    const std::string text = "[scenario]\nname = " + name +
                             "\n[grid]\ndt = 0.001\n"
                             "[experiment]\nname = pullback\nseed = 42\nn = 512\n";
    const Report rep = run_cfg_report(ctx, text, "c4_" + name);
    if (rep.verdict != Verdict::Pass) res.passed = false;
    if (!detail.empty()) detail += "; ";
    detail += name + ": rate = " + num(report_detail(rep, "rate")) +
              ", r2 = " + num(report_detail(rep, "r_squared")) +
              ", monotone = " + num(report_detail(rep, "monotone"));
  }
  res.detail = detail;
  return res;
}

// --- C5: mean-field error decays like 1/sqrt(N), uniformly in time ----------

CriterionResult c5_poc_full(const Ctx& ctx) {
  CriterionResult res{5, "poc_full_dissipative", true, "", 0.0};
  // Start from the periodic law itself (mean m*(0), stationary sd). The
  // tagged copies are driven by the periodic mean, so any other init law
  // adds a deterministic relaxation transient on top of the chaos error.
  const double m0 = oracle_periodic_mean(1.0, 0.25, 1.0, 1.0, 0.0);
  const double sd0 = 0.2 / std::sqrt(2.0);
  char init_line[96];
  std::snprintf(init_line, sizeof init_line,
                "init = gaussian\ninit_mean = %.17g\ninit_sd = %.17g\n", m0, sd0);
  const std::string text =
      "[scenario]\nname = mv_ou_periodic\n"
      "[grid]\ndt = 0.001\nperiods = 50\n"
      "[experiment]\nname = poc\nseed = 42\n" +
      std::string(init_line);
  const Report rep = run_cfg_report(ctx, text, "c5_poc_mv_ou");

  const double slope = report_detail(rep, "slope");
  bool growth_ok = true;
  for (const char* tag : {"8", "32", "128", "512"})
    growth_ok = growth_ok && report_detail(rep, std::string("first_last_ok_n") + tag) == 1.0;
  res.passed = slope <= -0.45 && growth_ok && rep.verdict == Verdict::Pass;
  res.detail = "log-log slope = " + num(slope) + " (cap -0.45), late-vs-early error ok = " +
               (growth_ok ? "yes" : "no");
  return res;
}

// --- C6: reflection-coupled decay beats half the certified rate -------------

CriterionResult c6_partial_contraction(const Ctx& ctx) {
  CriterionResult res{6, "partial_ergodicity", true, "", 0.0};
  const std::string text =
      "[scenario]\nname = double_well_partial\n"
      "[grid]\ndt = 0.0002\nperiods = 20\n"
      "[experiment]\nname = contraction\nseed = 42\nn = 256\n"
      "init = deterministic\ninit_x0 = 1\ninit_b = deterministic\ninit_b_x0 = -1\n";
  const Report rep = run_cfg_report(ctx, text, "c6_double_well");

  const double rate = report_detail(rep, "rate");
  const double floor = report_detail(rep, "rate_floor");
  const bool marg_ok = report_detail(rep, "marginal_ok") == 1.0;
  res.passed = rate >= floor && marg_ok && rep.verdict == Verdict::Pass;
  res.detail = "w1 rate = " + num(rate) + " (floor " + num(floor) + "), marginal w1 = " +
               num(report_detail(rep, "marginal_w1")) + " vs 3x floor " +
               num(3.0 * report_detail(rep, "marginal_floor"));
  return res;
}

// --- C7: the law repeats after a period but not after half a period ---------

CriterionResult c7_law_periodicity(const Ctx& ctx) {
  CriterionResult res{7, "law_periodicity", true, "", 0.0};
  const std::string text =
      "[scenario]\nname = mv_ou_periodic\n"
      "[grid]\ndt = 0.001\nperiods = 21\n"
      "[experiment]\nname = law_periodicity\nseed = 42\nr = 2000\n";
  const Report rep = run_cfg_report(ctx, text, "c7_law_mv_ou");

  const double d_match = report_detail(rep, "d_match");
  const double d_mis = report_detail(rep, "d_mismatch");
  const double floor = report_detail(rep, "floor");
  res.passed = d_match <= 1.5 * floor && d_mis > 3.0 * floor && rep.verdict == Verdict::Pass;
  res.detail = "match = " + num(d_match) + " (cap 1.5x floor " + num(1.5 * floor) +
               "), mismatch = " + num(d_mis) + " (floor x3 = " + num(3.0 * floor) + ")";
  return res;
}

// --- C8: split-form mean-field error fits the two-term template -------------

CriterionResult c8_poc_partial(const Ctx& ctx) {
  CriterionResult res{8, "poc_partial_template", true, "", 0.0};
  const std::string text =
      "[scenario]\nname = double_well_partial\n"
      "[grid]\ndt = 0.008\nperiods = 15\n"
      "[experiment]\nname = poc\nseed = 42\nm_ref = 2048\n";
  const Report rep = run_cfg_report(ctx, text, "c8_poc_double_well");

  double min_p = 1.0;
  for (const char* tag : {"16", "64", "256"})
    min_p = std::min(min_p, report_detail(rep, std::string("sign_p_n") + tag));
  const bool template_ok = report_detail(rep, "template_ok") == 1.0;
  res.passed = min_p > 0.01 && template_ok;
  res.detail = "min sign-test p = " + num(min_p) + " (need > 0.01), template ok = " +
               (template_ok ? "yes" : "no") + ", verdict = " + verdict_name(rep.verdict);
  return res;
}

// --- C9: sub-second structural property checks ------------------------------

CriterionResult c9_properties(const Ctx&) {
  CriterionResult res{9, "property_suites", true, "", 0.0};
  std::string why;
  auto check = [&](bool ok, const std::string& msg) {
    if (!ok && res.passed) {
      res.passed = false;
      why = msg;
    }
  };

  // Cutoff profile: flat tails, half-way midpoint, flat derivative at knots.
  for (const double eps : {0.5, 1.0, 2.0}) {
    check(cutoff_phi(eps, 0.0) == 0.0, "cutoff not 0 at r = 0");
    check(cutoff_phi(eps, 5.0 * eps / 8.0) == 0.0, "cutoff not 0 at inner knot");
    check(cutoff_phi(eps, 7.0 * eps / 8.0) == 1.0, "cutoff not 1 at outer knot");
    check(cutoff_phi(eps, 10.0 * eps) == 1.0, "cutoff not 1 far out");
    check(std::abs(cutoff_phi(eps, 3.0 * eps / 4.0) - 0.5) <= 1e-12, "cutoff midpoint not 1/2");
    const double h = 1e-9 * eps;
    for (const double knot : {5.0 * eps / 8.0, 7.0 * eps / 8.0}) {
      const double fd = (cutoff_phi(eps, knot + h) - cutoff_phi(eps, knot - h)) / (2.0 * h);
      check(std::abs(fd) <= 1e-6, "cutoff derivative at knot exceeds 1e-6");
    }
  }

  // Reflection matrices: orthogonal, reverse z, determinant -1.
  SmallRng rng(derive_seed(42, 0xACC9));
  for (int it = 0; it < 10000 && res.passed; ++it) {
    const int d = 1 + it % 3;
    std::vector<double> z(d);
    double zn = 0.0;
    for (int c = 0; c < d; ++c) {
      z[c] = 2.0 * rng.uniform() - 1.0;
      zn += z[c] * z[c];
    }
    if (zn < 1e-12) continue;
    zn = std::sqrt(zn);
    const std::vector<double> P = reflection_matrix(z, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        double dot = 0.0;
        for (int c = 0; c < d; ++c) dot += P[i * d + c] * P[j * d + c];
        check(std::abs(dot - (i == j ? 1.0 : 0.0)) <= 1e-12, "reflection not orthogonal");
      }
    for (int i = 0; i < d; ++i) {
      double pz = 0.0;
      for (int c = 0; c < d; ++c) pz += P[i * d + c] * z[c];
      check(std::abs(pz + z[i]) <= 1e-12 * (1.0 + zn), "reflection does not reverse z");
    }
    double det = 0.0;
    if (d == 1) det = P[0];
    else if (d == 2) det = P[0] * P[3] - P[1] * P[2];
    else
      det = P[0] * (P[4] * P[8] - P[5] * P[7]) - P[1] * (P[3] * P[8] - P[5] * P[6]) +
            P[2] * (P[3] * P[7] - P[4] * P[6]);
    check(std::abs(det + 1.0) <= 1e-12, "reflection determinant not -1");
  }

  // Transport bound: squared W2 never exceeds the paired mean-square gap.
  for (int it = 0; it < 1000 && res.passed; ++it) {
    const int d = 1 + it % 3;
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.next_u64() % 63);
    std::vector<double> x(n * d), y(n * d);
    for (auto& v : x) v = gauss_draw(rng);
    for (auto& v : y) v = 0.5 * gauss_draw(rng) + 0.3;
    check(coupling_bound_check(x, y, n, d), "paired transport bound violated");
  }

  // One-dimensional optimal transport = sorted matching.
  for (int it = 0; it < 200 && res.passed; ++it) {
    const std::int64_t n = 2 + static_cast<std::int64_t>(rng.next_u64() % 63);
    std::vector<double> x(n), y(n);
    for (auto& v : x) v = gauss_draw(rng);
    for (auto& v : y) v = gauss_draw(rng) - 0.5;
    for (const int order : {1, 2}) {
      const double ws = wasserstein_1d(x, y, order);
      const double wa = wasserstein_assignment(x, y, n, 1, order);
      check(std::abs(ws - wa) <= 1e-12 * (1.0 + ws), "sorted and assignment W disagree in 1-d");
    }
  }

  // Metric axioms on small ensembles.
  for (int it = 0; it < 300 && res.passed; ++it) {
    const int d = 1 + it % 3;
    const std::int64_t n = 1 + static_cast<std::int64_t>(rng.next_u64() % 8);
    std::vector<double> x(n * d), y(n * d), w(n * d);
    for (auto& v : x) v = gauss_draw(rng);
    for (auto& v : y) v = gauss_draw(rng) + 1.0;
    for (auto& v : w) v = 2.0 * gauss_draw(rng);
    for (const int order : {1, 2}) {
      const double wxy = wasserstein_assignment(x, y, n, d, order);
      const double wyx = wasserstein_assignment(y, x, n, d, order);
      const double wxx = wasserstein_assignment(x, x, n, d, order);
      const double wxw = wasserstein_assignment(x, w, n, d, order);
      const double wyw = wasserstein_assignment(y, w, n, d, order);
      check(std::abs(wxy - wyx) <= 1e-12 * (1.0 + wxy), "W not symmetric");
      check(wxx <= 1e-12, "W(x, x) not zero");
      check(wxw <= wxy + wyw + 1e-9 * (1.0 + wxw), "triangle inequality violated");
    }
  }

  res.detail = res.passed
                   ? "cutoff, reflection, transport bound, 1-d transport, metric axioms"
                   : why;
  return res;
}

// --- C10: numeric output independent of the worker pool size ----------------

CriterionResult c10_determinism(const Ctx& ctx) {
  CriterionResult res{10, "worker_determinism", true, "", 0.0};

  auto det_init = [](double v) {
    InitSpec i;
    i.kind = InitSpec::Kind::Deterministic;
    i.x0 = {v};
    return i;
  };

  // Reduced-scale pass over every experiment type and both coefficient
  // regimes; worker count is forced per run and excluded from fingerprints.
  auto suite = [&](int w) {
    std::vector<std::pair<std::string, Report>> out;
    ExpParams base;
    base.seed = 42;
    base.workers = w;
    {
      ExpParams q = base;
      q.n_particles = 64;
      q.periods = 3;
      q.dt = 1e-3;
      out.emplace_back("pathwise_mv_ou", run_pathwise_periodicity(make_mv_ou_periodic({}), q));
    }
    {
      ExpParams q = base;
      q.n_particles = 48;
      q.periods = 2;
      q.dt = 2e-3;
      out.emplace_back("pathwise_trunc_ou", run_pathwise_periodicity(make_truncated_ou({}), q));
    }
    {
      ExpParams q = base;
      q.n_particles = 32;
      q.periods = 4;
      q.dt = 2e-3;
      out.emplace_back("contraction_double_well",
                       run_contraction(make_double_well_partial({}), det_init(1.0),
                                       det_init(-1.0), q));
    }
    {
      ExpParams q = base;
      q.n_particles = 64;
      q.horizons = {1, 2, 4};
      q.dt = 1e-3;
      out.emplace_back("pullback_mv_ou", run_pullback(make_mv_ou_periodic({}), q));
    }
    {
      ExpParams q = base;
      q.n_list = {8, 16, 32};
      q.periods = 15;
      q.dt = 1e-3;
      out.emplace_back("poc_mv_ou", run_poc(make_mv_ou_periodic({}), q));
    }
    {
      ExpParams q = base;
      q.n_list = {8, 16, 32};
      q.periods = 15;
      q.dt = 1e-2;
      q.m_ref = 1024;
      out.emplace_back("poc_double_well", run_poc(make_double_well_partial({}), q));
    }
    {
      ExpParams q = base;
      q.r_replicas = 256;
      q.periods = 21;
      q.dt = 2e-3;
      out.emplace_back("law_mv_ou", run_law_periodicity(make_mv_ou_periodic({}), q));
    }
    {
      ExpParams q = base;
      q.r_replicas = 128;
      q.periods = 21;
      q.dt = 4e-3;
      out.emplace_back("law_double_well", run_law_periodicity(make_double_well_partial({}), q));
    }
    return out;
  };

  auto fingerprint = [&](const std::vector<std::pair<std::string, Report>>& runs) {
    std::string all;
    for (const auto& lr : runs) all += lr.first + "\n" + report_numerics_fingerprint(lr.second);
    return all;
  };

  const auto runs1 = suite(1);
  const auto runs8 = suite(8);
  const std::string f1 = fingerprint(runs1);
  const std::string f8 = fingerprint(runs8);
  res.passed = f1 == f8;
  if (!ctx.out_dir.empty()) {
    write_text(ctx.out_dir + "/c10_determinism", "fingerprint_w1.txt", f1);
    write_text(ctx.out_dir + "/c10_determinism", "fingerprint_w8.txt", f8);
  }
  if (res.passed) {
    res.detail = std::to_string(runs1.size()) + " runs, fingerprints byte-identical (" +
                 std::to_string(f1.size()) + " bytes) for 1 vs 8 workers";
  } else {
    std::size_t pos = 0;
    while (pos < f1.size() && pos < f8.size() && f1[pos] == f8[pos]) ++pos;
    res.detail = "fingerprints diverge at byte " + std::to_string(pos);
  }
  return res;
}

using CriterionFn = CriterionResult (*)(const Ctx&);

struct Entry {
  const char* name;
  CriterionFn fn;
};

const Entry kCriteria[] = {
    {"pathwise_shift_identity", c1_pathwise_shift},
    {"mv_ou_mean_oracle", c2_mean_oracle},
    {"linear_contraction_exact", c3_linear_contraction},
    {"pullback_convergence", c4_pullback},
    {"poc_full_dissipative", c5_poc_full},
    {"partial_ergodicity", c6_partial_contraction},
    {"law_periodicity", c7_law_periodicity},
    {"poc_partial_template", c8_poc_partial},
    {"property_suites", c9_properties},
    {"worker_determinism", c10_determinism},
};

} // namespace

int criterion_count() { return static_cast<int>(std::size(kCriteria)); }

const char* criterion_name(int index) {
  if (index < 1 || index > criterion_count()) return nullptr;
  return kCriteria[index - 1].name;
}

CriterionResult run_criterion(int index, const std::string& out_dir, int workers) {
  CriterionResult res;
  res.index = index;
  if (index < 1 || index > criterion_count()) {
    res.name = "unknown";
    res.detail = "criterion index out of range";
    return res;
  }
  Ctx ctx{out_dir, resolve_worker_count(workers)};
  Timer timer;
  res.name = kCriteria[index - 1].name;
  try {
    res = kCriteria[index - 1].fn(ctx);
  } catch (const std::exception& e) {
    res.passed = false;
    res.detail = std::string("error: ") + e.what();
  }
  res.index = index;
  res.name = kCriteria[index - 1].name;
  res.runtime_s = timer.elapsed();
  return res;
}

std::vector<CriterionResult> run_all(const std::string& out_dir, int workers) {
  std::vector<CriterionResult> results;
  int n_passed = 0;
  for (int i = 1; i <= criterion_count(); ++i) {
    const CriterionResult r = run_criterion(i, out_dir, workers);
    std::printf("C%-2d %-4s %-26s (%.1fs) %s\n", r.index, r.passed ? "PASS" : "FAIL",
                r.name.c_str(), r.runtime_s, r.detail.c_str());
    std::fflush(stdout);
    if (r.passed) ++n_passed;
    results.push_back(r);
  }
  std::printf("acceptance: %d/%d criteria passed\n", n_passed, criterion_count());
  if (!out_dir.empty()) {
    nlohmann::ordered_json j;
    j["passed"] = n_passed;
    j["total"] = criterion_count();
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : results)
      arr.push_back({{"index", r.index},
                     {"name", r.name},
                     {"passed", r.passed},
                     {"detail", r.detail},
                     {"runtime_s", r.runtime_s}});
    j["criteria"] = arr;
    write_text(out_dir, "acceptance.json", j.dump(2) + "\n");
  }
  return results;
}

} // namespace acceptance
} // namespace mvp
