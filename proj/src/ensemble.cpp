#include "ensemble.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "detsum.hpp"
#include "workers.hpp"

namespace mvp {

namespace {

double sq_norm_row(const double* x, int d) {
  double s = 0;
  for (int c = 0; c < d; ++c) s += x[c] * x[c];
  return s;
}

void check_finite(const std::vector<double>& states, std::int64_t n, int d, std::int64_t step) {
  for (std::int64_t i = 0; i < n; ++i)
    for (int c = 0; c < d; ++c)
      if (!std::isfinite(states[i * d + c]))
        fail(errc::divergence, "non-finite state at step " + std::to_string(step) +
                                   ", particle " + std::to_string(i));
}

} // namespace

Ensemble make_ensemble(std::int64_t n, int d, std::int64_t time_index, std::uint64_t driver_base) {
  require(n >= 1, errc::empty_ensemble, "ensemble needs at least one particle");
  require(d >= 1 && d <= kMaxDim, errc::dimension_error, "ensemble dimension out of range");
  Ensemble e;
  e.n = n;
  e.d = d;
  e.states.assign(static_cast<std::size_t>(n) * d, 0.0);
  e.time_index = time_index;
  e.driver_ids.resize(n);
  for (std::int64_t i = 0; i < n; ++i) e.driver_ids[i] = driver_base + static_cast<std::uint64_t>(i);
  return e;
}

MeasureStats stats_of(const Ensemble& ens) {
  MeasureStats st = compute_stats(ens.states.data(), ens.n, ens.d);
  st.samples = ens.states.data();
  st.n_samples = ens.n;
  st.sample_dim = ens.d;
  return st;
}

void fill_init(const InitSpec& init, Ensemble& ens, const NoiseBundle& noise, std::int64_t epoch) {
  if (init.kind == InitSpec::Kind::Deterministic) {
    require(static_cast<int>(init.x0.size()) == ens.d, errc::dimension_error,
            "deterministic init needs one d-vector");
    for (std::int64_t i = 0; i < ens.n; ++i)
      for (int c = 0; c < ens.d; ++c) ens.states[i * ens.d + c] = init.x0[c];
    return;
  }
  require(init.sd >= 0.0, errc::domain_error, "init sd must be >= 0");
  for (std::int64_t i = 0; i < ens.n; ++i)
    noise.init_draw(ens.driver_ids[i], epoch, ens.d, init.mean, init.sd, &ens.states[i * ens.d]);
}

void em_step(const Scenario& s, const TimeGrid& grid, Ensemble& ens, const NoiseBundle& noise,
             const StepOptions& opts) {
  const std::int64_t n = ens.n;
  const int d = ens.d;
  require(n >= 1, errc::empty_ensemble, "em_step on empty ensemble");
  require(d == s.dim, errc::dimension_error, "ensemble/scenario dimension mismatch");
  require(noise.d() == d, errc::dimension_error, "noise bundle dimension mismatch");
  const double t = grid.phase_time(ens.time_index);
  const double dt = grid.dt;
  const std::int64_t k = ens.time_index;
  const double guard = opts.guard_override > 0 ? opts.guard_override : s.divergence_guard;

  std::vector<double> scratch_local;
  std::vector<double>& out = opts.scratch ? *opts.scratch : scratch_local;
  out.resize(static_cast<std::size_t>(n) * d);

  if (s.regime == Regime::FullyDissipative) {
    MeasureStats local;
    std::vector<double> sorted;
    const MeasureStats* stats = opts.external_stats;
    if (!stats) {
      const Ensemble& src = opts.external_measure ? *opts.external_measure : ens;
      sorted.assign(src.states.begin(), src.states.end());
      sort_sample_rows(sorted, src.n, d);
      local = compute_stats(sorted.data(), src.n, d, true);
      local.samples = sorted.data();
      local.n_samples = src.n;
      local.sample_dim = d;
      stats = &local;
    }
    if (s.stats_req == StatsRequirement::MeanOnly)
      require(static_cast<int>(stats->mean.size()) >= d, errc::missing_stats,
              "step needs the measure mean");
    if (s.stats_req == StatsRequirement::Pairwise)
      require(stats->samples != nullptr, errc::missing_stats, "step needs sample access");
    parallel_for(static_cast<std::size_t>(n), opts.workers, [&](std::size_t i) {
      double b[kMaxDim], sg[kMaxDim], dw[kMaxDim];
      const double* x = &ens.states[i * d];
      s.drift(t, x, *stats, b);
      s.sigma_diag(t, x, *stats, sg);
      noise.increment(Driver::W, ens.driver_ids[i], k, dw);
      for (int c = 0; c < d; ++c) out[i * d + c] = x[c] + dt * b[c] + sg[c] * dw[c];
    });
  } else {
    const bool has_pair = s.pair_kernel != PairKernel::None;
    std::vector<double> conv, sorted;
    if (has_pair) {
      std::int64_t src_n = 0;
      if (opts.external_stats) {
        require(opts.external_stats->samples != nullptr, errc::missing_stats,
                "pairwise kernel needs sample access");
        src_n = opts.external_stats->n_samples;
        sorted.assign(opts.external_stats->samples, opts.external_stats->samples + src_n * d);
      } else {
        const Ensemble& src = opts.external_measure ? *opts.external_measure : ens;
        src_n = src.n;
        sorted.assign(src.states.begin(), src.states.end());
      }
      sort_sample_rows(sorted, src_n, d);
      conv.resize(static_cast<std::size_t>(n) * d);
      convolve_btilde_all(s, t, ens.states.data(), n, sorted.data(), src_n, d, opts.workers,
                          conv.data());
    }
    const double sqrt_alpha = std::sqrt(s.alpha(t));
    const bool has_sig = static_cast<bool>(s.sigma_hat_diag);
    parallel_for(static_cast<std::size_t>(n), opts.workers, [&](std::size_t i) {
      double b[kMaxDim], sg[kMaxDim], db[kMaxDim], dw[kMaxDim];
      const double* x = &ens.states[i * d];
      s.bhat(t, x, b);
      noise.increment(Driver::B, ens.driver_ids[i], k, db);
      if (has_sig) {
        s.sigma_hat_diag(t, x, sg);
        noise.increment(Driver::W, ens.driver_ids[i], k, dw);
      }
      for (int c = 0; c < d; ++c) {
        double v = x[c] + dt * (b[c] + (has_pair ? conv[i * d + c] : 0.0)) + sqrt_alpha * db[c];
        if (has_sig) v += sg[c] * dw[c];
        out[i * d + c] = v;
      }
    });
  }

  for (std::int64_t i = 0; i < n; ++i) {
    double r2 = 0;
    bool bad = false;
    for (int c = 0; c < d; ++c) {
      double v = out[i * d + c];
      if (!std::isfinite(v)) {
        bad = true;
        break;
      }
      r2 += v * v;
    }
    if (bad || r2 > guard * guard)
      fail(errc::divergence, "divergence at step " + std::to_string(k) + ", particle " +
                                 std::to_string(i));
  }

  ens.states.swap(out);
  ++ens.time_index;
}

std::vector<Ensemble> simulate(const Scenario& s, const TimeGrid& grid, Ensemble ens,
                               const NoiseBundle& noise,
                               const std::vector<std::int64_t>& snapshot_offsets,
                               const SimOptions& opts) {
  for (std::size_t j = 0; j < snapshot_offsets.size(); ++j) {
    require(snapshot_offsets[j] >= 0 && snapshot_offsets[j] <= grid.n_steps,
            errc::validation_error, "snapshot offset outside the run");
    if (j > 0)
      require(snapshot_offsets[j] > snapshot_offsets[j - 1], errc::validation_error,
              "snapshot offsets must be increasing");
  }
  check_finite(ens.states, ens.n, ens.d, ens.time_index);
  std::vector<Ensemble> snaps;
  snaps.reserve(snapshot_offsets.size());
  std::vector<double> scratch;
  StepOptions so;
  so.workers = opts.workers;
  so.guard_override = opts.guard_override;
  so.scratch = &scratch;
  MeasureStats provided;
  std::size_t next = 0;
  for (std::int64_t step = 0; step <= grid.n_steps; ++step) {
    if (next < snapshot_offsets.size() && snapshot_offsets[next] == step) {
      snaps.push_back(ens);
      ++next;
    }
    if (step == grid.n_steps) break;
    if (opts.stats_provider) {
      provided = opts.stats_provider(ens.time_index);
      so.external_stats = &provided;
    }
    em_step(s, grid, ens, noise, so);
  }
  return snaps;
}

PullbackRun pullback_run(const Scenario& s, const TimeGrid& grid, std::int64_t t_target_step,
                         const std::vector<int>& k_list, const InitSpec& init, std::int64_t N,
                         const NoiseBundle& noise, int workers) {
  require(!k_list.empty(), errc::validation_error, "empty horizon list");
  for (std::size_t j = 1; j < k_list.size(); ++j)
    require(k_list[j] >= k_list[j - 1], errc::validation_error, "horizons must be increasing");
  require(k_list.front() >= 1, errc::validation_error, "horizons must be >= 1 period");
  PullbackRun pr;
  pr.t_target_step = t_target_step;
  pr.horizons = k_list;
  for (int kk : k_list) {
    std::int64_t steps = static_cast<std::int64_t>(kk) * grid.period_steps;
    Ensemble e = make_ensemble(N, s.dim, t_target_step - steps);
    fill_init(init, e, noise, kk);
    TimeGrid run(grid.t0, grid.dt, steps, grid.period_steps);
    SimOptions so;
    so.workers = workers;
    auto snaps = simulate(s, run, std::move(e), noise, {steps}, so);
    pr.endpoints.push_back(std::move(snaps.front()));
  }
  for (std::size_t j = 0; j + 1 < pr.endpoints.size(); ++j) {
    const Ensemble& a = pr.endpoints[j];
    const Ensemble& b = pr.endpoints[j + 1];
    double g = pairwise_sum(std::int64_t{0}, N, [&](std::int64_t i) {
                 double acc = 0;
                 for (int c = 0; c < s.dim; ++c) {
                   double z = b.states[i * s.dim + c] - a.states[i * s.dim + c];
                   acc += z * z;
                 }
                 return acc;
               }) /
               static_cast<double>(N);
    pr.gaps.push_back(g);
  }
  return pr;
}

MeasureStats closed_form_ou_stats(const Scenario& s, double t) {
  require(s.has_ou_oracle, errc::validation_error, "scenario has no closed-form law");
  double m = oracle_periodic_mean(s.ou.a, s.ou.b, s.ou.A, s.tau, t);
  double v = s.ou.sigma0 * s.ou.sigma0 / (2.0 * s.ou.a);
  MeasureStats st;
  st.mean.assign(s.dim, m);
  st.second_moment = s.dim * (m * m + v);
  if (s.dim == 1 && v > 0) {
    double sd = std::sqrt(v);
    st.abs_moment = sd * std::sqrt(2.0 / std::numbers::pi) * std::exp(-m * m / (2.0 * v)) +
                    m * std::erf(m / (sd * std::numbers::sqrt2));
  } else {
    st.abs_moment = std::sqrt(st.second_moment); // crude; mean-only scenarios ignore it
    if (s.dim == 1) st.abs_moment = std::fabs(m);
  }
  return st;
}

ReferenceLaw reference_law(const Scenario& s, const TimeGrid& grid, std::int64_t M,
                           const InitSpec& init, const NoiseBundle& noise,
                           const std::vector<std::int64_t>& snapshot_offsets, int workers) {
  ReferenceLaw rl;
  if (s.has_ou_oracle) {
    rl.closed_form = true;
    Scenario sc = s;
    TimeGrid g = grid;
    rl.stats_at = [sc, g](std::int64_t kk) { return closed_form_ou_stats(sc, g.phase_time(kk)); };
    return rl;
  }
  require(M >= 1024, errc::validation_error,
          "sampled reference law needs M >= 1024");
  // Distinct driver block so reference noise is independent of tagged slots.
  Ensemble e = make_ensemble(M, s.dim, 0, std::uint64_t{1} << 40);
  fill_init(init, e, noise, 0);
  SimOptions so;
  so.workers = workers;
  rl.snapshots = simulate(s, grid, std::move(e), noise, snapshot_offsets, so);
  return rl;
}

} // namespace mvp
