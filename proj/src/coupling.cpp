#include "coupling.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "detsum.hpp"
#include "workers.hpp"

namespace mvp {

double cutoff_phi(double eps, double r) {
  require(eps > 0.0, errc::domain_error, "cutoff_phi: eps must be positive");
  require(r >= 0.0, errc::domain_error, "cutoff_phi: negative radius");
  const double lo = 0.625 * eps;  // 5 eps / 8
  const double hi = 0.875 * eps;  // 7 eps / 8
  if (r <= lo) return 0.0;
  if (r >= hi) return 1.0;
  const double h = r - hi; // in (-eps/4, 0)
  const double v = 1.0 - 384.0 / (eps * eps * eps) * (h / 3.0 + eps / 8.0) * h * h;
  return std::min(1.0, std::max(0.0, v));
}

std::vector<double> reflection_matrix(const std::vector<double>& z, int d) {
  require(d >= 1, errc::dimension_error, "reflection_matrix: bad dimension");
  require(static_cast<int>(z.size()) == d, errc::size_mismatch,
          "reflection_matrix: vector length != d");
  std::vector<double> m(static_cast<std::size_t>(d) * d, 0.0);
  double r2 = 0.0;
  for (int c = 0; c < d; ++c) r2 += z[c] * z[c];
  for (int c = 0; c < d; ++c) m[static_cast<std::size_t>(c) * d + c] = 1.0;
  if (r2 == 0.0) return m;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      m[static_cast<std::size_t>(i) * d + j] -= 2.0 * z[i] * z[j] / r2;
  return m;
}

double concave_distance(double c1, double c2, double r) {
  require(r >= 0.0, errc::domain_error, "concave_distance: negative radius");
  require(c1 > 0.0, errc::domain_error, "concave_distance: c1 must be positive");
  require(c2 >= 0.0, errc::domain_error, "concave_distance: c2 must be nonnegative");
  if (c2 == 0.0) return c1 * r + r;
  return c1 * r - std::expm1(-c2 * r) / c2;
}

CoupledPair make_coupled_pair(std::int64_t n, int d, std::int64_t time_index,
                              std::uint64_t driver_base) {
  CoupledPair p;
  p.a = make_ensemble(n, d, time_index, driver_base);
  p.b = make_ensemble(n, d, time_index, driver_base);
  return p;
}

double default_coupling_eps(const Scenario& s) {
  return s.l0 > 0.0 ? 0.01 * s.l0 : 0.01;
}

namespace {

// Sorted copy of the measure source rows feeding the pair-interaction drift
// of one marginal, resolved from the config the same way em_step does it.
void resolve_conv(const Scenario& s, double t, const Ensemble& self,
                  const MeasureStats* stats, const Ensemble* measure,
                  int workers, std::vector<double>& src, std::vector<double>& conv) {
  const double* rows = nullptr;
  std::int64_t n_rows = 0;
  if (stats) {
    require(stats->samples != nullptr, errc::missing_stats,
            "coupled_step: pair kernel needs a sample view");
    require(stats->sample_dim == self.d, errc::dimension_error,
            "coupled_step: sample dimension mismatch");
    rows = stats->samples;
    n_rows = stats->n_samples;
  } else if (measure) {
    require(measure->d == self.d, errc::dimension_error,
            "coupled_step: measure ensemble dimension mismatch");
    rows = measure->states.data();
    n_rows = measure->n;
  } else {
    rows = self.states.data();
    n_rows = self.n;
  }
  src.assign(rows, rows + n_rows * self.d);
  sort_sample_rows(src, n_rows, self.d);
  conv.resize(static_cast<std::size_t>(self.n) * self.d);
  convolve_btilde_all(s, t, self.states.data(), self.n, src.data(), n_rows,
                      self.d, workers, conv.data());
}

} // namespace

void coupled_step(const Scenario& s, const TimeGrid& grid, CoupledPair& pair,
                  const NoiseBundle& noise, const CouplingConfig& cfg) {
  require(s.regime == Regime::PartiallyDissipative, errc::wrong_regime,
          "coupled_step: scenario is not in split form");
  require(s.bhat != nullptr, errc::validation_error, "coupled_step: scenario has no bhat");
  Ensemble& ea = pair.a;
  Ensemble& eb = pair.b;
  const std::int64_t n = ea.n;
  const int d = ea.d;
  require(eb.n == n, errc::size_mismatch, "coupled_step: marginal sizes differ");
  require(eb.d == d, errc::dimension_error, "coupled_step: marginal dimensions differ");
  require(d == s.dim, errc::dimension_error, "coupled_step: scenario dimension mismatch");
  require(noise.d() == d, errc::dimension_error, "coupled_step: noise bundle dimension mismatch");
  require(ea.time_index == eb.time_index, errc::validation_error,
          "coupled_step: marginals are out of sync");
  require(d <= kMaxDim, errc::dimension_error, "coupled_step: dimension above kMaxDim");

  const std::int64_t k = ea.time_index;
  const double t = grid.phase_time(k);
  const double dt = grid.dt;
  const double eps = cfg.eps > 0.0 ? cfg.eps : default_coupling_eps(s);
  double al = s.alpha ? s.alpha(t) : 0.0;
  require(al >= 0.0, errc::non_positive_value, "coupled_step: alpha(t) < 0");
  const double sqrt_alpha = std::sqrt(al);
  const bool has_sig = static_cast<bool>(s.sigma_hat_diag);

  std::vector<double> conv_a, conv_b, src_a, src_b;
  const bool has_pair = static_cast<bool>(s.btilde);
  if (has_pair) {
    resolve_conv(s, t, ea, cfg.stats_a, cfg.measure_a, cfg.workers, src_a, conv_a);
    resolve_conv(s, t, eb, cfg.stats_b, cfg.measure_b, cfg.workers, src_b, conv_b);
  }

  std::vector<double> out_a(ea.states.size()), out_b(eb.states.size());
  parallel_for(n, cfg.workers, [&](std::int64_t i) {
    const double* xa = ea.states.data() + i * d;
    const double* xb = eb.states.data() + i * d;
    double z[kMaxDim], ba[kMaxDim], bb[kMaxDim];
    double dbs[kMaxDim], dbh[kMaxDim], dw[kMaxDim], refl[kMaxDim];
    double sga[kMaxDim], sgb[kMaxDim];
    double r2 = 0.0;
    for (int c = 0; c < d; ++c) {
      z[c] = xa[c] - xb[c];
      r2 += z[c] * z[c];
    }
    const double r = std::sqrt(r2);
    const double phi = cfg.synchronous_only ? 0.0 : cutoff_phi(eps, r);
    const double sp = std::sqrt(phi);
    const double sq = std::sqrt(1.0 - phi);

    const std::uint64_t id = ea.driver_ids[static_cast<std::size_t>(i)];
    noise.increment(Driver::B_STAR, id, k, dbs);
    noise.increment(Driver::B_HAT, id, k, dbh);
    if (has_sig) noise.increment(Driver::W, id, k, dw);

    if (r2 > 0.0) {
      double dot = 0.0;
      for (int c = 0; c < d; ++c) dot += z[c] * dbs[c];
      const double coef = 2.0 * dot / r2;
      for (int c = 0; c < d; ++c) refl[c] = dbs[c] - coef * z[c];
    } else {
      for (int c = 0; c < d; ++c) refl[c] = dbs[c];
    }

    s.bhat(t, xa, ba);
    s.bhat(t, xb, bb);
    if (has_pair) {
      for (int c = 0; c < d; ++c) {
        ba[c] += conv_a[static_cast<std::size_t>(i) * d + c];
        bb[c] += conv_b[static_cast<std::size_t>(i) * d + c];
      }
    }
    if (has_sig) {
      s.sigma_hat_diag(t, xa, sga);
      s.sigma_hat_diag(t, xb, sgb);
    }

    double* oa = out_a.data() + i * d;
    double* ob = out_b.data() + i * d;
    for (int c = 0; c < d; ++c) {
      double na = sqrt_alpha * (sp * dbs[c] + sq * dbh[c]);
      double nb = sqrt_alpha * (sp * refl[c] + sq * dbh[c]);
      oa[c] = xa[c] + dt * ba[c] + na;
      ob[c] = xb[c] + dt * bb[c] + nb;
      if (has_sig) {
        oa[c] += sga[c] * dw[c];
        ob[c] += sgb[c] * dw[c];
      }
    }
  });

  const double guard = cfg.guard_override > 0.0 ? cfg.guard_override : s.divergence_guard;
  const double g2 = guard * guard;
  for (std::int64_t i = 0; i < n; ++i) {
    for (int side = 0; side < 2; ++side) {
      const double* row = (side == 0 ? out_a : out_b).data() + i * d;
      double rr = 0.0;
      bool finite = true;
      for (int c = 0; c < d; ++c) {
        if (!std::isfinite(row[c])) finite = false;
        rr += row[c] * row[c];
      }
      if (!finite || rr > g2)
        fail(errc::divergence, "coupled_step: divergence at step " + std::to_string(k) +
                                   ", particle " + std::to_string(i));
    }
  }

  ea.states.swap(out_a);
  eb.states.swap(out_b);
  ++ea.time_index;
  ++eb.time_index;
}

namespace {

double sorted_mean(std::vector<double>& vals) {
  std::sort(vals.begin(), vals.end());
  return pairwise_mean(vals.size(), [&](std::size_t i) { return vals[i]; });
}

} // namespace

double mean_f_distance(const CoupledPair& pair, double c1, double c2) {
  const std::int64_t n = pair.a.n;
  const int d = pair.a.d;
  require(pair.b.n == n && pair.b.d == d, errc::size_mismatch,
          "mean_f_distance: marginal shapes differ");
  std::vector<double> gaps(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) {
    double r2 = 0.0;
    for (int c = 0; c < d; ++c) {
      const double u = pair.a.states[i * d + c] - pair.b.states[i * d + c];
      r2 += u * u;
    }
    gaps[static_cast<std::size_t>(i)] = std::sqrt(r2);
  }
  std::sort(gaps.begin(), gaps.end());
  for (double& g : gaps) g = concave_distance(c1, c2, g);
  return pairwise_mean(gaps.size(), [&](std::size_t i) { return gaps[i]; });
}

PairDiagnostics pair_diagnostics(const CoupledPair& pair, double c1, double c2, double eps) {
  const std::int64_t n = pair.a.n;
  const int d = pair.a.d;
  require(pair.b.n == n && pair.b.d == d, errc::size_mismatch,
          "pair_diagnostics: marginal shapes differ");
  require(n >= 1, errc::empty_ensemble, "pair_diagnostics: empty pair");
  std::vector<double> gaps(static_cast<std::size_t>(n));
  std::int64_t reflecting = 0;
  for (std::int64_t i = 0; i < n; ++i) {
    double r2 = 0.0;
    for (int c = 0; c < d; ++c) {
      const double u = pair.a.states[i * d + c] - pair.b.states[i * d + c];
      r2 += u * u;
    }
    const double r = std::sqrt(r2);
    gaps[static_cast<std::size_t>(i)] = r;
    if (cutoff_phi(eps, r) > 0.5) ++reflecting;
  }
  PairDiagnostics diag;
  diag.mean_abs_gap = sorted_mean(gaps);
  for (double& g : gaps) g = concave_distance(c1, c2, g);
  diag.mean_f = pairwise_mean(gaps.size(), [&](std::size_t i) { return gaps[i]; });
  diag.fraction_reflecting = static_cast<double>(reflecting) / static_cast<double>(n);
  return diag;
}

} // namespace mvp
