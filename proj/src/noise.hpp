#pragma once

// Two-sided Brownian increments indexed by absolute grid step.
//
// Each increment is a pure function of (seed, driver, particle, step, dt,
// component): a SplitMix64-style hash of the tuple feeds an inverse normal
// CDF. Nothing is stored, so backward extension (steps < 0) and the Wiener
// shift are exact index arithmetic, never re-randomization.
//
// Increments are rounded to the dyadic grid 2^-32. Partial sums of up to ~1e6
// such increments stay below 2^53 units of that grid, so Brownian path values,
// their differences, and the shift identity
//   value_shifted(k) = value(k + m*p) - value(m*p)
// are all exact in double precision, independent of summation order. The
// rounding perturbs each N(0, dt) draw by at most 2^-33, far below every
// statistical tolerance used by the harness.

#include <cstdint>
#include <vector>

#include "common.hpp"

namespace mvp {

// Driver channels. W is the default diffusion driver; B carries the additive
// sqrt(alpha) noise of the split regime; B_STAR/B_HAT are the mixed
// reflection-coupling drivers; INIT seeds initial-condition draws.
enum class Driver : std::uint64_t {
  W = 1,
  B = 2,
  B_STAR = 3,
  B_HAT = 4,
  INIT = 5,
};

inline const char* kRngScheme = "splitmix64-counter/inverse-normal-cdf/dyadic32";

// Inverse standard normal CDF (Wichura's AS 241, double precision).
double inverse_normal_cdf(double p);

// Standard normal draw for the given counter tuple; pure function.
double counter_normal(std::uint64_t seed, std::uint64_t driver, std::uint64_t particle,
                      std::int64_t step, std::uint64_t component);

// sqrt(dt) * z, rounded to the 2^-32 dyadic grid (see file comment).
// Writes d components to out.
void gaussian_increment(std::uint64_t seed, Driver driver, std::uint64_t particle,
                        std::int64_t step, double dt, int d, double* out);

class NoiseBundle {
public:
  NoiseBundle(std::uint64_t seed, int d, double dt)
      : seed_(seed), d_(d), dt_(dt), shift_steps_(0) {
    require(d >= 1, errc::validation_error, "NoiseBundle: d must be >= 1");
    require(dt > 0.0, errc::validation_error, "NoiseBundle: dt must be > 0");
  }

  std::uint64_t seed() const { return seed_; }
  int d() const { return d_; }
  double dt() const { return dt_; }
  std::int64_t shift_steps() const { return shift_steps_; }

  // Increment over [k, k+1) of the given driver/particle, d components.
  void increment(Driver driver, std::uint64_t particle, std::int64_t k, double* out) const {
    gaussian_increment(seed_, driver, particle, k + shift_steps_, dt_, d_, out);
  }

  // View shifted by m_periods whole periods: index k reads source index
  // k + m_periods*period_steps. Composing views adds shifts.
  NoiseBundle wiener_shift(std::int64_t m_periods, std::int64_t period_steps) const {
    NoiseBundle v(*this);
    v.shift_steps_ = shift_steps_ + m_periods * period_steps;
    return v;
  }

  // Path value W(t_k) relative to W(t_0) = 0: sum of increments over [0, k)
  // for k >= 0, minus the sum over [k, 0) for k < 0. Exact for dyadic
  // increments, so the two-sided and telescoping identities hold bit-for-bit.
  std::vector<double> brownian_value(Driver driver, std::uint64_t particle, std::int64_t k) const;

  // Gaussian init draw: mean + sd * z with z keyed on (particle, epoch).
  // epoch distinguishes independent init draws (e.g. per pull-back horizon).
  void init_draw(std::uint64_t particle, std::int64_t epoch, int d, double mean, double sd,
                 double* out) const;

private:
  std::uint64_t seed_;
  int d_;
  double dt_;
  std::int64_t shift_steps_;
};

} // namespace mvp
