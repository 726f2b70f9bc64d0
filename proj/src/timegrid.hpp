#pragma once

// Period-aligned time grid over absolute step indices k in Z.
// The grid never accumulates time additively: t_k = t0 + k*dt is formed in one
// multiply, and periodic coefficients are evaluated at the reduced phase index
// (k mod m)*dt, which makes coefficient values at k and k+m bit-identical.

#include <cstdint>

#include "common.hpp"

namespace mvp {

struct TimeGrid {
  double t0 = 0.0;
  double dt = 0.0;
  std::int64_t n_steps = 0;
  std::int64_t period_steps = 0; // m; the scenario period is tau = m*dt by construction

  TimeGrid() = default;
  TimeGrid(double t0_, double dt_, std::int64_t n_steps_, std::int64_t period_steps_)
      : t0(t0_), dt(dt_), n_steps(n_steps_), period_steps(period_steps_) {
    require(dt > 0.0, errc::validation_error, "TimeGrid: dt must be > 0");
    require(n_steps >= 1, errc::validation_error, "TimeGrid: n_steps must be >= 1");
    require(period_steps >= 1, errc::validation_error, "TimeGrid: period_steps must be >= 1");
  }

  double time_at(std::int64_t k) const { return t0 + static_cast<double>(k) * dt; }

  // Phase index in [0, m) for any k in Z.
  std::int64_t phase_index(std::int64_t k) const {
    std::int64_t p = k % period_steps;
    return p < 0 ? p + period_steps : p;
  }

  // Coefficient-evaluation time: exact modulo-tau reduction by construction.
  double phase_time(std::int64_t k) const {
    return static_cast<double>(phase_index(k)) * dt;
  }
};

// Builds the grid for a scenario period: dt = tau/period_steps.
inline TimeGrid make_period_grid(double tau, std::int64_t period_steps, std::int64_t n_steps,
                                 double t0 = 0.0) {
  require(tau > 0.0, errc::validation_error, "make_period_grid: tau must be > 0");
  require(period_steps >= 1, errc::validation_error, "make_period_grid: period_steps >= 1");
  return TimeGrid(t0, tau / static_cast<double>(period_steps), n_steps, period_steps);
}

} // namespace mvp
