#pragma once

// Least-squares rate extraction and the small statistical helpers used by the
// experiment verdicts: log-linear and log-log fits, the theoretical mean-field
// error rate curve, block standard errors, and an exact two-sided sign test.

#include <cstdint>
#include <vector>

namespace mvp {

struct RateFit {
  double C = 0.0;         // exp(intercept)
  double rate = 0.0;      // decay per unit abscissa (exponential fit: -slope;
                          // power-law fit: raw log-log slope)
  double r_squared = 0.0;
  int n_points = 0;
};

struct LinFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares y = slope*x + intercept. Constant y gives slope 0
// and r^2 = 1 (the line is exact).
LinFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys);

// Line through (t, log v); rate = -slope, C = exp(intercept).
// Requires >= 3 points and all values > 0.
RateFit fit_exponential(const std::vector<double>& times, const std::vector<double>& values);

// Line through (log n, log v); rate holds the raw slope (negative for decay).
RateFit fit_power_law(const std::vector<double>& ns, const std::vector<double>& values);

// Mean-field convergence rate phi(N): N^{-1/2} branch below dimension 4, the
// log-corrected branch at 4, N^{-2/d} above, each plus N^{-eps0/(2+eps0)}.
double phi_rate(double eps0, int d, std::int64_t n);

// Standard error of the mean of block estimates: sd(blocks)/sqrt(#blocks).
double block_se(const std::vector<double>& block_values);

// Exact two-sided binomial sign test against p = 1/2 on n_pos positive and
// n_neg negative residuals (zeros dropped by the caller). Returns the p-value.
double sign_test_p(std::int64_t n_pos, std::int64_t n_neg);

} // namespace mvp
