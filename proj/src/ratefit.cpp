#include "ratefit.hpp"

#include <algorithm>
#include <cmath>

#include "common.hpp"
#include "detsum.hpp"

namespace mvp {

LinFit linear_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
  const std::size_t n = xs.size();
  require(ys.size() == n, errc::size_mismatch, "linear_fit: length mismatch");
  require(n >= 2, errc::validation_error, "linear_fit: need at least 2 points");
  const double nn = static_cast<double>(n);
  const double mx = pairwise_mean(n, [&](std::size_t i) { return xs[i]; });
  const double my = pairwise_mean(n, [&](std::size_t i) { return ys[i]; });
  const double sxx = pairwise_sum(std::size_t{0}, n, [&](std::size_t i) {
    const double u = xs[i] - mx;
    return u * u;
  });
  const double sxy = pairwise_sum(std::size_t{0}, n, [&](std::size_t i) {
    return (xs[i] - mx) * (ys[i] - my);
  });
  require(sxx > 0.0, errc::validation_error, "linear_fit: degenerate abscissa");
  LinFit f;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  const double ss_tot = pairwise_sum(std::size_t{0}, n, [&](std::size_t i) {
    const double u = ys[i] - my;
    return u * u;
  });
  const double ss_res = pairwise_sum(std::size_t{0}, n, [&](std::size_t i) {
    const double u = ys[i] - (f.intercept + f.slope * xs[i]);
    return u * u;
  });
  // Constant data: the fitted line reproduces it exactly.
  f.r_squared = ss_tot <= 1e-300 * nn ? 1.0 : std::max(0.0, 1.0 - ss_res / ss_tot);
  return f;
}

RateFit fit_exponential(const std::vector<double>& times, const std::vector<double>& values) {
  require(values.size() == times.size(), errc::size_mismatch, "fit_exponential: length mismatch");
  require(times.size() >= 3, errc::validation_error, "fit_exponential: need at least 3 points");
  std::vector<double> logs(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(values[i] > 0.0, errc::non_positive_value,
            "fit_exponential: values must be positive");
    logs[i] = std::log(values[i]);
  }
  const LinFit lf = linear_fit(times, logs);
  RateFit f;
  f.C = std::exp(lf.intercept);
  f.rate = -lf.slope;
  f.r_squared = lf.r_squared;
  f.n_points = static_cast<int>(times.size());
  return f;
}

RateFit fit_power_law(const std::vector<double>& ns, const std::vector<double>& values) {
  require(values.size() == ns.size(), errc::size_mismatch, "fit_power_law: length mismatch");
  require(ns.size() >= 3, errc::validation_error, "fit_power_law: need at least 3 points");
  std::vector<double> lx(ns.size()), ly(ns.size());
  for (std::size_t i = 0; i < ns.size(); ++i) {
    require(ns[i] > 0.0, errc::non_positive_value, "fit_power_law: abscissa must be positive");
    require(values[i] > 0.0, errc::non_positive_value,
            "fit_power_law: values must be positive");
    lx[i] = std::log(ns[i]);
    ly[i] = std::log(values[i]);
  }
  const LinFit lf = linear_fit(lx, ly);
  RateFit f;
  f.C = std::exp(lf.intercept);
  f.rate = lf.slope;
  f.r_squared = lf.r_squared;
  f.n_points = static_cast<int>(ns.size());
  return f;
}

double phi_rate(double eps0, int d, std::int64_t n) {
  require(eps0 > 0.0 && eps0 < 1.0, errc::domain_error, "phi_rate: eps0 must be in (0,1)");
  require(d >= 1, errc::dimension_error, "phi_rate: bad dimension");
  require(n >= 1, errc::domain_error, "phi_rate: n must be >= 1");
  const double nn = static_cast<double>(n);
  const double tail = std::pow(nn, -eps0 / (2.0 + eps0));
  if (d < 4) return 1.0 / std::sqrt(nn) + tail;
  if (d == 4) return std::log1p(nn) / std::sqrt(nn) + tail;
  return std::pow(nn, -2.0 / static_cast<double>(d)) + tail;
}

double block_se(const std::vector<double>& block_values) {
  const std::size_t b = block_values.size();
  require(b >= 2, errc::validation_error, "block_se: need at least 2 blocks");
  const double m = pairwise_mean(b, [&](std::size_t i) { return block_values[i]; });
  const double var = pairwise_sum(std::size_t{0}, b, [&](std::size_t i) {
                       const double u = block_values[i] - m;
                       return u * u;
                     }) /
                     static_cast<double>(b - 1);
  return std::sqrt(var / static_cast<double>(b));
}

double sign_test_p(std::int64_t n_pos, std::int64_t n_neg) {
  require(n_pos >= 0 && n_neg >= 0, errc::domain_error, "sign_test_p: negative counts");
  const std::int64_t n = n_pos + n_neg;
  if (n == 0) return 1.0;
  const std::int64_t k = std::min(n_pos, n_neg);
  // P(X <= k) for X ~ Binomial(n, 1/2), exact via log factorials.
  const double ln2 = std::log(2.0);
  double tail = 0.0;
  for (std::int64_t j = 0; j <= k; ++j) {
    const double lp = std::lgamma(static_cast<double>(n) + 1.0) -
                      std::lgamma(static_cast<double>(j) + 1.0) -
                      std::lgamma(static_cast<double>(n - j) + 1.0) -
                      static_cast<double>(n) * ln2;
    tail += std::exp(lp);
  }
  return std::min(1.0, 2.0 * tail);
}

} // namespace mvp
