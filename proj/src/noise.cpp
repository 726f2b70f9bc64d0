#include "noise.hpp"

#include <cmath>

namespace mvp {

// AS 241 algorithm PPND16 (Wichura 1988): inverse normal CDF to ~1e-15
// relative accuracy over (0, 1).
double inverse_normal_cdf(double p) {
  require(p > 0.0 && p < 1.0, errc::domain_error, "inverse_normal_cdf: p must be in (0,1)");
  const double q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
               1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
             1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
           (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
               5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
             4.2313330701600911252e1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
              3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
            4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
          (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
              6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
            2.05319162663775882187e0) * r + 1.0);
  } else {
    r -= 5.0;
    val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
              2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
            5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
          (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
              1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
            5.99832206555887937690e-1) * r + 1.0);
  }
  return q < 0.0 ? -val : val;
}

namespace {

// Sequentially mixes the counter tuple into one 64-bit word. Chained mix64
// rounds keep distinct tuples statistically independent.
inline std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t driver,
                                  std::uint64_t particle, std::int64_t step,
                                  std::uint64_t component) {
  std::uint64_t h = mix64(seed);
  h = mix64(h ^ (0x9e3779b97f4a7c15ULL * driver + 0x7f4a7c159e3779b9ULL));
  h = mix64(h ^ (0xc2b2ae3d27d4eb4fULL * particle + 0x165667b19e3779f9ULL));
  h = mix64(h ^ (0x27d4eb2f165667c5ULL * static_cast<std::uint64_t>(step) + 0x85ebca6b27d4eb2fULL));
  h = mix64(h ^ (0x9e3779b97f4a7c15ULL * (component + 1)));
  return h;
}

// Dyadic rounding grid: path-value sums of rounded increments are exact in
// double precision (see noise.hpp).
constexpr double kDyadic = 4294967296.0; // 2^32

inline double round_dyadic(double x) { return std::nearbyint(x * kDyadic) / kDyadic; }

} // namespace

double counter_normal(std::uint64_t seed, std::uint64_t driver, std::uint64_t particle,
                      std::int64_t step, std::uint64_t component) {
  const std::uint64_t h = counter_hash(seed, driver, particle, step, component);
  // 53-bit uniform strictly inside (0,1): (n + 0.5) * 2^-53.
  const double u = (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
  return inverse_normal_cdf(u);
}

void gaussian_increment(std::uint64_t seed, Driver driver, std::uint64_t particle,
                        std::int64_t step, double dt, int d, double* out) {
  require(dt > 0.0, errc::domain_error, "gaussian_increment: dt must be > 0");
  const double s = std::sqrt(dt);
  for (int c = 0; c < d; ++c) {
    out[c] = round_dyadic(
        s * counter_normal(seed, static_cast<std::uint64_t>(driver), particle, step,
                           static_cast<std::uint64_t>(c)));
  }
}

std::vector<double> NoiseBundle::brownian_value(Driver driver, std::uint64_t particle,
                                                std::int64_t k) const {
  std::vector<double> acc(static_cast<std::size_t>(d_), 0.0);
  std::vector<double> incr(static_cast<std::size_t>(d_));
  if (k >= 0) {
    for (std::int64_t j = 0; j < k; ++j) {
      increment(driver, particle, j, incr.data());
      for (int c = 0; c < d_; ++c) acc[c] += incr[c];
    }
  } else {
    for (std::int64_t j = k; j < 0; ++j) {
      increment(driver, particle, j, incr.data());
      for (int c = 0; c < d_; ++c) acc[c] -= incr[c];
    }
  }
  return acc;
}

void NoiseBundle::init_draw(std::uint64_t particle, std::int64_t epoch, int d, double mean,
                            double sd, double* out) const {
  for (int c = 0; c < d; ++c) {
    const double z = counter_normal(seed_, static_cast<std::uint64_t>(Driver::INIT), particle,
                                    epoch, static_cast<std::uint64_t>(c));
    out[c] = mean + sd * z;
  }
}

} // namespace mvp
