#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "detsum.hpp"
#include "noise.hpp"

namespace mvp {

namespace {

// Driver tag reserved for projection directions of the sliced estimator.
constexpr std::uint64_t kProjDriver = 0x50524f4aULL;

double root_of_mean(double mean_pow, int order) {
  if (order == 1) return mean_pow;
  if (order == 2) return std::sqrt(mean_pow);
  return std::pow(mean_pow, 1.0 / order);
}

double pair_cost(const double* a, const double* b, int d, int order) {
  double s = 0;
  for (int c = 0; c < d; ++c) {
    double g = a[c] - b[c];
    s += g * g;
  }
  if (order == 2) return s;
  if (order == 1) return std::sqrt(s);
  return std::pow(s, 0.5 * order);
}

// Shortest-augmenting-path assignment with dual potentials on a dense square
// cost matrix; returns the minimal total cost. O(n^3) time, O(n^2) memory.
double solve_assignment(const std::vector<double>& cost, int n) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      int i0 = p[j0], j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost[static_cast<std::size_t>(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0;
  for (int j = 1; j <= n; ++j)
    total += cost[static_cast<std::size_t>(p[j] - 1) * n + (j - 1)];
  return total;
}

} // namespace

double wasserstein_1d(const std::vector<double>& x, const std::vector<double>& y, int order) {
  require(order >= 1, errc::domain_error, "wasserstein order must be >= 1");
  require(x.size() == y.size(), errc::size_mismatch, "sample counts differ");
  require(!x.empty(), errc::empty_ensemble, "wasserstein of empty samples");
  std::vector<double> xs(x), ys(y);
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  auto n = static_cast<std::int64_t>(xs.size());
  double mean_pow = pairwise_sum(std::int64_t{0}, n, [&](std::int64_t i) {
                      double g = std::fabs(xs[i] - ys[i]);
                      if (order == 1) return g;
                      if (order == 2) return g * g;
                      return std::pow(g, order);
                    }) /
                    static_cast<double>(n);
  return root_of_mean(mean_pow, order);
}

double wasserstein_assignment(const std::vector<double>& x, const std::vector<double>& y,
                              std::int64_t n, int d, int order) {
  require(order >= 1, errc::domain_error, "wasserstein order must be >= 1");
  require(n > 0, errc::empty_ensemble, "wasserstein of empty samples");
  require(d >= 1, errc::dimension_error, "dimension must be >= 1");
  require(n <= kAssignmentCap, errc::cap_exceeded, "assignment solver capped at N = 2048");
  require(x.size() == static_cast<std::size_t>(n) * d && x.size() == y.size(),
          errc::size_mismatch, "sample arrays must both be N x d");
  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (std::int64_t i = 0; i < n; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      cost[static_cast<std::size_t>(i) * n + j] = pair_cost(&x[i * d], &y[j * d], d, order);
  double total = solve_assignment(cost, static_cast<int>(n));
  return root_of_mean(total / static_cast<double>(n), order);
}

double sliced_wasserstein(const std::vector<double>& x, const std::vector<double>& y,
                          std::int64_t n, int d, int order, int n_projections,
                          std::uint64_t seed) {
  require(order >= 1, errc::domain_error, "wasserstein order must be >= 1");
  require(n > 0, errc::empty_ensemble, "wasserstein of empty samples");
  require(d >= 1, errc::dimension_error, "dimension must be >= 1");
  require(n_projections >= 1, errc::domain_error, "need at least one projection");
  require(x.size() == static_cast<std::size_t>(n) * d && x.size() == y.size(),
          errc::size_mismatch, "sample arrays must both be N x d");
  if (d == 1) return wasserstein_1d(x, y, order); // projection is +-identity
  std::vector<double> dir(d), px(n), py(n);
  double acc = 0;
  for (int pr = 0; pr < n_projections; ++pr) {
    double nrm = 0;
    std::int64_t attempt = 0;
    do {
      double nrm2 = 0;
      for (int c = 0; c < d; ++c) {
        dir[c] = counter_normal(seed, kProjDriver, pr, attempt, c);
        nrm2 += dir[c] * dir[c];
      }
      nrm = std::sqrt(nrm2);
      ++attempt;
    } while (nrm < 1e-12);
    for (int c = 0; c < d; ++c) dir[c] /= nrm;
    for (std::int64_t i = 0; i < n; ++i) {
      double sx = 0, sy = 0;
      for (int c = 0; c < d; ++c) {
        sx += x[i * d + c] * dir[c];
        sy += y[i * d + c] * dir[c];
      }
      px[i] = sx;
      py[i] = sy;
    }
    double w = wasserstein_1d(px, py, order);
    acc += (order == 1) ? w : (order == 2 ? w * w : std::pow(w, order));
  }
  return root_of_mean(acc / n_projections, order);
}

bool coupling_bound_check(const std::vector<double>& x, const std::vector<double>& y,
                          std::int64_t n, int d) {
  require(n > 0, errc::empty_ensemble, "coupling bound on empty samples");
  require(x.size() == static_cast<std::size_t>(n) * d && x.size() == y.size(),
          errc::size_mismatch, "sample arrays must both be N x d");
  double w2 = (d == 1) ? wasserstein_1d(x, y, 2) : wasserstein_assignment(x, y, n, d, 2);
  double paired = pairwise_sum(std::int64_t{0}, n,
                               [&](std::int64_t i) { return pair_cost(&x[i * d], &y[i * d], d, 2); }) /
                  static_cast<double>(n);
  return w2 * w2 <= paired + 1e-9;
}

double empirical_wasserstein(const std::vector<double>& x, const std::vector<double>& y,
                             std::int64_t n, int d, int order, std::uint64_t seed,
                             LargeNMode mode, std::string* method, std::int64_t cap) {
  if (d == 1) {
    if (method) *method = "sorted_exact";
    return wasserstein_1d(x, y, order);
  }
  if (n <= cap) {
    if (method) *method = "assignment";
    return wasserstein_assignment(x, y, n, d, order);
  }
  if (mode == LargeNMode::Sliced) {
    if (method) *method = "sliced_512";
    return sliced_wasserstein(x, y, n, d, order, 512, seed);
  }
  // Subsample both sides to the cap, 8 deterministic resamples, average.
  if (method) *method = "subsample_assignment_x8";
  double acc = 0;
  std::vector<double> sx(static_cast<std::size_t>(cap) * d), sy(sx.size());
  for (int r = 0; r < 8; ++r) {
    SmallRng rng(derive_seed(seed, 0x5541u + r));
    std::vector<std::int64_t> idx(n);
    for (std::int64_t i = 0; i < n; ++i) idx[i] = i;
    for (std::int64_t i = 0; i < cap; ++i) {
      std::int64_t j = i + static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(n - i));
      std::swap(idx[i], idx[j]);
    }
    for (std::int64_t i = 0; i < cap; ++i)
      for (int c = 0; c < d; ++c) sx[i * d + c] = x[idx[i] * d + c];
    for (std::int64_t i = 0; i < n; ++i) idx[i] = i;
    for (std::int64_t i = 0; i < cap; ++i) {
      std::int64_t j = i + static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(n - i));
      std::swap(idx[i], idx[j]);
    }
    for (std::int64_t i = 0; i < cap; ++i)
      for (int c = 0; c < d; ++c) sy[i * d + c] = y[idx[i] * d + c];
    acc += wasserstein_assignment(sx, sy, cap, d, order);
  }
  return acc / 8.0;
}

} // namespace mvp
