#pragma once

// Empirical Wasserstein distances between equal-size samples: exact sorted
// transport in one dimension, an O(N^3) assignment solver for small d-dim
// ensembles, and a sliced (random projection) estimator for larger ones.

#include <cstdint>
#include <string>
#include <vector>

#include "common.hpp"

namespace mvp {

inline constexpr std::int64_t kAssignmentCap = 2048;

// W_order between two N-sample 1-d empiricals via sorting:
// ((1/N) sum |x_(i) - y_(i)|^order)^(1/order).
double wasserstein_1d(const std::vector<double>& x, const std::vector<double>& y, int order);

// W_order between equal-size d-dim samples (row-major N x d) via minimal-cost
// assignment with costs |x_i - y_j|^order; throws CapExceeded above N = 2048.
double wasserstein_assignment(const std::vector<double>& x, const std::vector<double>& y,
                              std::int64_t n, int d, int order);

// Sliced estimator: the mean over n_projections seeded random directions of
// the 1-d W_order^order of the projected samples, then the order-th root.
// d = 1 reduces exactly to wasserstein_1d.
double sliced_wasserstein(const std::vector<double>& x, const std::vector<double>& y,
                          std::int64_t n, int d, int order, int n_projections,
                          std::uint64_t seed);

// Checks W2(empirical x, empirical y)^2 <= (1/N) sum_i |x_i - y_i|^2 + 1e-9,
// the coupling upper bound through the paired empirical measure.
bool coupling_bound_check(const std::vector<double>& x, const std::vector<double>& y,
                          std::int64_t n, int d);

// W_order for experiment code: exact for d = 1 at any N, assignment up to the
// cap, and above the cap either 8-fold subsampled assignment (averaged) or
// sliced projection, per `mode`. The method actually used lands in *method.
enum class LargeNMode { Subsample, Sliced };
double empirical_wasserstein(const std::vector<double>& x, const std::vector<double>& y,
                             std::int64_t n, int d, int order, std::uint64_t seed,
                             LargeNMode mode, std::string* method,
                             std::int64_t cap = kAssignmentCap);

} // namespace mvp
