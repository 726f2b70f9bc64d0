#pragma once

// Deterministic reductions. All ensemble statistics go through the pairwise
// tree below so that results depend only on the operand order, never on the
// worker count or chunking of the caller.

#include <cstddef>
#include <functional>

namespace mvp {

// Pairwise (recursive halving) sum of f(i) for i in [begin, end).
// Fixed association order: [begin, mid) + [mid, end) with mid = begin + n/2.
// Good rounding behaviour and bit-reproducible for a given range.
template <class F>
double pairwise_sum(std::size_t begin, std::size_t end, const F& f) {
  const std::size_t n = end - begin;
  if (n == 0) return 0.0;
  if (n == 1) return f(begin);
  if (n == 2) return f(begin) + f(begin + 1);
  if (n == 3) return (f(begin) + f(begin + 1)) + f(begin + 2);
  const std::size_t mid = begin + n / 2;
  return pairwise_sum(begin, mid, f) + pairwise_sum(mid, end, f);
}

template <class F>
double pairwise_mean(std::size_t n, const F& f) {
  return n == 0 ? 0.0 : pairwise_sum(std::size_t{0}, n, f) / static_cast<double>(n);
}

} // namespace mvp
