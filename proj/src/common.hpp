#pragma once

// Shared error taxonomy and small helpers used across the engine.
// Error codes are mirrored 1:1 by the C API in include/mvperiodic.h.

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mvp {

enum class errc : int {
  ok = 0,
  domain_error = 1,        // argument outside mathematical domain
  missing_stats = 2,       // scenario needs pairwise/ensemble data, only summary given
  empty_ensemble = 3,
  not_contractive = 4,     // lambda <= 0 or a <= b where contraction is required
  no_admissible_k2 = 5,    // bisection collapsed below 1e-12
  divergence = 6,          // particle norm exceeded the guard
  wrong_regime = 7,
  size_mismatch = 8,
  dimension_error = 9,
  cap_exceeded = 10,       // assignment solver above its N cap
  non_positive_value = 11, // log-fit input must be > 0
  grid_not_aligned = 12,
  parse_error = 13,
  validation_error = 14,
  io_error = 15,
  internal_error = 16,
};

class Error : public std::runtime_error {
public:
  Error(errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  errc code() const noexcept { return code_; }

private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

inline void require(bool cond, errc code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

// SplitMix64 finalizer; the mixing core of the counter RNG and of all
// derived-seed computations.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic sub-stream derivation: one master seed, many independent roles.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t role) noexcept {
  return mix64(mix64(master) ^ mix64(role * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
}

// Sequential SplitMix64 stream for auxiliary draws (spot checks, subsample
// index shuffles). Particle-level noise goes through the counter RNG instead.
struct SmallRng {
  std::uint64_t state;
  explicit SmallRng(std::uint64_t s) : state(s) {}
  std::uint64_t next_u64() noexcept {
    state += 0x9e3779b97f4a7c15ULL;
    return mix64(state);
  }
  double uniform() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }
};

} // namespace mvp
