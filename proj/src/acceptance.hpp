#pragma once

// Release gate: ten numbered checks combining exact discrete identities,
// closed-form oracles, and statistical rate criteria. `verify-all` and the
// acceptance test binary both run these.

#include <string>
#include <vector>

namespace mvp {
namespace acceptance {

struct CriterionResult {
  int index = 0;
  std::string name;
  bool passed = false;
  std::string detail; // measured quantities, one line
  double runtime_s = 0.0;
};

int criterion_count();
const char* criterion_name(int index); // 1-based, nullptr out of range

// Runs one criterion (1..criterion_count()). Artifacts are written under
// out_dir when it is non-empty. workers = 0 resolves from MVP_WORKERS and
// hardware. Internal errors surface as passed = false with the message in
// `detail`; this never throws.
CriterionResult run_criterion(int index, const std::string& out_dir, int workers);

// All criteria in order, one summary line each on stdout; writes
// acceptance.json under out_dir when non-empty.
std::vector<CriterionResult> run_all(const std::string& out_dir, int workers);

} // namespace acceptance
} // namespace mvp
