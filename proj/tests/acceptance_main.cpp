// Acceptance gate runner. With --criterion N it runs a single criterion and
// exits 0/1 so each one can be registered as its own ctest case; with no
// arguments it runs the whole suite.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "acceptance.hpp"

int main(int argc, char** argv) {
  std::string out_dir;
  int criterion = 0;
  int workers = 0;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--criterion" && i + 1 < argc) criterion = std::atoi(argv[++i]);
    else if (a == "--out" && i + 1 < argc) out_dir = argv[++i];
    else if (a == "--workers" && i + 1 < argc) workers = std::atoi(argv[++i]);
    else {
      std::fprintf(stderr, "usage: acceptance [--criterion N] [--out DIR] [--workers W]\n");
      return 2;
    }
  }

  if (criterion > 0) {
    const mvp::acceptance::CriterionResult r =
        mvp::acceptance::run_criterion(criterion, out_dir, workers);
    std::printf("C%d %s %s (%.1fs) %s\n", r.index, r.passed ? "PASS" : "FAIL", r.name.c_str(),
                r.runtime_s, r.detail.c_str());
    return r.passed ? 0 : 1;
  }

  const auto results = mvp::acceptance::run_all(out_dir, workers);
  for (const auto& r : results)
    if (!r.passed) return 1;
  return 0;
}
