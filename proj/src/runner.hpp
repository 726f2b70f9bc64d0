#pragma once

// Top-level orchestration: parse a config, run the selected experiment, write
// artifacts, and map the verdict to a process exit code.

#include <string>

#include "config.hpp"
#include "experiments.hpp"

namespace mvp {

struct RunResult {
  Report report;
  RunConfig config;
  std::string config_text;
  std::string report_path; // empty when json emission is disabled
};

// Dispatches cfg.experiment on the configured scenario; no artifacts written.
// Worker count resolves from MVP_WORKERS, then cfg.workers, then hardware.
Report run_report(const RunConfig& cfg);

// run_report plus artifact emission into out_dir_override (when non-empty)
// or cfg.out_dir.
RunResult run_from_config(const RunConfig& cfg, const std::string& config_text,
                          const std::string& out_dir_override = "");

RunResult run_config_path(const std::string& path, const std::string& out_dir_override = "");
RunResult run_config_text(const std::string& text, const std::string& origin,
                          const std::string& out_dir_override = "");

// PASS -> 0, FAIL -> 1, INCONCLUSIVE -> 2. Runtime errors are exceptions and
// map to 3 at the API boundary.
int exit_code_for(Verdict v);

} // namespace mvp
