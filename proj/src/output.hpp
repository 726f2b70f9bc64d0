#pragma once

// Artifact emission: report.json, per-series CSV files, optional SVG line
// charts, and the manifest.json that allows bit-exact re-runs.

#include <string>

#include "config.hpp"
#include "experiments.hpp"

namespace mvp {

// Set at build time; constant for a given binary.
const char* code_version();

// Full report document (includes timestamp and runtime fields).
std::string report_to_json(const Report& r);

// Canonical numeric content only: excludes timestamp, runtime, and worker
// count. Two runs that must agree bit-for-bit compare these strings.
std::string report_numerics_fingerprint(const Report& r);

std::string series_to_csv(const Series& s);
std::string render_series_svg(const Series& s);

std::string manifest_to_json(const RunConfig& cfg, const std::string& config_text,
                             const Report& r);

// Writes report.json, series CSVs, optional SVGs, and manifest.json under
// out_dir (created if missing). Returns the report.json path.
std::string write_run_outputs(const Report& r, const RunConfig& cfg,
                              const std::string& config_text, const std::string& out_dir);

} // namespace mvp
