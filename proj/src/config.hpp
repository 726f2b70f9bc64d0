#pragma once

// Run configuration: INI-style files with [scenario], [grid], [experiment],
// [output] sections, plus re-ingestion of emitted manifest.json files.
// Unknown keys are hard errors; the seed must be explicit.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ensemble.hpp"
#include "experiments.hpp"
#include "scenario.hpp"

namespace mvp {

struct RunConfig {
  // [scenario]
  std::string scenario_name;
  std::map<std::string, std::string> scenario_params; // validated per scenario

  // [grid]
  double t0 = 0.0;
  double dt = 0.0;      // 0: regime default
  double periods = 0.0; // 0: experiment default

  // [experiment]
  std::string experiment;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::int64_t n_particles = 0;
  std::int64_t m_ref = 0;
  std::int64_t r_replicas = 2000;
  std::int64_t poc_replicas = 16;
  std::vector<std::int64_t> n_list;
  std::vector<int> horizons;
  double rate_floor = 0.0;
  double slope_ceiling = -0.45;
  double eps0 = 0.5;
  double eps_coupling = 0.0;
  int workers = 0; // 0: resolve from MVP_WORKERS / hardware
  InitSpec init;
  InitSpec init_b; // second marginal of contraction runs
  bool init_b_set = false;

  // [output]
  std::string out_dir = "out";
  bool emit_csv = true;
  bool emit_json = true;
  bool emit_svg = false;
};

// Reads a config file and returns its canonical text. A file starting with
// '{' is treated as an emitted manifest and the embedded config text is
// returned instead, so manifest re-runs hash the same config bytes.
std::string read_config_text(const std::string& path);

// Parses a config file (manifest files are unwrapped first).
RunConfig parse_config(const std::string& path);

// Parses config text directly; `origin` labels error messages.
RunConfig parse_config_text(const std::string& text, const std::string& origin);

// Builds the scenario named by the config, applying parameter overrides.
// Unknown parameter keys fail with ParseError naming the key.
Scenario scenario_from_config(const RunConfig& cfg);

// Experiment parameter block derived from the config.
ExpParams exp_params_from_config(const RunConfig& cfg, int resolved_workers);

} // namespace mvp
