#include "runner.hpp"

#include "common.hpp"
#include "output.hpp"
#include "workers.hpp"

namespace mvp {

int exit_code_for(Verdict v) {
  switch (v) {
    case Verdict::Pass: return 0;
    case Verdict::Fail: return 1;
    case Verdict::Inconclusive: return 2;
  }
  return 3;
}

Report run_report(const RunConfig& cfg) {
  const int workers = resolve_worker_count(cfg.workers);
  const Scenario s = scenario_from_config(cfg);
  const ExpParams p = exp_params_from_config(cfg, workers);

  if (cfg.experiment == "pathwise_periodicity") return run_pathwise_periodicity(s, p);
  if (cfg.experiment == "pullback") return run_pullback(s, p);
  if (cfg.experiment == "contraction") {
    InitSpec init_b = cfg.init_b;
    if (!cfg.init_b_set) init_b = InitSpec{};
    return run_contraction(s, cfg.init, init_b, p);
  }
  if (cfg.experiment == "poc") return run_poc(s, p);
  if (cfg.experiment == "law_periodicity") return run_law_periodicity(s, p);
  fail(errc::validation_error, "unknown experiment: " + cfg.experiment);
}

RunResult run_from_config(const RunConfig& cfg, const std::string& config_text,
                          const std::string& out_dir_override) {
  RunResult res;
  res.report = run_report(cfg);
  res.config = cfg;
  res.config_text = config_text;
  const std::string out_dir = out_dir_override.empty() ? cfg.out_dir : out_dir_override;
  res.report_path = write_run_outputs(res.report, cfg, config_text, out_dir);
  return res;
}

RunResult run_config_path(const std::string& path, const std::string& out_dir_override) {
  const std::string text = read_config_text(path);
  const RunConfig cfg = parse_config_text(text, path);
  return run_from_config(cfg, text, out_dir_override);
}

RunResult run_config_text(const std::string& text, const std::string& origin,
                          const std::string& out_dir_override) {
  const RunConfig cfg = parse_config_text(text, origin);
  return run_from_config(cfg, text, out_dir_override);
}

} // namespace mvp
