// Command-line front end; talks to the engine only through the C API.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "mvperiodic.h"

int main(int argc, char** argv) {
  CLI::App app{"mvperiodic: periodic mean-field SDE experiment harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(mvp_version()));

  std::string config_path, out_dir;
  CLI::App* run = app.add_subcommand("run", "Run one experiment from a config file");
  run->add_option("config", config_path, "Config file (INI text or emitted manifest.json)")
      ->required();
  run->add_option("-o,--out", out_dir, "Override the output directory");

  CLI::App* list = app.add_subcommand("list-scenarios", "Print built-in scenario names");

  std::string verify_dir;
  int verify_workers = 0;
  CLI::App* verify =
      app.add_subcommand("verify-all", "Run the full acceptance suite");
  verify->add_option("dir", verify_dir, "Directory for acceptance artifacts")->required();
  verify->add_option("-w,--workers", verify_workers,
                     "Worker count (0 = auto; MVP_WORKERS overrides)");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    mvp_result* res = nullptr;
    const int rc = mvp_run_config_file(config_path.c_str(),
                                       out_dir.empty() ? nullptr : out_dir.c_str(), &res);
    if (rc != MVP_OK) {
      std::fprintf(stderr, "error (code %d): %s\n", rc, mvp_last_error_message());
      return 3;
    }
    const int verdict = mvp_result_verdict(res);
    const char* vname = verdict == MVP_VERDICT_PASS     ? "PASS"
                        : verdict == MVP_VERDICT_FAIL   ? "FAIL"
                                                        : "INCONCLUSIVE";
    std::printf("%s / %s: %s (%.1fs)\n", mvp_result_experiment(res),
                mvp_result_scenario(res), vname, mvp_result_runtime_seconds(res));
    const char* rp = mvp_result_report_path(res);
    if (rp && rp[0]) std::printf("report: %s\n", rp);
    mvp_result_free(res);
    return verdict == MVP_VERDICT_PASS ? 0 : verdict == MVP_VERDICT_FAIL ? 1 : 2;
  }

  if (list->parsed()) {
    int n = 0;
    const char** names = mvp_list_scenarios(&n);
    for (int i = 0; i < n; ++i) std::printf("%s\n", names[i]);
    mvp_free_names(names, n);
    return 0;
  }

  if (verify->parsed()) {
    int n_passed = 0, n_total = 0;
    const int rc = mvp_verify_all(verify_dir.c_str(), verify_workers, &n_passed, &n_total);
    if (rc != MVP_OK) {
      std::fprintf(stderr, "error (code %d): %s\n", rc, mvp_last_error_message());
      return 3;
    }
    return n_passed == n_total ? 0 : 1;
  }

  return 3;
}
