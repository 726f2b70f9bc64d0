#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <mvperiodic.h>

#include "runner.hpp"
#include "workers.hpp"

namespace fs = std::filesystem;

namespace {

const char* kQuickRun =
    "[scenario]\nname = mv_ou_periodic\n"
    "[grid]\ndt = 0.01\nperiods = 2\n"
    "[experiment]\nname = pathwise_periodicity\nseed = 7\nn = 12\n";

} // namespace

TEST_CASE("scenario listing through the C api") {
  int count = 0;
  const char** names = mvp_list_scenarios(&count);
  REQUIRE(names != nullptr);
  CHECK(count == 4);
  bool found = false;
  for (int i = 0; i < count; ++i) {
    if (std::string(names[i]) == "mv_ou_periodic") found = true;
  }
  CHECK(found);
  mvp_free_names(names, count);
}

TEST_CASE("running a config text end to end") {
  fs::remove_all("test_cli_out");
  mvp_result* r = nullptr;
  int rc = mvp_run_config_text(kQuickRun, "test_cli_out/run1", &r);
  REQUIRE(rc == MVP_OK);
  REQUIRE(r != nullptr);
  CHECK(mvp_result_verdict(r) == MVP_VERDICT_PASS);
  CHECK(std::string(mvp_result_experiment(r)) == "pathwise_periodicity");
  CHECK(std::string(mvp_result_scenario(r)) == "mv_ou_periodic");
  CHECK(mvp_result_runtime_seconds(r) >= 0.0);
  CHECK(std::string(mvp_last_error_message()).empty());

  std::string path = mvp_result_report_path(r);
  REQUIRE(!path.empty());
  CHECK(fs::exists(path));
  std::ifstream in(path);
  char first = 0;
  in.get(first);
  CHECK(first == '{');
  CHECK(path.find("test_cli_out/run1") != std::string::npos);

  double disc = -1.0;
  CHECK(mvp_result_detail(r, "max_discrepancy", &disc) == MVP_OK);
  CHECK(disc == 0.0);
  double missing = 0.0;
  CHECK(mvp_result_detail(r, "never_a_key", &missing) == MVP_E_VALIDATION);
  CHECK(!std::string(mvp_last_error_message()).empty());
  mvp_result_free(r);
  fs::remove_all("test_cli_out");
}

TEST_CASE("error codes surface through the C boundary") {
  mvp_result* r = nullptr;

  std::string balanced =
      "[scenario]\nname = mv_ou_periodic\na = 0.5\nb = 0.5\n"
      "[grid]\ndt = 0.01\nperiods = 2\n"
      "[experiment]\nname = pullback\nseed = 1\nn = 8\n";
  CHECK(mvp_run_config_text(balanced.c_str(), "test_cli_err", &r) == MVP_E_NOT_CONTRACTIVE);
  CHECK(r == nullptr);
  CHECK(!std::string(mvp_last_error_message()).empty());

  std::string unknown = std::string(kQuickRun) + "foo = 1\n";
  CHECK(mvp_run_config_text(unknown.c_str(), "test_cli_err", &r) == MVP_E_PARSE);

  CHECK(mvp_run_config_file("missing_config.ini", nullptr, &r) == MVP_E_IO);

  CHECK(mvp_run_config_text(nullptr, nullptr, &r) != MVP_OK);
  fs::remove_all("test_cli_err");
}

TEST_CASE("version string") {
  CHECK(mvp_version() != nullptr);
  CHECK(std::string(mvp_version()).size() > 0);
}

TEST_CASE("worker resolution order: env, config, hardware") {
  setenv("MVP_WORKERS", "3", 1);
  CHECK(mvp::resolve_worker_count(5) == 3);
  CHECK(mvp::resolve_worker_count(0) == 3);
  unsetenv("MVP_WORKERS");
  CHECK(mvp::resolve_worker_count(5) == 5);
  CHECK(mvp::resolve_worker_count(0) >= 1);
  CHECK(mvp::resolve_worker_count(0) <= 8);
}

TEST_CASE("verdict exit codes") {
  CHECK(mvp::exit_code_for(mvp::Verdict::Pass) == 0);
  CHECK(mvp::exit_code_for(mvp::Verdict::Fail) == 1);
  CHECK(mvp::exit_code_for(mvp::Verdict::Inconclusive) == 2);
}
