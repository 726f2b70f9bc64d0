#include "mvperiodic.h"

#include <cstring>
#include <exception>
#include <string>

#include "acceptance.hpp"
#include "common.hpp"
#include "output.hpp"
#include "runner.hpp"
#include "scenario.hpp"

struct mvp_result {
  mvp::Report report;
  std::string report_path;
};

namespace {

thread_local std::string g_last_error;

template <class F>
int guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const mvp::Error& e) {
    g_last_error = e.what();
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return MVP_E_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return MVP_E_INTERNAL;
  }
}

int verdict_code(mvp::Verdict v) {
  switch (v) {
    case mvp::Verdict::Pass: return MVP_VERDICT_PASS;
    case mvp::Verdict::Fail: return MVP_VERDICT_FAIL;
    case mvp::Verdict::Inconclusive: return MVP_VERDICT_INCONCLUSIVE;
  }
  return MVP_VERDICT_INCONCLUSIVE;
}

} // namespace

extern "C" {

int mvp_run_config_file(const char* path, const char* out_dir_override, mvp_result** out) {
  return guarded([&]() {
    mvp::require(path != nullptr && out != nullptr, mvp::errc::validation_error,
                 "null argument");
    *out = nullptr;
    mvp::RunResult rr =
        mvp::run_config_path(path, out_dir_override ? out_dir_override : "");
    *out = new mvp_result{std::move(rr.report), std::move(rr.report_path)};
    return MVP_OK;
  });
}

int mvp_run_config_text(const char* text, const char* out_dir_override, mvp_result** out) {
  return guarded([&]() {
    mvp::require(text != nullptr && out != nullptr, mvp::errc::validation_error,
                 "null argument");
    *out = nullptr;
    mvp::RunResult rr =
        mvp::run_config_text(text, "<text>", out_dir_override ? out_dir_override : "");
    *out = new mvp_result{std::move(rr.report), std::move(rr.report_path)};
    return MVP_OK;
  });
}

int mvp_result_verdict(const mvp_result* r) {
  if (!r) return -1;
  return verdict_code(r->report.verdict);
}

double mvp_result_runtime_seconds(const mvp_result* r) {
  return r ? r->report.runtime_s : 0.0;
}

const char* mvp_result_experiment(const mvp_result* r) {
  return r ? r->report.experiment.c_str() : "";
}

const char* mvp_result_scenario(const mvp_result* r) {
  return r ? r->report.scenario.c_str() : "";
}

const char* mvp_result_report_path(const mvp_result* r) {
  return r ? r->report_path.c_str() : "";
}

int mvp_result_detail(const mvp_result* r, const char* key, double* value) {
  return guarded([&]() {
    mvp::require(r != nullptr && key != nullptr && value != nullptr,
                 mvp::errc::validation_error, "null argument");
    *value = mvp::report_detail(r->report, key);
    return MVP_OK;
  });
}

void mvp_result_free(mvp_result* r) { delete r; }

const char** mvp_list_scenarios(int* count) {
  const std::vector<std::string> names = mvp::builtin_scenario_names();
  const char** out = new const char*[names.size()];
  for (std::size_t i = 0; i < names.size(); ++i) {
    char* s = new char[names[i].size() + 1];
    std::memcpy(s, names[i].c_str(), names[i].size() + 1);
    out[i] = s;
  }
  if (count) *count = static_cast<int>(names.size());
  return out;
}

void mvp_free_names(const char** names, int count) {
  if (!names) return;
  for (int i = 0; i < count; ++i) delete[] names[i];
  delete[] names;
}

int mvp_verify_all(const char* out_dir, int workers, int* n_passed, int* n_total) {
  return guarded([&]() {
    const auto results = mvp::acceptance::run_all(out_dir ? out_dir : "", workers);
    int passed = 0;
    for (const auto& r : results)
      if (r.passed) ++passed;
    if (n_passed) *n_passed = passed;
    if (n_total) *n_total = static_cast<int>(results.size());
    return MVP_OK;
  });
}

const char* mvp_last_error_message(void) { return g_last_error.c_str(); }

const char* mvp_version(void) { return mvp::code_version(); }

} // extern "C"
