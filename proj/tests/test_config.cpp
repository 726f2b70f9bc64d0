#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "common.hpp"
#include "config.hpp"
#include "output.hpp"
#include "runner.hpp"

using namespace mvp;
namespace fs = std::filesystem;

namespace {

template <class F>
errc thrown_code(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return errc::ok;
}

std::string thrown_message(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

const char* kMinimal =
    "[scenario]\n"
    "name = mv_ou_periodic\n"
    "\n"
    "[grid]\n"
    "dt = 0.001\n"
    "periods = 30\n"
    "\n"
    "[experiment]\n"
    "name = pullback\n"
    "seed = 42\n"
    "n = 1024\n";

} // namespace

TEST_CASE("minimal config round-trips into typed fields") {
  RunConfig cfg = parse_config_text(kMinimal, "test");
  CHECK(cfg.scenario_name == "mv_ou_periodic");
  CHECK(cfg.experiment == "pullback");
  CHECK(cfg.dt == 0.001);
  CHECK(cfg.periods == 30.0);
  CHECK(cfg.seed == 42);
  CHECK(cfg.seed_set);
  CHECK(cfg.n_particles == 1024);
  CHECK(cfg.out_dir == "out");
  CHECK(cfg.emit_csv);
  CHECK(cfg.emit_json);
  CHECK_FALSE(cfg.emit_svg);
  Scenario s = scenario_from_config(cfg);
  CHECK(s.name == "mv_ou_periodic");
  ExpParams p = exp_params_from_config(cfg, 2);
  CHECK(p.workers == 2);
  CHECK(p.n_particles == 1024);
}

TEST_CASE("replica count parses and is range-checked") {
  std::string text = kMinimal;
  text += "replicas = 12\n";
  RunConfig cfg = parse_config_text(text, "test");
  CHECK(cfg.poc_replicas == 12);
  CHECK(exp_params_from_config(cfg, 1).poc_replicas == 12);
  CHECK(parse_config_text(kMinimal, "test").poc_replicas == 16);

  std::string zero = kMinimal;
  zero += "replicas = 0\n";
  CHECK(thrown_code([&] { (void)parse_config_text(zero, "test"); }) == errc::validation_error);
  CHECK(thrown_message([&] { (void)parse_config_text(zero, "test"); }).find("replicas") !=
        std::string::npos);
}

TEST_CASE("config rejections carry the offending key") {
  std::string text = kMinimal;
  text += "foo = 1\n";
  CHECK(thrown_code([&] { (void)parse_config_text(text, "test"); }) == errc::parse_error);
  CHECK(thrown_message([&] { (void)parse_config_text(text, "test"); }).find("foo") !=
        std::string::npos);

  std::string bad_section = kMinimal;
  bad_section += "\n[bogus]\nx = 1\n";
  CHECK(thrown_code([&] { (void)parse_config_text(bad_section, "test"); }) == errc::parse_error);

  std::string bad_scenario =
      "[scenario]\nname = mv_ou_periodic\nfoo = 2\n"
      "[grid]\ndt = 0.001\n[experiment]\nname = pullback\nseed = 1\nn = 8\n";
  CHECK(thrown_code([&] { (void)parse_config_text(bad_scenario, "test"); }) == errc::parse_error);
  CHECK(thrown_message([&] { (void)parse_config_text(bad_scenario, "test"); }).find("foo") !=
        std::string::npos);

  std::string no_seed =
      "[scenario]\nname = mv_ou_periodic\n[grid]\ndt = 0.001\n"
      "[experiment]\nname = pullback\nn = 8\n";
  CHECK(thrown_code([&] { (void)parse_config_text(no_seed, "test"); }) == errc::validation_error);
  CHECK(thrown_message([&] { (void)parse_config_text(no_seed, "test"); }).find("seed") !=
        std::string::npos);

  std::string bad_exp =
      "[scenario]\nname = mv_ou_periodic\n[grid]\ndt = 0.001\n"
      "[experiment]\nname = warp\nseed = 1\nn = 8\n";
  CHECK(thrown_code([&] { (void)parse_config_text(bad_exp, "test"); }) == errc::validation_error);

  std::string bad_name =
      "[scenario]\nname = quux\n[grid]\ndt = 0.001\n"
      "[experiment]\nname = pullback\nseed = 1\nn = 8\n";
  CHECK(thrown_code([&] { (void)parse_config_text(bad_name, "test"); }) == errc::validation_error);

  std::string misaligned =
      "[scenario]\nname = mv_ou_periodic\n[grid]\ndt = 0.0003\n"
      "[experiment]\nname = pullback\nseed = 1\nn = 8\n";
  CHECK(thrown_code([&] { (void)parse_config_text(misaligned, "test"); }) ==
        errc::validation_error);
}

TEST_CASE("scenario parameter overrides reach the factory") {
  std::string text =
      "[scenario]\nname = mv_ou_periodic\na = 2.0\nsigma0 = 0.5\n"
      "[grid]\ndt = 0.001\n[experiment]\nname = pullback\nseed = 1\nn = 8\n";
  RunConfig cfg = parse_config_text(text, "test");
  Scenario s = scenario_from_config(cfg);
  CHECK(s.ou.a == 2.0);
  CHECK(s.ou.sigma0 == 0.5);

  std::string pw =
      "[scenario]\nname = piecewise_k1\nclamped = false\nkappa = 0.05\n"
      "[grid]\ndt = 0.001\n[experiment]\nname = pathwise_periodicity\nseed = 1\nn = 8\n";
  RunConfig cfg2 = parse_config_text(pw, "test");
  Scenario s2 = scenario_from_config(cfg2);
  CHECK(s2.K2t(0.0) == doctest::Approx(0.05).epsilon(1e-14)); // as-written keeps K2 = kappa
}

TEST_CASE("init specifications parse for both marginals") {
  std::string text =
      "[scenario]\nname = mv_ou_periodic\n[grid]\ndt = 0.001\n"
      "[experiment]\nname = contraction\nseed = 1\nn = 8\n"
      "init = deterministic\ninit_x0 = 0.5\n"
      "init_b = gaussian\ninit_b_mean = 1.5\ninit_b_sd = 0.25\n";
  RunConfig cfg = parse_config_text(text, "test");
  CHECK(cfg.init.kind == InitSpec::Kind::Deterministic);
  REQUIRE(cfg.init.x0.size() == 1);
  CHECK(cfg.init.x0[0] == 0.5);
  CHECK(cfg.init_b_set);
  CHECK(cfg.init_b.kind == InitSpec::Kind::Gaussian);
  CHECK(cfg.init_b.mean == 1.5);
  CHECK(cfg.init_b.sd == 0.25);

  std::string plain =
      "[scenario]\nname = mv_ou_periodic\n[grid]\ndt = 0.001\n"
      "[experiment]\nname = contraction\nseed = 1\nn = 8\n";
  CHECK_FALSE(parse_config_text(plain, "test").init_b_set);
}

TEST_CASE("output flags and large seeds") {
  std::string text =
      "[scenario]\nname = mv_ou_periodic\n[grid]\ndt = 0.001\n"
      "[experiment]\nname = pullback\nseed = 18446744073709551615\nn = 8\n"
      "[output]\ndir = artifacts\ncsv = false\nsvg = true\n";
  RunConfig cfg = parse_config_text(text, "test");
  CHECK(cfg.seed == 18446744073709551615ull);
  CHECK(cfg.out_dir == "artifacts");
  CHECK_FALSE(cfg.emit_csv);
  CHECK(cfg.emit_svg);
  CHECK(cfg.emit_json);
}

TEST_CASE("reading a missing config fails with an io error") {
  CHECK(thrown_code([] { (void)read_config_text("no_such_file_here.ini"); }) == errc::io_error);
}

TEST_CASE("manifest re-runs reproduce the report byte for byte") {
  const char* text =
      "[scenario]\nname = mv_ou_periodic\n"
      "[grid]\ndt = 0.01\nperiods = 2\n"
      "[experiment]\nname = pathwise_periodicity\nseed = 7\nn = 12\n";
  fs::path dir = fs::path("test_config_out") / "first";
  fs::remove_all("test_config_out");

  RunResult first = run_config_text(text, "inline", dir.string());
  CHECK(first.report.verdict == Verdict::Pass);
  CHECK(fs::exists(dir / "report.json"));
  CHECK(fs::exists(dir / "manifest.json"));

  // The manifest is itself an accepted config carrying the original text.
  std::string round = read_config_text((dir / "manifest.json").string());
  CHECK(round == text);
  RunResult second =
      run_config_path((dir / "manifest.json").string(), (fs::path("test_config_out") / "second").string());
  CHECK(report_numerics_fingerprint(second.report) ==
        report_numerics_fingerprint(first.report));
  fs::remove_all("test_config_out");
}

TEST_CASE("manifest without embedded config text is rejected") {
  fs::create_directories("test_config_out_bad");
  const std::string p = "test_config_out_bad/manifest.json";
  std::ofstream out(p);
  out << "{\"format\": \"mvperiodic-manifest-1\"}\n";
  out.close();
  CHECK(thrown_code([&] { (void)read_config_text(p); }) == errc::parse_error);
  fs::remove_all("test_config_out_bad");
}
