#include "config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "common.hpp"

namespace mvp {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string unquote(const std::string& s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\'')))
    return s.substr(1, s.size() - 2);
  return s;
}

[[noreturn]] void parse_fail(const std::string& origin, int line, const std::string& what) {
  fail(errc::parse_error, origin + ":" + std::to_string(line) + ": " + what);
}

double to_double(const std::string& v, const std::string& origin, int line,
                 const std::string& key) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    parse_fail(origin, line, "key '" + key + "': not a number: '" + v + "'");
  }
}

std::int64_t to_int(const std::string& v, const std::string& origin, int line,
                    const std::string& key) {
  try {
    std::size_t used = 0;
    const long long x = std::stoll(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    parse_fail(origin, line, "key '" + key + "': not an integer: '" + v + "'");
  }
}

std::uint64_t to_uint(const std::string& v, const std::string& origin, int line,
                      const std::string& key) {
  try {
    std::size_t used = 0;
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument("trailing characters");
    return x;
  } catch (const std::exception&) {
    parse_fail(origin, line, "key '" + key + "': not a nonnegative integer: '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& origin, int line,
             const std::string& key) {
  std::string w = v;
  std::transform(w.begin(), w.end(), w.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (w == "true" || w == "1" || w == "yes" || w == "on") return true;
  if (w == "false" || w == "0" || w == "no" || w == "off") return false;
  parse_fail(origin, line, "key '" + key + "': not a boolean: '" + v + "'");
}

template <class T, class F>
std::vector<T> to_list(const std::string& v, const F& conv) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(conv(item));
  }
  return out;
}

struct Keyed {
  std::string value;
  int line = 0;
};

} // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  std::map<std::string, Keyed> scen; // raw scenario params with line numbers
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int lineno = 0;
  bool saw_init_b = false;

  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = raw;
    // Strip comments outside quotes (config values here never contain # or ;).
    const std::size_t hash = line.find_first_of("#;");
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']') parse_fail(origin, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section != "scenario" && section != "grid" && section != "experiment" &&
          section != "output")
        parse_fail(origin, lineno, "unknown section '" + section + "'");
      continue;
    }

    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) parse_fail(origin, lineno, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = unquote(trim(line.substr(eq + 1)));
    if (key.empty()) parse_fail(origin, lineno, "empty key");
    if (section.empty()) parse_fail(origin, lineno, "key '" + key + "' outside any section");

    if (section == "scenario") {
      if (key == "name") cfg.scenario_name = val;
      else scen[key] = {val, lineno};
    } else if (section == "grid") {
      if (key == "t0") cfg.t0 = to_double(val, origin, lineno, key);
      else if (key == "dt") cfg.dt = to_double(val, origin, lineno, key);
      else if (key == "periods") cfg.periods = to_double(val, origin, lineno, key);
      else parse_fail(origin, lineno, "unknown key '" + key + "' in [grid]");
    } else if (section == "experiment") {
      if (key == "name") cfg.experiment = val;
      else if (key == "seed") {
        cfg.seed = to_uint(val, origin, lineno, key);
        cfg.seed_set = true;
      } else if (key == "n") cfg.n_particles = to_int(val, origin, lineno, key);
      else if (key == "m_ref") cfg.m_ref = to_int(val, origin, lineno, key);
      else if (key == "r") cfg.r_replicas = to_int(val, origin, lineno, key);
      else if (key == "replicas") cfg.poc_replicas = to_int(val, origin, lineno, key);
      else if (key == "n_list")
        cfg.n_list = to_list<std::int64_t>(
            val, [&](const std::string& s) { return to_int(s, origin, lineno, key); });
      else if (key == "horizons")
        cfg.horizons = to_list<int>(val, [&](const std::string& s) {
          return static_cast<int>(to_int(s, origin, lineno, key));
        });
      else if (key == "rate_floor") cfg.rate_floor = to_double(val, origin, lineno, key);
      else if (key == "slope_ceiling") cfg.slope_ceiling = to_double(val, origin, lineno, key);
      else if (key == "eps0") cfg.eps0 = to_double(val, origin, lineno, key);
      else if (key == "eps_coupling") cfg.eps_coupling = to_double(val, origin, lineno, key);
      else if (key == "workers") cfg.workers = static_cast<int>(to_int(val, origin, lineno, key));
      else if (key == "init") {
        if (val == "gaussian") cfg.init.kind = InitSpec::Kind::Gaussian;
        else if (val == "deterministic") cfg.init.kind = InitSpec::Kind::Deterministic;
        else parse_fail(origin, lineno, "init must be 'gaussian' or 'deterministic'");
      } else if (key == "init_mean") cfg.init.mean = to_double(val, origin, lineno, key);
      else if (key == "init_sd") cfg.init.sd = to_double(val, origin, lineno, key);
      else if (key == "init_x0")
        cfg.init.x0 = to_list<double>(
            val, [&](const std::string& s) { return to_double(s, origin, lineno, key); });
      else if (key == "init_b") {
        if (val == "gaussian") cfg.init_b.kind = InitSpec::Kind::Gaussian;
        else if (val == "deterministic") cfg.init_b.kind = InitSpec::Kind::Deterministic;
        else parse_fail(origin, lineno, "init_b must be 'gaussian' or 'deterministic'");
        saw_init_b = true;
      } else if (key == "init_b_mean") {
        cfg.init_b.mean = to_double(val, origin, lineno, key);
        saw_init_b = true;
      } else if (key == "init_b_sd") {
        cfg.init_b.sd = to_double(val, origin, lineno, key);
        saw_init_b = true;
      } else if (key == "init_b_x0") {
        cfg.init_b.x0 = to_list<double>(
            val, [&](const std::string& s) { return to_double(s, origin, lineno, key); });
        saw_init_b = true;
      } else parse_fail(origin, lineno, "unknown key '" + key + "' in [experiment]");
    } else { // output
      if (key == "dir") cfg.out_dir = val;
      else if (key == "csv") cfg.emit_csv = to_bool(val, origin, lineno, key);
      else if (key == "json") cfg.emit_json = to_bool(val, origin, lineno, key);
      else if (key == "svg") cfg.emit_svg = to_bool(val, origin, lineno, key);
      else parse_fail(origin, lineno, "unknown key '" + key + "' in [output]");
    }
  }

  cfg.init_b_set = saw_init_b;
  require(!cfg.scenario_name.empty(), errc::validation_error, "scenario name missing");
  require(!cfg.experiment.empty(), errc::validation_error, "experiment name missing");
  const bool known_exp = cfg.experiment == "pathwise_periodicity" ||
                         cfg.experiment == "pullback" || cfg.experiment == "contraction" ||
                         cfg.experiment == "poc" || cfg.experiment == "law_periodicity";
  require(known_exp, errc::validation_error,
          "unknown experiment '" + cfg.experiment + "'");
  require(cfg.seed_set, errc::validation_error, "seed is required (no wall-clock seeding)");
  require(cfg.poc_replicas >= 1 && cfg.poc_replicas <= 64, errc::validation_error,
          "replicas must be in [1, 64]");

  // Validate scenario parameter keys and the grid/period alignment here so a
  // bad config fails before any simulation starts.
  for (const auto& kv : scen) cfg.scenario_params[kv.first] = kv.second.value;
  const Scenario probe = scenario_from_config(cfg); // throws on unknown keys
  if (cfg.dt > 0.0) {
    const std::int64_t m = static_cast<std::int64_t>(std::llround(probe.tau / cfg.dt));
    require(m >= 1 && std::abs(static_cast<double>(m) * cfg.dt - probe.tau) <= 1e-9 * probe.tau,
            errc::validation_error, "grid not period-aligned");
  }
  return cfg;
}

std::string read_config_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), errc::io_error, "cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  const std::size_t first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    // Emitted manifest: re-run from the embedded config text.
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
      fail(errc::parse_error, path + ": invalid manifest JSON: " + e.what());
    }
    require(j.contains("config_text") && j["config_text"].is_string(), errc::parse_error,
            path + ": manifest lacks a config_text field");
    return j["config_text"].get<std::string>();
  }
  return text;
}

RunConfig parse_config(const std::string& path) {
  return parse_config_text(read_config_text(path), path);
}

namespace {

double param_double(const std::map<std::string, std::string>& m, const std::string& key,
                    double dflt) {
  const auto it = m.find(key);
  if (it == m.end()) return dflt;
  try {
    std::size_t used = 0;
    const double x = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    fail(errc::parse_error, "scenario parameter '" + key + "': not a number: '" +
                                it->second + "'");
  }
}

bool param_bool(const std::map<std::string, std::string>& m, const std::string& key,
                bool dflt) {
  const auto it = m.find(key);
  if (it == m.end()) return dflt;
  std::string w = it->second;
  std::transform(w.begin(), w.end(), w.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (w == "true" || w == "1" || w == "yes") return true;
  if (w == "false" || w == "0" || w == "no") return false;
  fail(errc::parse_error, "scenario parameter '" + key + "': not a boolean");
}

void check_keys(const std::map<std::string, std::string>& m,
                const std::vector<std::string>& allowed) {
  for (const auto& kv : m) {
    if (std::find(allowed.begin(), allowed.end(), kv.first) == allowed.end())
      fail(errc::parse_error, "unknown key '" + kv.first + "' in [scenario]");
  }
}

} // namespace

Scenario scenario_from_config(const RunConfig& cfg) {
  const auto& m = cfg.scenario_params;
  if (cfg.scenario_name == "mv_ou_periodic") {
    check_keys(m, {"a", "b", "A", "sigma0", "tau", "dim"});
    MvOuParams p;
    p.a = param_double(m, "a", p.a);
    p.b = param_double(m, "b", p.b);
    p.A = param_double(m, "A", p.A);
    p.sigma0 = param_double(m, "sigma0", p.sigma0);
    p.tau = param_double(m, "tau", p.tau);
    p.dim = static_cast<int>(param_double(m, "dim", p.dim));
    return make_mv_ou_periodic(p);
  }
  if (cfg.scenario_name == "piecewise_k1") {
    check_keys(m, {"kappa", "clamped", "tau"});
    PiecewiseK1Params p;
    p.kappa = param_double(m, "kappa", p.kappa);
    p.clamped = param_bool(m, "clamped", p.clamped);
    p.tau = param_double(m, "tau", p.tau);
    return make_piecewise_k1(p);
  }
  if (cfg.scenario_name == "truncated_ou") {
    check_keys(m, {"n", "a", "alpha_amp", "tau"});
    TruncatedOuParams p;
    p.n = param_double(m, "n", p.n);
    p.a = param_double(m, "a", p.a);
    p.alpha_amp = param_double(m, "alpha_amp", p.alpha_amp);
    p.tau = param_double(m, "tau", p.tau);
    return make_truncated_ou(p);
  }
  if (cfg.scenario_name == "double_well_partial") {
    check_keys(m, {"theta", "k2", "alpha_amp", "tau", "dim", "sine_sigma", "k3"});
    DoubleWellParams p;
    p.theta = param_double(m, "theta", p.theta);
    p.k2 = param_double(m, "k2", p.k2);
    p.alpha_amp = param_double(m, "alpha_amp", p.alpha_amp);
    p.tau = param_double(m, "tau", p.tau);
    p.dim = static_cast<int>(param_double(m, "dim", p.dim));
    p.sine_sigma = param_bool(m, "sine_sigma", p.sine_sigma);
    p.k3 = param_double(m, "k3", p.k3);
    return make_double_well_partial(p);
  }
  std::string names;
  for (const auto& n : builtin_scenario_names()) names += (names.empty() ? "" : ", ") + n;
  fail(errc::validation_error,
       "unknown scenario '" + cfg.scenario_name + "' (available: " + names + ")");
}

ExpParams exp_params_from_config(const RunConfig& cfg, int resolved_workers) {
  ExpParams p;
  p.seed = cfg.seed;
  p.workers = resolved_workers;
  p.t0 = cfg.t0;
  p.dt = cfg.dt;
  p.periods = cfg.periods;
  p.n_particles = cfg.n_particles;
  p.m_ref = cfg.m_ref;
  p.r_replicas = cfg.r_replicas;
  p.poc_replicas = cfg.poc_replicas;
  p.n_list = cfg.n_list;
  p.horizons = cfg.horizons;
  p.rate_floor = cfg.rate_floor;
  p.slope_ceiling = cfg.slope_ceiling;
  p.eps0 = cfg.eps0;
  p.eps_coupling = cfg.eps_coupling;
  p.init = cfg.init;
  return p;
}

} // namespace mvp
