#include "output.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "common.hpp"
#include "noise.hpp"

namespace mvp {

using ordered_json = nlohmann::ordered_json;

const char* code_version() {
#ifdef MVP_CODE_VERSION
  return MVP_CODE_VERSION;
#else
  return "dev";
#endif
}

namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string iso_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

ordered_json report_body(const Report& r, bool with_volatile) {
  ordered_json j;
  j["experiment"] = r.experiment;
  j["scenario"] = r.scenario;
  j["verdict"] = verdict_name(r.verdict);
  j["seed"] = r.seed;
  if (with_volatile) j["workers"] = r.workers;
  j["grid"] = {{"t0", r.t0}, {"dt", r.dt}, {"period_steps", r.period_steps},
               {"n_steps", r.n_steps}};
  ordered_json det = ordered_json::object();
  for (const auto& kv : r.details) det[kv.first] = kv.second;
  j["details"] = det;
  ordered_json fits = ordered_json::array();
  for (const auto& f : r.fits)
    fits.push_back({{"name", f.name},
                    {"C", f.fit.C},
                    {"rate", f.fit.rate},
                    {"r_squared", f.fit.r_squared},
                    {"n_points", f.fit.n_points}});
  j["fits"] = fits;
  ordered_json series = ordered_json::array();
  for (const auto& s : r.series) {
    ordered_json sj;
    sj["name"] = s.name;
    sj["columns"] = s.columns;
    sj["csv_file"] = s.name + ".csv";
    sj["n_rows"] = s.rows.size();
    series.push_back(sj);
  }
  j["series"] = series;
  j["notes"] = r.notes;
  if (with_volatile) {
    j["runtime_s"] = r.runtime_s;
    j["timestamp"] = iso_timestamp();
  }
  return j;
}

} // namespace

std::string report_to_json(const Report& r) { return report_body(r, true).dump(2) + "\n"; }

std::string report_numerics_fingerprint(const Report& r) {
  std::ostringstream out;
  out << report_body(r, false).dump(2) << "\n";
  // Series rows are not embedded in report.json (they live in CSVs), so the
  // fingerprint appends them explicitly.
  for (const auto& s : r.series) out << s.name << "\n" << series_to_csv(s);
  return out.str();
}

std::string series_to_csv(const Series& s) {
  std::ostringstream out;
  for (std::size_t c = 0; c < s.columns.size(); ++c)
    out << (c ? "," : "") << s.columns[c];
  out << "\n";
  for (const auto& row : s.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) out << (c ? "," : "") << fmt17(row[c]);
    out << "\n";
  }
  return out.str();
}

std::string render_series_svg(const Series& s) {
  // Minimal polyline chart of column 1 vs column 0; log ordinate when every
  // value is positive. Decorative only, never an input to verdicts.
  const int W = 640, H = 400, ML = 70, MR = 20, MT = 20, MB = 50;
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\">\n";
  out << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  if (s.rows.size() >= 2 && s.columns.size() >= 2) {
    bool logy = true;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& row : s.rows) {
      if (row[1] <= 0.0) logy = false;
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& row : s.rows) {
      const double x = row[0];
      const double y = logy ? std::log10(row[1]) : row[1];
      pts.emplace_back(x, y);
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (ymax <= ymin) ymax = ymin + 1.0;
    auto px = [&](double x) { return ML + (x - xmin) / (xmax - xmin) * (W - ML - MR); };
    auto py = [&](double y) { return H - MB - (y - ymin) / (ymax - ymin) * (H - MT - MB); };
    out << "<line x1=\"" << ML << "\" y1=\"" << H - MB << "\" x2=\"" << W - MR << "\" y2=\""
        << H - MB << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\"" << H - MB
        << "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
      const double fx = xmin + (xmax - xmin) * tick / 4.0;
      const double fy = ymin + (ymax - ymin) * tick / 4.0;
      out << "<text x=\"" << px(fx) << "\" y=\"" << H - MB + 18
          << "\" font-size=\"11\" text-anchor=\"middle\">" << fmt17(fx).substr(0, 8)
          << "</text>\n";
      out << "<text x=\"" << ML - 6 << "\" y=\"" << py(fy) + 4
          << "\" font-size=\"11\" text-anchor=\"end\">"
          << (logy ? ("1e" + fmt17(fy).substr(0, 6)) : fmt17(fy).substr(0, 8)) << "</text>\n";
    }
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : pts) out << px(p.first) << "," << py(p.second) << " ";
    out << "\"/>\n";
    out << "<text x=\"" << (W + ML - MR) / 2 << "\" y=\"" << H - 12
        << "\" font-size=\"12\" text-anchor=\"middle\">" << s.columns[0] << "</text>\n";
    out << "<text x=\"" << 16 << "\" y=\"" << MT - 4 << "\" font-size=\"12\">" << s.columns[1]
        << (logy ? " (log scale)" : "") << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string manifest_to_json(const RunConfig& cfg, const std::string& config_text,
                             const Report& r) {
  ordered_json j;
  j["format"] = "mvperiodic-manifest-1";
  j["config_text"] = config_text;
  j["seed"] = r.seed;
  j["rng"] = {{"scheme", kRngScheme},
              {"seed", r.seed},
              {"dt", r.dt},
              {"t0", r.t0},
              {"period_steps", r.period_steps}};
  j["scenario"] = r.scenario;
  j["experiment"] = r.experiment;
  j["out_dir"] = cfg.out_dir;
  j["code_version"] = code_version();
  return j.dump(2) + "\n";
}

std::string write_run_outputs(const Report& r, const RunConfig& cfg,
                              const std::string& config_text, const std::string& out_dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec, errc::io_error, "cannot create output directory: " + out_dir);

  auto write_file = [&](const std::string& name, const std::string& content) {
    const std::string path = out_dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), errc::io_error, "cannot write " + path);
    out << content;
    require(static_cast<bool>(out), errc::io_error, "write failed on " + path);
    return path;
  };

  std::string report_path;
  if (cfg.emit_json) report_path = write_file("report.json", report_to_json(r));
  if (cfg.emit_csv)
    for (const auto& s : r.series) write_file(s.name + ".csv", series_to_csv(s));
  if (cfg.emit_svg)
    for (const auto& s : r.series) write_file(s.name + ".svg", render_series_svg(s));
  write_file("manifest.json", manifest_to_json(cfg, config_text, r));
  return report_path.empty() ? out_dir : report_path;
}

} // namespace mvp
