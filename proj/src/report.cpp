#include "fencewire/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

namespace fencewire {

using nlohmann::json;

namespace {

std::string fmt(double v, int decimals) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

json counts_json(const RunCounts& c) {
  json j;
  j["attempts"] = c.attempts;
  j["published"] = c.published;
  j["dropped"] = c.dropped;
  j["transport_errors"] = c.transport_errors;
  j["rate_limited"] = c.rate_limited;
  j["polls"] = c.polls;
  j["commands"] = c.commands;
  j["stale_faults"] = c.stale_faults;
  j["decode_warnings"] = c.decode_warnings;
  j["decode_errors"] = c.decode_errors;
  return j;
}

RunCounts counts_from_json(const json& j) {
  RunCounts c;
  c.attempts = j.value("attempts", std::uint64_t{0});
  c.published = j.value("published", std::uint64_t{0});
  c.dropped = j.value("dropped", std::uint64_t{0});
  c.transport_errors = j.value("transport_errors", std::uint64_t{0});
  c.rate_limited = j.value("rate_limited", std::uint64_t{0});
  c.polls = j.value("polls", std::uint64_t{0});
  c.commands = j.value("commands", std::uint64_t{0});
  c.stale_faults = j.value("stale_faults", std::uint64_t{0});
  c.decode_warnings = j.value("decode_warnings", std::uint64_t{0});
  c.decode_errors = j.value("decode_errors", std::uint64_t{0});
  return c;
}

std::string meta_line(const RunMetrics& m) {
  json j;
  j["csv_schema"] = kCsvSchemaVersion;
  j["scenario"] = m.scenario_name;
  j["run_mode"] = m.run_mode;
  j["duration"] = m.duration;
  j["tick"] = m.tick;
  j["seed"] = m.seed;
  j["envelope_radius"] = m.envelope_radius;
  j["d_stop"] = m.d_stop;
  j["d_slow"] = m.d_slow;
  j["stale_after"] = m.stale_after;
  j["nominal_speed"] = m.nominal_speed;
  j["rows"] = m.rows.size();
  j["channel_entries"] = m.channel_log.size();
  j["sensors"] = m.sensor_ids;
  j["counts"] = counts_json(m.counts);
  return j.dump();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("report: cannot write " + path.string());
  out << content;
}

std::string render_csv(const RunMetrics& m) {
  std::ostringstream out;
  out << "# fencewire-run v" << kCsvSchemaVersion << "\n";
  out << "# meta " << meta_line(m) << "\n";
  out << "t,true_range,bearing";
  for (const auto& id : m.sensor_ids) out << ",measured_" << id;
  out << ",entry_id,mode,override,robot_speed,latency_s\n";
  for (const auto& r : m.rows) {
    out << fmt(r.t, 4) << ',' << fmt(r.true_range, 6) << ',' << fmt(r.bearing, 3);
    for (const auto& v : r.measured) out << ',' << v;
    out << ',';
    if (r.entry_id) out << *r.entry_id;
    out << ',' << to_string(r.mode) << ',' << fmt(r.override_fraction, 6) << ','
        << fmt(r.robot_speed, 6) << ',';
    if (r.latency_s) out << fmt(*r.latency_s, 4);
    out << '\n';
  }
  return out.str();
}

// --- minimal self-contained SVG line charts --------------------------------

struct Series {
  std::string color;
  std::vector<std::pair<double, double>> points;
};

struct Markers {
  std::string color;
  std::vector<std::pair<double, double>> points;
};

std::string render_chart(const std::string& title, const std::string& y_label, double x_max,
                         double y_max, const std::vector<Series>& series,
                         const Markers* markers) {
  const double w = 860, h = 420, ml = 64, mr = 16, mt = 40, mb = 44;
  const double pw = w - ml - mr, ph = h - mt - mb;
  if (x_max <= 0) x_max = 1;
  if (y_max <= 0) y_max = 1;
  auto X = [&](double x) { return ml + x / x_max * pw; };
  auto Y = [&](double y) { return mt + ph - y / y_max * ph; };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" viewBox=\"0 0 " << w << " " << h << "\">\n";
  s << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"#ffffff\"/>\n";
  s << "<text x=\"" << ml << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << title
    << "</text>\n";
  // axes
  s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
    << "\" stroke=\"#333\"/>\n";
  s << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
    << mt + ph << "\" stroke=\"#333\"/>\n";
  s << "<text x=\"" << ml + pw / 2 << "\" y=\"" << h - 10
    << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">t [s]</text>\n";
  s << "<text x=\"16\" y=\"" << mt + ph / 2
    << "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " << mt + ph / 2
    << ")\" text-anchor=\"middle\">" << y_label << "</text>\n";
  // min/max ticks
  s << "<text x=\"" << ml << "\" y=\"" << mt + ph + 16
    << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">0</text>\n";
  s << "<text x=\"" << ml + pw << "\" y=\"" << mt + ph + 16
    << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << fmt(x_max, 2)
    << "</text>\n";
  s << "<text x=\"" << ml - 6 << "\" y=\"" << mt + ph
    << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">0</text>\n";
  s << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 10
    << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << fmt(y_max, 2)
    << "</text>\n";

  for (const auto& ser : series) {
    if (ser.points.empty()) continue;
    s << "<polyline fill=\"none\" stroke=\"" << ser.color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& [x, y] : ser.points) s << fmt(X(x), 2) << ',' << fmt(Y(y), 2) << ' ';
    s << "\"/>\n";
  }
  if (markers) {
    for (const auto& [x, y] : markers->points)
      s << "<circle class=\"sample\" cx=\"" << fmt(X(x), 2) << "\" cy=\"" << fmt(Y(y), 2)
        << "\" r=\"3.5\" fill=\"" << markers->color << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

// Thin a row series to at most `cap` points, always keeping the last row.
std::vector<std::pair<double, double>> thin(const std::vector<TickRow>& rows,
                                            double (*pick)(const TickRow&), std::size_t cap) {
  std::vector<std::pair<double, double>> pts;
  if (rows.empty()) return pts;
  std::size_t stride = std::max<std::size_t>(1, rows.size() / cap);
  for (std::size_t i = 0; i < rows.size(); i += stride) pts.emplace_back(rows[i].t, pick(rows[i]));
  if (pts.back().first != rows.back().t)
    pts.emplace_back(rows.back().t, pick(rows.back()));
  return pts;
}

std::optional<double> entry_sample_time(const ciot::ChannelEntry& e) {
  auto it = e.fields.find(ciot::wire::kTimeSlot);
  if (it == e.fields.end()) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(it->second.c_str(), &end);
  if (end == it->second.c_str() || *end != '\0' || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<double> entry_min_distance(const ciot::ChannelEntry& e) {
  std::optional<double> best;
  for (const auto& [slot, value] : e.fields) {
    if (slot >= ciot::wire::kTimeSlot) continue;
    char* end = nullptr;
    double v = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0' || !std::isfinite(v) || v < 0.0) continue;
    if (!best || v < *best) best = v;
  }
  return best;
}

std::string render_distance_svg(const RunMetrics& m) {
  double y_max = 0.0;
  for (const auto& r : m.rows) y_max = std::max(y_max, r.true_range);
  Markers samples{"#d62728", {}};
  for (const auto& le : m.channel_log) {
    auto ts = entry_sample_time(le.entry);
    auto d = entry_min_distance(le.entry);
    if (!ts || !d) continue;
    samples.points.emplace_back(*ts, *d);
    y_max = std::max(y_max, *d);
  }
  y_max *= 1.05;
  std::vector<Series> series;
  series.push_back({"#1f77b4", thin(m.rows, [](const TickRow& r) { return r.true_range; }, 800)});
  return render_chart("object distance vs time", "distance [m]", m.duration, y_max, series,
                      &samples);
}

std::string render_override_svg(const RunMetrics& m) {
  std::vector<Series> series;
  series.push_back(
      {"#2ca02c", thin(m.rows, [](const TickRow& r) { return r.override_fraction; }, 800)});
  return render_chart("speed override vs time", "override [-]", m.duration, 1.1, series, nullptr);
}

std::string render_speed_svg(const RunMetrics& m) {
  std::vector<Series> series;
  series.push_back({"#9467bd", thin(m.rows, [](const TickRow& r) { return r.robot_speed; }, 800)});
  return render_chart("robot speed vs time", "speed [m/s]", m.duration,
                      m.nominal_speed * 1.1, series, nullptr);
}

}  // namespace

std::string summary_to_string(const RunMetrics& m) {
  json j;
  j["schema_version"] = kCsvSchemaVersion;
  j["scenario"] = m.scenario_name;
  j["run_mode"] = m.run_mode;
  j["duration"] = m.duration;
  j["tick"] = m.tick;
  j["seed"] = m.seed;
  j["rows"] = m.rows.size();
  j["channel_entries"] = m.channel_log.size();
  j["latency"] = {{"count", m.latency.count},
                  {"p50", m.latency.p50},
                  {"p95", m.latency.p95},
                  {"max", m.latency.max}};
  j["safety"] = {{"min_object_clearance", m.safety.min_object_clearance},
                 {"stop_achieved_before_d_stop", m.safety.stop_achieved_before_d_stop},
                 {"violation_ticks", m.safety.violation_ticks}};
  j["counts"] = counts_json(m.counts);
  return j.dump(2) + "\n";
}

ReportPaths emit_report(const RunMetrics& m, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ReportPaths paths;
  paths.csv = out_dir / "run.csv";
  paths.summary = out_dir / "summary.json";
  paths.distance_svg = out_dir / "distance.svg";
  paths.override_svg = out_dir / "override.svg";
  paths.speed_svg = out_dir / "speed.svg";

  write_file(paths.csv, render_csv(m));
  write_file(paths.summary, summary_to_string(m));
  write_file(paths.distance_svg, render_distance_svg(m));
  write_file(paths.override_svg, render_override_svg(m));
  write_file(paths.speed_svg, render_speed_svg(m));
  return paths;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s, const char* what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ReplayError(std::string("replay: unparsable ") + what + " value '" + s + "'");
  return v;
}

}  // namespace

RunMetrics replay_csv(const std::filesystem::path& csv_file) {
  std::ifstream in(csv_file);
  if (!in) throw ReplayError("replay: cannot open " + csv_file.string());

  std::string line;
  if (!std::getline(in, line)) throw ReplayError("replay: empty file");
  {
    std::istringstream hs(line);
    std::string hash, name, ver;
    hs >> hash >> name >> ver;
    if (hash != "#" || name != "fencewire-run")
      throw ReplayError("replay: not a fencewire run csv");
    if (ver != "v" + std::to_string(kCsvSchemaVersion))
      throw ReplayError("replay: unsupported csv schema " + ver + " (this build reads v" +
                        std::to_string(kCsvSchemaVersion) + ")");
  }
  if (!std::getline(in, line) || line.rfind("# meta ", 0) != 0)
    throw ReplayError("replay: missing meta line");
  json meta = json::parse(line.substr(7), nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) throw ReplayError("replay: corrupt meta line");

  RunMetrics m;
  m.scenario_name = meta.value("scenario", std::string{});
  m.run_mode = meta.value("run_mode", std::string{});
  m.duration = meta.value("duration", 0.0);
  m.tick = meta.value("tick", 0.0);
  m.seed = meta.value("seed", std::uint64_t{0});
  m.envelope_radius = meta.value("envelope_radius", 0.0);
  m.d_stop = meta.value("d_stop", 0.0);
  m.d_slow = meta.value("d_slow", 0.0);
  m.stale_after = meta.value("stale_after", 0.0);
  m.nominal_speed = meta.value("nominal_speed", 0.0);
  if (meta.contains("sensors"))
    m.sensor_ids = meta["sensors"].get<std::vector<std::string>>();
  m.counts = counts_from_json(meta.value("counts", json::object()));
  std::size_t expect_rows = meta.value("rows", std::size_t{0});
  std::size_t channel_entries = meta.value("channel_entries", std::size_t{0});

  if (!std::getline(in, line)) throw ReplayError("replay: missing column header");
  const std::size_t n_sensors = m.sensor_ids.size();
  const std::size_t n_cols = 3 + n_sensors + 5;

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cols = split_csv_line(line);
    if (cols.size() != n_cols)
      throw ReplayError("replay: row " + std::to_string(m.rows.size() + 1) + " has " +
                        std::to_string(cols.size()) + " columns, expected " +
                        std::to_string(n_cols));
    TickRow r;
    r.t = parse_double(cols[0], "t");
    r.true_range = parse_double(cols[1], "true_range");
    r.bearing = parse_double(cols[2], "bearing");
    for (std::size_t k = 0; k < n_sensors; ++k) r.measured.push_back(cols[3 + k]);
    std::size_t c = 3 + n_sensors;
    if (!cols[c].empty()) r.entry_id = std::stoull(cols[c]);
    auto mode = mode_from_string(cols[c + 1]);
    if (!mode) throw ReplayError("replay: unknown mode '" + cols[c + 1] + "'");
    r.mode = *mode;
    r.override_fraction = parse_double(cols[c + 2], "override");
    r.robot_speed = parse_double(cols[c + 3], "robot_speed");
    if (!cols[c + 4].empty()) r.latency_s = parse_double(cols[c + 4], "latency_s");
    m.rows.push_back(std::move(r));
  }

  if (m.rows.size() != expect_rows)
    throw ReplayError("replay: file holds " + std::to_string(m.rows.size()) +
                      " rows but metadata promises " + std::to_string(expect_rows) +
                      " (truncated?)");

  // channel_entries is only carried through for the summary; the log itself
  // does not live in the CSV.
  m.channel_log.resize(channel_entries);
  for (std::size_t i = 0; i < channel_entries; ++i) m.channel_log[i].entry.entry_id = i + 1;

  m.latency = latency_from_rows(m.rows);
  m.safety = safety_from_rows(m.rows, m.envelope_radius, m.d_stop, m.d_slow);
  return m;
}

}  // namespace fencewire
