#include "fencewire/scenario.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fencewire {

using nlohmann::json;

SupervisorConfig ScenarioSpec::supervisor_config() const {
  SupervisorConfig cfg;
  cfg.poll_interval = poll_interval;
  cfg.staleness.stale_after = stale_after;
  cfg.zones = zones;
  for (const auto& s : sensors) cfg.fence.push_back(s.placement);
  cfg.quantum = sensors.empty() ? 0.01 : sensors.front().quantum;
  cfg.max_range = 0.0;
  for (const auto& s : sensors) cfg.max_range = std::max(cfg.max_range, s.max_range);
  cfg.clock_skew_grace = clock_skew_grace;
  cfg.transport_grace = transport_grace;
  cfg.use_refined = use_refined;
  cfg.refine_window = refine_window;
  return cfg;
}

namespace {

bool divides(double interval, double tick) {
  if (tick <= 0.0 || interval <= 0.0) return false;
  double k = interval / tick;
  return std::fabs(k - std::round(k)) < 1e-9 * std::max(1.0, k);
}

void check_interval(std::vector<ValidationIssue>& issues, const std::string& path,
                    double interval, double tick) {
  if (!(interval > 0.0)) {
    issues.push_back({path, "must be > 0"});
  } else if (!divides(interval, tick)) {
    issues.push_back({path, "must be an integer multiple of tick"});
  }
}

}  // namespace

std::vector<ValidationIssue> validate(const ScenarioSpec& spec) {
  std::vector<ValidationIssue> issues;

  if (spec.schema_version != kScenarioSchemaVersion)
    issues.push_back({"schema_version",
                      "unsupported version " + std::to_string(spec.schema_version) +
                          " (this build reads version " +
                          std::to_string(kScenarioSchemaVersion) + ")"});
  if (!(spec.duration > 0.0)) issues.push_back({"duration", "must be > 0"});
  if (!(spec.tick > 0.0)) issues.push_back({"tick", "must be > 0"});

  if (spec.tick > 0.0) {
    check_interval(issues, "timing.poll_interval", spec.poll_interval, spec.tick);
    if (!(spec.stale_after > 0.0)) issues.push_back({"timing.stale_after", "must be > 0"});
    if (!(spec.min_write_interval > 0.0))
      issues.push_back({"timing.min_write_interval", "must be > 0"});
    if (spec.clock_skew_grace < 0.0)
      issues.push_back({"timing.clock_skew_grace", "must be >= 0"});
    if (spec.transport_grace < 1)
      issues.push_back({"timing.transport_grace", "must be >= 1"});
  }

  if (spec.initial_range < 0.0) issues.push_back({"object.initial_range", "must be >= 0"});
  for (std::size_t i = 0; i < spec.segments.size(); ++i) {
    const auto& seg = spec.segments[i];
    std::string path = "object.segments[" + std::to_string(i) + "]";
    if (seg.start < 0.0) issues.push_back({path + ".start", "must be >= 0"});
    if (i > 0 && seg.start <= spec.segments[i - 1].start)
      issues.push_back({path + ".start", "segments must be in strictly increasing time order"});
  }

  if (spec.sensors.empty()) issues.push_back({"sensors", "at least one sensor is required"});
  std::set<std::string> ids;
  double fence_max_range = 0.0;
  for (std::size_t i = 0; i < spec.sensors.size(); ++i) {
    const auto& s = spec.sensors[i];
    std::string path = "sensors[" + std::to_string(i) + "]";
    if (s.placement.sensor_id.empty()) issues.push_back({path + ".sensor_id", "must be non-empty"});
    if (!ids.insert(s.placement.sensor_id).second)
      issues.push_back({path + ".sensor_id", "duplicate id '" + s.placement.sensor_id + "'"});
    if (s.placement.bearing_deg < 0.0 || s.placement.bearing_deg >= 360.0)
      issues.push_back({path + ".bearing", "must lie in [0, 360)"});
    if (s.placement.mount_radius < 0.0)
      issues.push_back({path + ".mount_radius", "must be >= 0"});
    if (spec.tick > 0.0) check_interval(issues, path + ".write_interval", s.write_interval, spec.tick);
    // A node writing faster than the channel accepts (split across the
    // writers sharing it) is a configuration error, not a runtime surprise.
    double writers = static_cast<double>(std::max<std::size_t>(spec.sensors.size(), 1));
    if (s.write_interval > 0.0 && s.write_interval < spec.min_write_interval / writers)
      issues.push_back({path + ".write_interval",
                        "below the channel's min_write_interval share (" +
                            std::to_string(spec.min_write_interval) + " s across " +
                            std::to_string(spec.sensors.size()) + " writer(s))"});
    if (s.noise_sigma < 0.0) issues.push_back({path + ".noise_sigma", "must be >= 0"});
    if (s.dropout_prob < 0.0 || s.dropout_prob > 1.0)
      issues.push_back({path + ".dropout_prob", "must lie in [0, 1]"});
    if (s.uplink_delay < 0.0) issues.push_back({path + ".uplink_delay", "must be >= 0"});
    if (!(s.quantum > 0.0)) issues.push_back({path + ".quantum", "must be > 0"});
    if (!(s.max_range > 0.0)) issues.push_back({path + ".max_range", "must be > 0"});
    fence_max_range = std::max(fence_max_range, s.max_range);
  }
  if (spec.sensors.size() > 7)
    issues.push_back({"sensors", "at most 7 sensors fit one channel (slot 8 carries sample time)"});

  if (!spec.sensors.empty()) {
    try {
      spec.zones.validate(fence_max_range);
    } catch (const std::invalid_argument& e) {
      issues.push_back({"zones", e.what()});
    }
  }
  try {
    spec.robot.validate(spec.zones);
  } catch (const std::invalid_argument& e) {
    issues.push_back({"robot", e.what()});
  }

  if (spec.comms.uplink_delay < 0.0) issues.push_back({"comms.uplink_delay", "must be >= 0"});
  if (spec.comms.dropout_prob < 0.0 || spec.comms.dropout_prob > 1.0)
    issues.push_back({"comms.dropout_prob", "must lie in [0, 1]"});
  for (std::size_t i = 0; i < spec.comms.blackouts.size(); ++i) {
    const auto& [b, e] = spec.comms.blackouts[i];
    if (!(b >= 0.0) || !(e > b))
      issues.push_back(
          {"comms.blackouts[" + std::to_string(i) + "]", "must satisfy 0 <= begin < end"});
  }

  if (spec.refine_window == 0) issues.push_back({"timing.refine_window", "must be >= 1"});

  return issues;
}

namespace {

double get_num(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) throw std::runtime_error(std::string("field ") + key + " must be a number");
  return j[key].get<double>();
}

}  // namespace

ScenarioSpec parse_scenario(const std::string& json_text) {
  json j = json::parse(json_text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw std::runtime_error("scenario: file is not a JSON object");

  ScenarioSpec spec;
  spec.schema_version = j.value("schema_version", -1);
  spec.name = j.value("name", std::string{});
  spec.duration = get_num(j, "duration", spec.duration);
  spec.tick = get_num(j, "tick", spec.tick);
  if (j.contains("seed")) spec.seed = j["seed"].get<std::uint64_t>();

  if (j.contains("zones")) {
    spec.zones.d_stop = get_num(j["zones"], "d_stop", spec.zones.d_stop);
    spec.zones.d_slow = get_num(j["zones"], "d_slow", spec.zones.d_slow);
  }

  if (j.contains("object")) {
    const auto& o = j["object"];
    spec.initial_range = get_num(o, "initial_range", spec.initial_range);
    spec.object_bearing = get_num(o, "bearing", spec.object_bearing);
    spec.initial_radial_speed = get_num(o, "radial_speed", spec.initial_radial_speed);
    if (o.contains("segments")) {
      for (const auto& s : o["segments"]) {
        MotionSegment seg;
        seg.start = get_num(s, "start", 0.0);
        seg.radial_speed = get_num(s, "radial_speed", 0.0);
        spec.segments.push_back(seg);
      }
    }
  }

  double default_write_interval = 1.0;
  double default_sigma = 0.005;
  if (j.contains("timing")) {
    const auto& t = j["timing"];
    spec.poll_interval = get_num(t, "poll_interval", spec.poll_interval);
    default_write_interval = get_num(t, "write_interval", default_write_interval);
    spec.stale_after = get_num(t, "stale_after", 3.0 * default_write_interval);
    spec.min_write_interval = get_num(t, "min_write_interval", spec.min_write_interval);
    spec.clock_skew_grace = get_num(t, "clock_skew_grace", spec.clock_skew_grace);
    spec.transport_grace = static_cast<int>(get_num(t, "transport_grace", spec.transport_grace));
    if (t.contains("use_refined")) spec.use_refined = t["use_refined"].get<bool>();
    spec.refine_window =
        static_cast<std::size_t>(get_num(t, "refine_window", static_cast<double>(spec.refine_window)));
  } else {
    spec.stale_after = 3.0 * default_write_interval;
  }

  if (j.contains("comms")) {
    const auto& c = j["comms"];
    spec.comms.uplink_delay = get_num(c, "uplink_delay", 0.0);
    spec.comms.dropout_prob = get_num(c, "dropout_prob", 0.0);
    if (c.contains("blackouts")) {
      for (const auto& w : c["blackouts"]) {
        if (w.is_array() && w.size() == 2)
          spec.comms.blackouts.emplace_back(w[0].get<double>(), w[1].get<double>());
        else
          spec.comms.blackouts.emplace_back(-1.0, -1.0);  // flagged by validate()
      }
    }
  }

  if (j.contains("sensors")) {
    for (const auto& s : j["sensors"]) {
      SensorNodeConfig node;
      node.placement.sensor_id = s.value("sensor_id", std::string{});
      node.placement.bearing_deg = get_num(s, "bearing", 0.0);
      node.placement.mount_radius = get_num(s, "mount_radius", 0.0);
      node.write_interval = get_num(s, "write_interval", default_write_interval);
      node.noise_sigma = get_num(s, "noise_sigma", default_sigma);
      node.dropout_prob = get_num(s, "dropout_prob", spec.comms.dropout_prob);
      node.uplink_delay = get_num(s, "uplink_delay", spec.comms.uplink_delay);
      node.quantum = get_num(s, "quantum", 0.01);
      node.max_range = get_num(s, "max_range", 5.0);
      spec.sensors.push_back(node);
    }
  }

  if (j.contains("robot")) {
    const auto& r = j["robot"];
    spec.robot.nominal_speed = get_num(r, "nominal_speed", spec.robot.nominal_speed);
    spec.robot.envelope_radius = get_num(r, "envelope_radius", spec.robot.envelope_radius);
    spec.robot.sweep_length = get_num(r, "sweep_length", spec.robot.sweep_length);
    if (r.contains("decel_limit") && !r["decel_limit"].is_null())
      spec.robot.decel_limit = r["decel_limit"].get<double>();
  }

  return spec;
}

ScenarioSpec load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("scenario: cannot open " + file.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

ObjectPath::ObjectPath(const ScenarioSpec& spec) : bearing_(spec.object_bearing) {
  double t = 0.0, r = spec.initial_range, v = spec.initial_radial_speed;
  nodes_.push_back({t, r, v});
  for (const auto& seg : spec.segments) {
    if (seg.start <= t) continue;  // validator reports ordering problems
    r = std::max(0.0, r + v * (seg.start - t));
    t = seg.start;
    v = seg.radial_speed;
    nodes_.push_back({t, r, v});
  }
}

ObjectState ObjectPath::state_at(double t) const {
  const Node* n = &nodes_.front();
  for (const auto& node : nodes_) {
    if (node.t <= t) n = &node;
    else break;
  }
  ObjectState s;
  s.bearing_deg = bearing_;
  s.radial_speed = n->speed;
  s.range = std::max(0.0, n->range + n->speed * (t - n->t));
  return s;
}

}  // namespace fencewire
