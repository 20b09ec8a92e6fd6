#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fencewire/robot.hpp"
#include "fencewire/safety.hpp"
#include "fencewire/sensor.hpp"
#include "fencewire/supervisor.hpp"

namespace fencewire {

inline constexpr int kScenarioSchemaVersion = 1;

// Piecewise-constant radial motion: from `start` (seconds) the object moves
// at `radial_speed` (m/s, negative = approaching) until the next segment.
struct MotionSegment {
  double start = 0.0;
  double radial_speed = 0.0;
};

// Communication environment shared by all sensor uplinks. Blackout windows
// are [begin, end) intervals during which every publish fails at the
// transport.
struct CommsSpec {
  double uplink_delay = 0.0;
  double dropout_prob = 0.0;
  std::vector<std::pair<double, double>> blackouts;

  bool in_blackout(double t) const {
    for (const auto& [b, e] : blackouts)
      if (t >= b && t < e) return true;
    return false;
  }
};

// A complete, reproducible experiment description, loaded from JSON.
struct ScenarioSpec {
  int schema_version = kScenarioSchemaVersion;
  std::string name;
  double duration = 10.0;  // seconds
  double tick = 0.01;      // seconds; must divide every interval below
  std::uint64_t seed = 0;

  ZoneThresholds zones;
  double initial_range = 5.0;
  double object_bearing = 0.0;
  double initial_radial_speed = 0.0;
  std::vector<MotionSegment> segments;

  std::vector<SensorNodeConfig> sensors;

  double poll_interval = 0.25;
  double stale_after = 3.0;  // default rides at 3x the write interval
  double min_write_interval = 1.0;
  double clock_skew_grace = 0.5;
  int transport_grace = 1;
  bool use_refined = false;
  std::size_t refine_window = 3;

  robot::RobotConfig robot;
  CommsSpec comms;

  SupervisorConfig supervisor_config() const;
};

struct ValidationIssue {
  std::string path;  // e.g. "sensors[0].write_interval"
  std::string message;
};

// Structural and cross-field validation; returns every problem found, with
// field paths, so a bad file is reported in one shot before anything runs.
std::vector<ValidationIssue> validate(const ScenarioSpec& spec);

// Parse a scenario file. Throws std::runtime_error on unreadable files or
// JSON that does not parse; unknown schema versions are a validation issue,
// not a parse failure.
ScenarioSpec load_scenario(const std::filesystem::path& file);
ScenarioSpec parse_scenario(const std::string& json_text);

// Closed-form object trajectory derived from the spec: range is piecewise
// linear in time, clamped at zero, with a constant bearing. Being a pure
// function of t, it is safe to evaluate from any thread.
class ObjectPath {
 public:
  explicit ObjectPath(const ScenarioSpec& spec);
  ObjectState state_at(double t) const;

 private:
  struct Node {
    double t;
    double range;
    double speed;  // until the next node
  };
  std::vector<Node> nodes_;
  double bearing_;
};

}  // namespace fencewire
