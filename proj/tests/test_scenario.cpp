#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <string>

#include "fencewire/scenario.hpp"

using namespace fencewire;

namespace {

bool has_issue(const std::vector<ValidationIssue>& issues, const std::string& path) {
  return std::any_of(issues.begin(), issues.end(),
                     [&](const ValidationIssue& i) { return i.path == path; });
}

std::filesystem::path repo_file(const char* rel) {
  return std::filesystem::path(__FILE__).parent_path().parent_path() / rel;
}

}  // namespace

TEST_CASE("a minimal file gets the documented defaults") {
  auto spec = parse_scenario(R"({
    "schema_version": 1,
    "name": "minimal",
    "sensors": [{"sensor_id": "s1"}]
  })");

  CHECK(spec.schema_version == 1);
  CHECK(spec.name == "minimal");
  CHECK(spec.duration == 10.0);
  CHECK(spec.tick == 0.01);
  CHECK(spec.seed == 0);
  CHECK(spec.zones.d_stop == 0.5);
  CHECK(spec.zones.d_slow == 2.0);
  CHECK(spec.initial_range == 5.0);
  CHECK(spec.poll_interval == 0.25);
  CHECK(spec.stale_after == 3.0);  // three write intervals
  CHECK(spec.min_write_interval == 1.0);
  CHECK(spec.clock_skew_grace == 0.5);
  CHECK(spec.transport_grace == 1);
  CHECK(!spec.use_refined);
  CHECK(spec.refine_window == 3);

  REQUIRE(spec.sensors.size() == 1);
  const auto& s = spec.sensors[0];
  CHECK(s.placement.sensor_id == "s1");
  CHECK(s.placement.bearing_deg == 0.0);
  CHECK(s.placement.mount_radius == 0.0);
  CHECK(s.write_interval == 1.0);
  CHECK(s.noise_sigma == 0.005);
  CHECK(s.dropout_prob == 0.0);
  CHECK(s.uplink_delay == 0.0);
  CHECK(s.quantum == 0.01);
  CHECK(s.max_range == 5.0);

  CHECK(spec.robot.nominal_speed == 0.2);
  CHECK(spec.robot.envelope_radius == 0.3);
  CHECK(spec.robot.sweep_length == 0.2);
  CHECK(!spec.robot.decel_limit.has_value());

  CHECK(validate(spec).empty());
}

TEST_CASE("sensor rows inherit the shared timing and comms settings") {
  auto spec = parse_scenario(R"({
    "schema_version": 1,
    "name": "inherit",
    "timing": {"write_interval": 2.0, "min_write_interval": 0.5},
    "comms": {"dropout_prob": 0.1, "uplink_delay": 0.05},
    "sensors": [
      {"sensor_id": "s1"},
      {"sensor_id": "s2", "write_interval": 4.0, "dropout_prob": 0.0,
       "uplink_delay": 0.2, "noise_sigma": 0.0}
    ]
  })");

  CHECK(spec.stale_after == 6.0);  // follows the shared write interval
  CHECK(spec.sensors[0].write_interval == 2.0);
  CHECK(spec.sensors[0].dropout_prob == 0.1);
  CHECK(spec.sensors[0].uplink_delay == 0.05);
  CHECK(spec.sensors[0].noise_sigma == 0.005);
  // Per-sensor values always win over the shared ones.
  CHECK(spec.sensors[1].write_interval == 4.0);
  CHECK(spec.sensors[1].dropout_prob == 0.0);
  CHECK(spec.sensors[1].uplink_delay == 0.2);
  CHECK(spec.sensors[1].noise_sigma == 0.0);

  CHECK(validate(spec).empty());

  // An explicit stale_after is taken verbatim, not derived.
  auto explicit_spec = parse_scenario(R"({
    "schema_version": 1, "name": "x",
    "timing": {"write_interval": 2.0, "stale_after": 4.0},
    "sensors": [{"sensor_id": "s1"}]
  })");
  CHECK(explicit_spec.stale_after == 4.0);
}

TEST_CASE("the shipped scenario files load and validate cleanly") {
  auto canonical = load_scenario(repo_file("scenarios/canonical.json"));
  CHECK(canonical.name == "canonical-approach");
  CHECK(canonical.duration == 12.0);
  CHECK(canonical.seed == 42);
  CHECK(canonical.sensors.size() == 1);
  CHECK(validate(canonical).empty());

  auto blackout = load_scenario(repo_file("scenarios/blackout.json"));
  CHECK(blackout.name == "blackout-failsafe");
  CHECK(blackout.comms.blackouts.size() == 1);
  CHECK(validate(blackout).empty());

  auto multi = load_scenario(repo_file("scenarios/multi_sensor.json"));
  CHECK(multi.name == "multi-sensor-fence");
  CHECK(multi.sensors.size() == 3);
  CHECK(multi.segments.size() == 2);
  CHECK(validate(multi).empty());
}

TEST_CASE("validation reports every problem with its field path") {
  auto spec = parse_scenario(R"({
    "schema_version": 1,
    "name": "broken",
    "timing": {"poll_interval": 0.333, "min_write_interval": 1.0,
               "transport_grace": 0, "clock_skew_grace": -1,
               "refine_window": 0},
    "zones": {"d_stop": 2.0, "d_slow": 0.5},
    "object": {"segments": [{"start": 3.0}, {"start": 3.0}]},
    "comms": {"blackouts": [[5.0, 2.0]]},
    "sensors": [
      {"sensor_id": "s1", "write_interval": 0.4, "bearing": 360.0},
      {"sensor_id": "s1"}
    ],
    "robot": {"envelope_radius": 3.0}
  })");
  auto issues = validate(spec);

  CHECK(has_issue(issues, "timing.poll_interval"));      // not a tick multiple
  CHECK(has_issue(issues, "timing.transport_grace"));
  CHECK(has_issue(issues, "timing.clock_skew_grace"));
  CHECK(has_issue(issues, "timing.refine_window"));
  CHECK(has_issue(issues, "zones"));                     // d_stop >= d_slow
  CHECK(has_issue(issues, "object.segments[1].start"));  // not increasing
  CHECK(has_issue(issues, "comms.blackouts[0]"));        // end before begin
  CHECK(has_issue(issues, "sensors[0].write_interval")); // under the rate share
  CHECK(has_issue(issues, "sensors[0].bearing"));
  CHECK(has_issue(issues, "sensors[1].sensor_id"));      // duplicate
  CHECK(has_issue(issues, "robot"));                     // reach >= d_stop

  // A file with no schema_version at all is flagged too.
  auto unversioned = parse_scenario(R"({"name": "x", "sensors": [{"sensor_id": "s1"}]})");
  CHECK(has_issue(validate(unversioned), "schema_version"));
  auto future = parse_scenario(
      R"({"schema_version": 2, "name": "x", "sensors": [{"sensor_id": "s1"}]})");
  CHECK(has_issue(validate(future), "schema_version"));
}

TEST_CASE("the sensor count is bounded by the wire format") {
  std::string rows;
  for (int i = 1; i <= 8; ++i) {
    if (i > 1) rows += ",";
    rows += "{\"sensor_id\": \"s" + std::to_string(i) + "\"}";
  }
  auto spec = parse_scenario(
      R"({"schema_version": 1, "name": "crowd", "sensors": [)" + rows + "]}");
  CHECK(has_issue(validate(spec), "sensors"));

  auto empty = parse_scenario(R"({"schema_version": 1, "name": "none", "sensors": []})");
  CHECK(has_issue(validate(empty), "sensors"));
}

TEST_CASE("unreadable input throws instead of guessing") {
  CHECK_THROWS_AS(parse_scenario("this is not json"), std::runtime_error);
  CHECK_THROWS_AS(parse_scenario("[1, 2, 3]"), std::runtime_error);
  CHECK_THROWS_AS(parse_scenario(R"({"schema_version": 1, "duration": "fast"})"),
                  std::runtime_error);
  CHECK_THROWS_AS(load_scenario("/nonexistent/path/scenario.json"), std::runtime_error);
}

TEST_CASE("the object path is piecewise linear in time") {
  ScenarioSpec spec;
  spec.initial_range = 5.0;
  spec.object_bearing = 30.0;
  spec.initial_radial_speed = -0.5;
  spec.segments = {{4.0, 0.0}, {6.0, -1.0}};

  ObjectPath path(spec);
  CHECK(path.state_at(0.0).range == 5.0);
  CHECK(path.state_at(2.0).range == 4.0);
  CHECK(path.state_at(4.0).range == 3.0);
  CHECK(path.state_at(5.0).range == 3.0);  // paused segment
  CHECK(path.state_at(5.0).radial_speed == 0.0);
  CHECK(path.state_at(6.0).range == 3.0);
  CHECK(path.state_at(7.0).range == 2.0);
  CHECK(path.state_at(7.0).radial_speed == -1.0);
  // 3 m at 1 m/s from t=6: the floor is reached at t=9 and held.
  CHECK(path.state_at(9.0).range == 0.0);
  CHECK(path.state_at(11.0).range == 0.0);
  CHECK(path.state_at(7.0).bearing_deg == 30.0);
}

TEST_CASE("the object path clamps at zero between segment boundaries") {
  ScenarioSpec spec;
  spec.initial_range = 1.0;
  spec.initial_radial_speed = -1.0;
  spec.segments = {{3.0, 0.0}};

  ObjectPath path(spec);
  CHECK(path.state_at(1.0).range == 0.0);
  CHECK(path.state_at(2.0).range == 0.0);
  CHECK(path.state_at(4.0).range == 0.0);  // segment starts from the clamped range
}

TEST_CASE("out-of-order segments are ignored by the path, not applied") {
  ScenarioSpec spec;
  spec.initial_range = 5.0;
  spec.initial_radial_speed = 0.0;
  spec.segments = {{2.0, 0.0}, {1.0, -5.0}};  // the validator flags this file

  ObjectPath path(spec);
  CHECK(path.state_at(4.0).range == 5.0);
}

TEST_CASE("the supervisor config mirrors the scenario") {
  auto spec = parse_scenario(R"({
    "schema_version": 1,
    "name": "mirror",
    "timing": {"poll_interval": 0.5, "stale_after": 7.0, "min_write_interval": 0.25,
               "clock_skew_grace": 0.9, "transport_grace": 2,
               "use_refined": true, "refine_window": 5},
    "sensors": [
      {"sensor_id": "a", "bearing": 10.0, "max_range": 5.0},
      {"sensor_id": "b", "bearing": 200.0, "max_range": 6.0}
    ]
  })");

  auto cfg = spec.supervisor_config();
  CHECK(cfg.poll_interval == 0.5);
  CHECK(cfg.staleness.stale_after == 7.0);
  CHECK(cfg.zones.d_stop == spec.zones.d_stop);
  REQUIRE(cfg.fence.size() == 2);
  CHECK(cfg.fence[0].sensor_id == "a");
  CHECK(cfg.fence[1].sensor_id == "b");
  CHECK(cfg.max_range == 6.0);  // widest sensor wins
  CHECK(cfg.quantum == 0.01);
  CHECK(cfg.clock_skew_grace == 0.9);
  CHECK(cfg.transport_grace == 2);
  CHECK(cfg.use_refined);
  CHECK(cfg.refine_window == 5);
}

TEST_CASE("blackout windows are half-open") {
  CommsSpec comms;
  comms.blackouts = {{4.0, 9.0}, {10.0, 11.0}};
  CHECK(!comms.in_blackout(3.999));
  CHECK(comms.in_blackout(4.0));
  CHECK(comms.in_blackout(8.999));
  CHECK(!comms.in_blackout(9.0));
  CHECK(comms.in_blackout(10.5));
  CHECK(!comms.in_blackout(11.0));
}
