#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fencewire/ciot.hpp"
#include "fencewire/robot.hpp"
#include "fencewire/scenario.hpp"
#include "fencewire/supervisor.hpp"

namespace fencewire {

struct LatencyStats {
  std::size_t count = 0;
  double p50 = 0.0;
  double p95 = 0.0;
  double max = 0.0;
};

struct RunCounts {
  std::uint64_t attempts = 0;       // sensor publish cycles that ran
  std::uint64_t published = 0;      // accepted by the broker
  std::uint64_t dropped = 0;        // lost before or at the transport
  std::uint64_t transport_errors = 0;  // subset of dropped with an error cause
  std::uint64_t rate_limited = 0;   // rejected by the broker's write spacing
  std::uint64_t polls = 0;
  std::uint64_t commands = 0;
  std::uint64_t stale_faults = 0;
  std::uint64_t decode_warnings = 0;
  std::uint64_t decode_errors = 0;
};

// One metrics row per tick. Numeric fields are pre-rounded to the precision
// the CSV carries, so statistics recomputed from the file match statistics
// computed here exactly.
struct TickRow {
  double t = 0.0;           // run-relative seconds (4 dp)
  double true_range = 0.0;  // meters (6 dp)
  double bearing = 0.0;     // degrees (3 dp)
  std::vector<std::string> measured;  // wire strings, one per sensor; "" = no sample
  std::optional<std::uint64_t> entry_id;  // newest entry the supervisor has seen
  Mode mode = Mode::FaultStop;
  double override_fraction = 0.0;  // (6 dp)
  double robot_speed = 0.0;        // m/s (6 dp)
  std::optional<double> latency_s;  // sense-to-command, on command ticks (4 dp)
};

struct CommandRecord {
  SupervisorCommand cmd;
  double wall_at_issue = 0.0;
  std::optional<std::uint64_t> entry_seen;  // supervisor's latest entry after the poll
};

struct ChannelLogEntry {
  ciot::ChannelEntry entry;
  double available_at = 0.0;  // run-relative time the entry became readable
};

// Post-run invariants that must hold for every scenario; a false flag is a
// defect in the safety chain, not a property of the scenario.
struct InvariantReport {
  bool failsafe_dominance = true;  // stale data never yields a moving command
  bool speed_bound = true;         // 0 <= speed <= nominal everywhere
  bool conservation = true;        // attempts == published + dropped + rate_limited
  bool log_gapless = true;         // entry ids 1..N without gaps
  std::vector<std::string> notes;

  bool all_ok() const {
    return failsafe_dominance && speed_bound && conservation && log_gapless;
  }
};

struct RunMetrics {
  std::string scenario_name;
  std::string run_mode;  // "lockstep" or "realtime"
  double duration = 0.0;
  double tick = 0.0;
  double envelope_radius = 0.0;
  double d_stop = 0.0;
  double d_slow = 0.0;
  double stale_after = 0.0;
  double nominal_speed = 0.0;
  std::uint64_t seed = 0;
  std::vector<std::string> sensor_ids;  // slot order

  std::vector<TickRow> rows;
  std::vector<CommandRecord> commands;
  std::vector<ChannelLogEntry> channel_log;

  LatencyStats latency;
  robot::SafetyOutcome safety;
  RunCounts counts;
  InvariantReport invariants;
};

// Deterministic single-threaded run: every tick executes object motion,
// sensor publishes, broker delivery of delayed uplinks, the supervisor poll,
// and the robot update, in that order. Identical spec + seed produces
// byte-identical metrics. Throws std::invalid_argument when the spec fails
// validation.
RunMetrics run_lockstep(const ScenarioSpec& spec);

struct RealtimeOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 = pick any free port (local broker only)
  std::string external_endpoint;  // when set, use this broker instead of spawning one
};

// Wall-clock run: broker (spawned or external), one thread per sensor node, a
// polling supervisor thread, and the robot/metrics loop, all talking over the
// HTTP wire protocol. Asserts the same invariants as lockstep; traces carry
// real latencies. Throws std::runtime_error on broker spawn/config faults.
RunMetrics run_realtime(const ScenarioSpec& spec, const RealtimeOptions& opts = {});

// Shared post-processing, also used by replay: stats come from the rounded
// row values so file round-trips reproduce them bit-for-bit.
LatencyStats latency_from_rows(const std::vector<TickRow>& rows);
robot::SafetyOutcome safety_from_rows(const std::vector<TickRow>& rows, double envelope_radius,
                                      double d_stop, double d_slow);

double round_to(double v, double decade);  // round_to(x, 1e-4) etc.

}  // namespace fencewire
