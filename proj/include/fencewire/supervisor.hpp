#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "fencewire/client.hpp"
#include "fencewire/clock.hpp"
#include "fencewire/safety.hpp"

namespace fencewire {

// Operating mode attached to every command. The three zone modes mirror the
// zones; FAULT_STOP is reserved for missing, stale, or unreadable data and is
// never produced by zone classification.
enum class Mode { Clear, Slow, Stop, FaultStop };
const char* to_string(Mode m);
std::optional<Mode> mode_from_string(std::string_view s);

struct SupervisorConfig {
  double poll_interval = 0.25;  // seconds
  StalenessPolicy staleness{3.0};
  ZoneThresholds zones{};
  std::vector<SensorPlacement> fence;  // slot order = ascending sensor_id
  double quantum = 0.01;
  double max_range = 5.0;
  double clock_skew_grace = 0.5;  // tolerated future-dated entries, seconds
  int transport_grace = 1;        // consecutive fetch failures before faulting
  bool use_refined = false;       // read broker-side averaged values
  std::size_t refine_window = 3;
};

struct SupervisorCommand {
  Mode mode = Mode::FaultStop;
  double override_fraction = 0.0;  // [0, 1]
  double issued_at = 0.0;          // seconds since run start
  std::optional<std::uint64_t> cause_entry_id;  // set when driven by channel data
  std::optional<double> sample_time;            // precise sample instant, run-relative
};

struct SupervisorState {
  Mode mode = Mode::FaultStop;
  double override_fraction = 0.0;
  std::optional<std::uint64_t> last_entry_id;
  std::optional<std::int64_t> last_created_at;  // unix seconds, from the wire
  std::optional<double> last_sample_time;
  std::optional<double> approach_bearing_deg;
  std::vector<PlacedReading> last_readings;  // reused while entry_id is unchanged
  int consecutive_transport_failures = 0;
  std::uint64_t decode_warnings = 0;
  std::uint64_t decode_errors = 0;
  std::uint64_t stale_faults = 0;  // polls that ended in FAULT_STOP
};

struct DecodedEntry {
  std::vector<PlacedReading> readings;  // one per fence sensor, slot order
  std::optional<double> sample_time;
  std::uint64_t warnings = 0;
};

enum class DecodeStatus { Ok, NoRecognizedSlots };
struct DecodeResult {
  DecodeStatus status = DecodeStatus::NoRecognizedSlots;
  DecodedEntry decoded;
};

// Unrecoverable channel configuration problem (unknown channel, bad key).
// Everything else a poll can hit turns into FAULT_STOP, never an exception.
class BrokerConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Map one channel entry back to per-sensor readings. Slot i belongs to the
// i-th sensor in ascending sensor_id order. The out-of-range token decodes to
// OutOfRange; an absent slot is treated the same (that sensor said nothing in
// this entry); a value that fails numeric or grid validation decodes to
// OutOfRange and bumps `warnings`. An entry with no sensor slot at all (the
// time slot alone does not count) is NoRecognizedSlots.
DecodeResult decode_entry(const ciot::ChannelEntry& entry,
                          std::span<const SensorPlacement> fence, double quantum,
                          double max_range);

// One poll cycle: fetch the newest entry, re-evaluate staleness, and emit
// exactly one command. Missing, stale, undecodable, or (after the grace
// count) unfetchable data emits FAULT_STOP with override 0. An unchanged
// entry_id reuses the previously decoded readings but still re-checks
// staleness against the current time.
std::pair<SupervisorState, SupervisorCommand> poll_once(SupervisorState state,
                                                        const SupervisorConfig& config,
                                                        ciot::ChannelReader& reader,
                                                        const Clock& clock);

// Convenience wrapper producing the unbounded command sequence, one command
// per call, at whatever cadence the caller invokes it.
class CommandStream {
 public:
  CommandStream(SupervisorConfig config, ciot::ChannelReader& reader, const Clock& clock)
      : config_(std::move(config)), reader_(reader), clock_(clock) {}

  SupervisorCommand next() {
    auto [st, cmd] = poll_once(std::move(state_), config_, reader_, clock_);
    state_ = std::move(st);
    return cmd;
  }

  const SupervisorState& state() const { return state_; }
  const SupervisorConfig& config() const { return config_; }

 private:
  SupervisorConfig config_;
  ciot::ChannelReader& reader_;
  const Clock& clock_;
  SupervisorState state_;
};

}  // namespace fencewire
