#include "fencewire/supervisor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "fencewire/log.hpp"

namespace fencewire {

const char* to_string(Mode m) {
  switch (m) {
    case Mode::Clear: return "CLEAR";
    case Mode::Slow: return "SLOW";
    case Mode::Stop: return "STOP";
    case Mode::FaultStop: return "FAULT_STOP";
  }
  return "?";
}

std::optional<Mode> mode_from_string(std::string_view s) {
  if (s == "CLEAR") return Mode::Clear;
  if (s == "SLOW") return Mode::Slow;
  if (s == "STOP") return Mode::Stop;
  if (s == "FAULT_STOP") return Mode::FaultStop;
  return std::nullopt;
}

namespace {

Mode mode_for(Zone z) {
  switch (z) {
    case Zone::Clear: return Mode::Clear;
    case Zone::Slow: return Mode::Slow;
    case Zone::Stop: return Mode::Stop;
  }
  return Mode::FaultStop;
}

// Parse and validate one distance slot value against the sensor grid.
// Returns the reading plus whether the value deserved a warning.
std::pair<RangeReading, bool> decode_distance(const std::string& text, double quantum,
                                              double max_range) {
  if (text == ciot::wire::kOutOfRangeToken) return {RangeReading::out_of_range(), false};
  char* end = nullptr;
  double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0' || !std::isfinite(v))
    return {RangeReading::out_of_range(), true};
  if (v < 0.0 || v > max_range) return {RangeReading::out_of_range(), true};
  double snapped = std::round(v / quantum) * quantum;
  if (std::fabs(snapped - v) > 1e-9) return {RangeReading::out_of_range(), true};
  return {RangeReading::at(snapped), false};
}

SupervisorCommand fault_command(SupervisorState& st, double now_rel) {
  st.mode = Mode::FaultStop;
  st.override_fraction = 0.0;
  st.stale_faults += 1;
  SupervisorCommand cmd;
  cmd.mode = Mode::FaultStop;
  cmd.override_fraction = 0.0;
  cmd.issued_at = now_rel;
  return cmd;
}

}  // namespace

DecodeResult decode_entry(const ciot::ChannelEntry& entry,
                          std::span<const SensorPlacement> fence, double quantum,
                          double max_range) {
  auto slots = field_slots(fence);
  DecodeResult out;
  bool any_recognized = false;
  for (const auto& placement : fence) {
    int slot = slots.at(placement.sensor_id);
    PlacedReading pr{placement, RangeReading::out_of_range()};
    auto it = entry.fields.find(slot);
    if (it != entry.fields.end()) {
      any_recognized = true;
      auto [reading, warned] = decode_distance(it->second, quantum, max_range);
      pr.reading = reading;
      if (warned) {
        out.decoded.warnings += 1;
        log::warn("decode: entry " + std::to_string(entry.entry_id) + " slot " +
                  std::to_string(slot) + " value '" + it->second + "' is not a valid distance");
      }
    }
    out.decoded.readings.push_back(std::move(pr));
  }
  auto ts = entry.fields.find(ciot::wire::kTimeSlot);
  if (ts != entry.fields.end()) {
    char* end = nullptr;
    double t = std::strtod(ts->second.c_str(), &end);
    if (end != ts->second.c_str() && *end == '\0' && std::isfinite(t) && t >= 0.0) {
      out.decoded.sample_time = t;
    } else {
      out.decoded.warnings += 1;
    }
  }
  out.status = any_recognized ? DecodeStatus::Ok : DecodeStatus::NoRecognizedSlots;
  return out;
}

std::pair<SupervisorState, SupervisorCommand> poll_once(SupervisorState state,
                                                        const SupervisorConfig& config,
                                                        ciot::ChannelReader& reader,
                                                        const Clock& clock) {
  const double now_wall = clock.wall();
  const double now_rel = clock.since_start();

  auto fetch = reader.fetch_last();
  switch (fetch.status) {
    case ciot::FetchStatus::TransportError:
      state.consecutive_transport_failures += 1;
      if (state.consecutive_transport_failures >= config.transport_grace)
        return {state, fault_command(state, now_rel)};
      // Within grace: treat as "no new data" and fall through to re-evaluate
      // what we already hold.
      if (!state.last_created_at) return {state, fault_command(state, now_rel)};
      break;
    case ciot::FetchStatus::Empty:
      // An empty channel has no sample at all, which is as stale as it gets.
      state.consecutive_transport_failures = 0;
      return {state, fault_command(state, now_rel)};
    case ciot::FetchStatus::NotFound:
      throw BrokerConfigError("channel not found: " + fetch.detail);
    case ciot::FetchStatus::AuthError:
      throw BrokerConfigError("channel read rejected: " + fetch.detail);
    case ciot::FetchStatus::Ok: {
      state.consecutive_transport_failures = 0;
      if (!state.last_entry_id || *state.last_entry_id != fetch.entry.entry_id) {
        auto dec = decode_entry(fetch.entry, config.fence, config.quantum, config.max_range);
        state.decode_warnings += dec.decoded.warnings;
        state.last_entry_id = fetch.entry.entry_id;
        state.last_created_at = fetch.entry.created_at;
        if (dec.status != DecodeStatus::Ok) {
          // Nothing interpretable in the entry: fail safe rather than guess.
          state.decode_errors += 1;
          state.last_sample_time.reset();
          state.last_readings.clear();
          return {state, fault_command(state, now_rel)};
        }
        state.last_sample_time = dec.decoded.sample_time;
        state.last_readings = std::move(dec.decoded.readings);
      }
      break;
    }
  }

  if (!state.last_created_at || state.last_readings.empty())
    return {state, fault_command(state, now_rel)};

  // Staleness against the channel creation stamp. Entries dated into the
  // future beyond the skew grace are distrusted entirely.
  double age = now_wall - static_cast<double>(*state.last_created_at);
  if (age < -config.clock_skew_grace) return {state, fault_command(state, now_rel)};
  age = std::max(age, 0.0);
  if (age > config.staleness.stale_after) return {state, fault_command(state, now_rel)};

  std::vector<PlacedReading> readings = state.last_readings;
  if (config.use_refined) {
    auto rf = reader.fetch_refine(config.refine_window);
    if (rf.status == ciot::FetchStatus::Ok) {
      auto slots = field_slots(config.fence);
      for (auto& pr : readings) {
        auto it = rf.means.find(slots.at(pr.placement.sensor_id));
        // Only smooth readings that are in range to begin with; means that
        // mix in out-of-range sentinels fall outside [0, max_range] and are
        // rejected here.
        if (it != rf.means.end() && pr.reading.in_range() && it->second >= 0.0 &&
            it->second <= config.max_range)
          pr.reading = RangeReading::at(it->second);
      }
    }
  }

  FusedEstimate fused = fuse(readings, config.max_range);
  Zone zone = classify_zone(fused.min_distance, config.zones);
  double override = speed_override(fused.min_distance, config.zones);

  state.mode = mode_for(zone);
  state.override_fraction = override;
  state.approach_bearing_deg = fused.approach_bearing_deg;

  SupervisorCommand cmd;
  cmd.mode = state.mode;
  cmd.override_fraction = override;
  cmd.issued_at = now_rel;
  cmd.cause_entry_id = state.last_entry_id;
  cmd.sample_time = state.last_sample_time;
  return {state, cmd};
}

}  // namespace fencewire
