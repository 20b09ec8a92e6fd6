#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fencewire {

// One proximity observation. A reading either carries a quantized distance in
// meters or reports that nothing is inside the sensor's measurable range.
struct RangeReading {
  std::optional<double> distance;  // nullopt = out of range

  bool in_range() const { return distance.has_value(); }
  static RangeReading out_of_range() { return {}; }
  static RangeReading at(double meters) { return {meters}; }
  bool operator==(const RangeReading&) const = default;
};

// Zone boundaries around the robot, meters from its base.
// Valid iff 0 < d_stop < d_slow <= max_range.
struct ZoneThresholds {
  double d_stop = 0.5;
  double d_slow = 2.0;

  void validate(double max_range) const;  // throws std::invalid_argument
};

enum class Zone { Stop, Slow, Clear };
const char* to_string(Zone z);

// Where a sensor sits on the fence ring: compass bearing of its boresight and
// distance of its mount from the robot base.
struct SensorPlacement {
  std::string sensor_id;
  double bearing_deg = 0.0;   // [0, 360)
  double mount_radius = 0.0;  // meters
};

struct PlacedReading {
  SensorPlacement placement;
  RangeReading reading;
};

// Result of combining every sensor's latest reading into one picture:
// the closest measured distance plus, when anything is in range, the
// weighted direction the intrusion is coming from.
struct FusedEstimate {
  RangeReading min_distance;
  std::optional<double> approach_bearing_deg;  // [0, 360)
};

struct StalenessPolicy {
  double stale_after = 3.0;  // seconds; strictly-older-than is stale
};

// Snap a physical distance onto the sensor's resolution grid: round to the
// nearest multiple of quantum, ties away from zero. Anything beyond max_range
// reads as out-of-range. Throws std::invalid_argument on negative distance or
// non-positive quantum / max_range.
RangeReading quantize_range(double true_distance, double quantum, double max_range);

// Zone membership. Out-of-range means clear; boundaries resolve conservatively
// (exactly d_stop stops, exactly d_slow is already clear).
Zone classify_zone(const RangeReading& reading, const ZoneThresholds& z);

// Speed multiplier in [0, 1]: 1 in the clear zone, 0 at or inside d_stop,
// linear ramp (d - d_stop) / (d_slow - d_stop) in between.
double speed_override(const RangeReading& reading, const ZoneThresholds& z);

// Combine per-sensor readings: min distance wins, and the approach bearing is
// the weighted circular mean of in-range sensor bearings with weights
// max(0, max_range - d_i) so near intrusions dominate. Bearing is absent when
// every reading is out of range or every weight is zero; if the weighted
// vector sum degenerates (|v| < 1e-9) the bearing of the lowest sensor_id
// in-range sensor is used. Throws std::invalid_argument on an empty list or
// duplicate sensor ids.
FusedEstimate fuse(std::span<const PlacedReading> readings, double max_range);

// True iff the sample is strictly older than the policy allows.
// Throws std::invalid_argument if now precedes sample_time.
bool is_stale(double sample_time, double now, const StalenessPolicy& policy);

// Channel field slots are handed out in ascending sensor_id order (slot 1
// first). Throws std::invalid_argument on duplicate ids or more sensors than
// the wire format can carry alongside the sample-time slot.
std::map<std::string, int> field_slots(std::span<const SensorPlacement> fence);

// Fold any angle into [0, 360).
double normalize_bearing(double deg);

}  // namespace fencewire
