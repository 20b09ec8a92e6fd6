#include "fencewire/safety.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace fencewire {

namespace {
constexpr double kPi = 3.14159265358979323846;
constexpr double kDegenerateNorm = 1e-9;
// Slot 8 of the wire format carries the precise sample time, so a fence can
// map at most seven sensors onto one channel.
constexpr int kMaxFenceSensors = 7;
}  // namespace

const char* to_string(Zone z) {
  switch (z) {
    case Zone::Stop: return "STOP";
    case Zone::Slow: return "SLOW";
    case Zone::Clear: return "CLEAR";
  }
  return "?";
}

void ZoneThresholds::validate(double max_range) const {
  if (!(d_stop > 0.0)) throw std::invalid_argument("zones: d_stop must be > 0");
  if (!(d_stop < d_slow)) throw std::invalid_argument("zones: d_stop must be < d_slow");
  if (!(d_slow <= max_range)) throw std::invalid_argument("zones: d_slow must be <= max_range");
}

RangeReading quantize_range(double true_distance, double quantum, double max_range) {
  if (!(quantum > 0.0)) throw std::invalid_argument("quantize_range: quantum must be > 0");
  if (!(max_range > 0.0)) throw std::invalid_argument("quantize_range: max_range must be > 0");
  if (true_distance < 0.0) throw std::invalid_argument("quantize_range: negative distance");
  if (true_distance > max_range) return RangeReading::out_of_range();
  // std::round rounds halves away from zero, which is the tie rule we want.
  return RangeReading::at(std::round(true_distance / quantum) * quantum);
}

Zone classify_zone(const RangeReading& reading, const ZoneThresholds& z) {
  if (!reading.in_range()) return Zone::Clear;
  double d = *reading.distance;
  if (d >= z.d_slow) return Zone::Clear;
  if (d <= z.d_stop) return Zone::Stop;
  return Zone::Slow;
}

double speed_override(const RangeReading& reading, const ZoneThresholds& z) {
  if (!reading.in_range()) return 1.0;
  double d = *reading.distance;
  if (d >= z.d_slow) return 1.0;
  if (d <= z.d_stop) return 0.0;
  return std::clamp((d - z.d_stop) / (z.d_slow - z.d_stop), 0.0, 1.0);
}

FusedEstimate fuse(std::span<const PlacedReading> readings, double max_range) {
  if (readings.empty()) throw std::invalid_argument("fuse: no readings");
  std::set<std::string> ids;
  for (const auto& r : readings) {
    if (!ids.insert(r.placement.sensor_id).second)
      throw std::invalid_argument("fuse: duplicate sensor_id " + r.placement.sensor_id);
  }

  FusedEstimate out;
  out.min_distance = RangeReading::out_of_range();
  double vx = 0.0, vy = 0.0, weight_sum = 0.0;
  const PlacedReading* lowest_in_range = nullptr;

  for (const auto& r : readings) {
    if (!r.reading.in_range()) continue;
    double d = *r.reading.distance;
    if (!out.min_distance.in_range() || d < *out.min_distance.distance)
      out.min_distance = r.reading;
    if (!lowest_in_range || r.placement.sensor_id < lowest_in_range->placement.sensor_id)
      lowest_in_range = &r;
    double w = std::max(0.0, max_range - d);
    weight_sum += w;
    double a = r.placement.bearing_deg * kPi / 180.0;
    vx += w * std::cos(a);
    vy += w * std::sin(a);
  }

  if (!lowest_in_range || weight_sum == 0.0) return out;  // nothing to point at

  if (std::sqrt(vx * vx + vy * vy) < kDegenerateNorm) {
    // Opposing sensors cancelled out; fall back to a stable, arbitrary pick.
    out.approach_bearing_deg = normalize_bearing(lowest_in_range->placement.bearing_deg);
    return out;
  }
  out.approach_bearing_deg = normalize_bearing(std::atan2(vy, vx) * 180.0 / kPi);
  return out;
}

bool is_stale(double sample_time, double now, const StalenessPolicy& policy) {
  if (now < sample_time) throw std::invalid_argument("is_stale: now precedes sample_time");
  return (now - sample_time) > policy.stale_after;
}

std::map<std::string, int> field_slots(std::span<const SensorPlacement> fence) {
  if (fence.size() > static_cast<std::size_t>(kMaxFenceSensors))
    throw std::invalid_argument("field_slots: more sensors than available field slots");
  std::set<std::string> ordered;
  for (const auto& s : fence) {
    if (!ordered.insert(s.sensor_id).second)
      throw std::invalid_argument("field_slots: duplicate sensor_id " + s.sensor_id);
  }
  std::map<std::string, int> slots;
  int slot = 1;
  for (const auto& id : ordered) slots[id] = slot++;
  return slots;
}

double normalize_bearing(double deg) {
  double r = std::fmod(deg, 360.0);
  if (r < 0.0) r += 360.0;
  return r == 360.0 ? 0.0 : r;
}

}  // namespace fencewire
