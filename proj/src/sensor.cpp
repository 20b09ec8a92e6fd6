#include "fencewire/sensor.hpp"

#include <cmath>

namespace fencewire {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

const char* to_string(PublishOutcome o) {
  switch (o) {
    case PublishOutcome::Published: return "published";
    case PublishOutcome::Dropped: return "dropped";
    case PublishOutcome::DroppedError: return "dropped_error";
    case PublishOutcome::RateLimited: return "rate_limited";
    case PublishOutcome::InFlight: return "in_flight";
  }
  return "?";
}

double true_distance(const ObjectState& object, const SensorPlacement& sensor) {
  double ao = object.bearing_deg * kPi / 180.0;
  double as = sensor.bearing_deg * kPi / 180.0;
  double dx = object.range * std::cos(ao) - sensor.mount_radius * std::cos(as);
  double dy = object.range * std::sin(ao) - sensor.mount_radius * std::sin(as);
  return std::hypot(dx, dy);
}

RangeReading sample(const SensorNodeConfig& node, const ObjectState& object, DetRng& rng) {
  double d = true_distance(object, node.placement);
  if (node.noise_sigma > 0.0) d += rng.gaussian(node.noise_sigma);
  if (d < 0.0) d = 0.0;
  return quantize_range(d, node.quantum, node.max_range);
}

NodeTickResult node_tick(const SensorNodeConfig& node, int field_slot, const ObjectState& object,
                         ciot::ChannelWriter& writer, const Clock& clock, DetRng& rng) {
  NodeTickResult out;
  out.reading = sample(node, object, rng);
  // The dropout draw happens after the noise draw so the rng consumption
  // order is fixed regardless of outcome.
  if (node.dropout_prob > 0.0 && rng.uniform01() < node.dropout_prob) {
    out.outcome = PublishOutcome::Dropped;
    return out;
  }

  ciot::FieldMap fields;
  fields[field_slot] = out.reading.in_range()
                           ? ciot::wire::format_distance(*out.reading.distance, node.quantum)
                           : ciot::wire::kOutOfRangeToken;
  fields[ciot::wire::kTimeSlot] = ciot::wire::format_seconds(clock.since_start());

  auto r = writer.publish(fields);
  switch (r.status) {
    case ciot::PublishStatus::Published:
      out.outcome = PublishOutcome::Published;
      out.entry_id = r.entry_id;
      break;
    case ciot::PublishStatus::RateLimited:
      out.outcome = PublishOutcome::RateLimited;
      break;
    case ciot::PublishStatus::InFlight:
      out.outcome = PublishOutcome::InFlight;
      break;
    case ciot::PublishStatus::AuthError:
    case ciot::PublishStatus::TransportError:
      out.outcome = PublishOutcome::DroppedError;
      break;
  }
  return out;
}

}  // namespace fencewire
