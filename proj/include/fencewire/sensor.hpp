#pragma once

#include <cstdint>
#include <optional>

#include "fencewire/client.hpp"
#include "fencewire/clock.hpp"
#include "fencewire/rng.hpp"
#include "fencewire/safety.hpp"

namespace fencewire {

// One simulated proximity sensor node: its mount geometry, publish cadence,
// and imperfection model.
struct SensorNodeConfig {
  SensorPlacement placement;
  double write_interval = 1.0;  // seconds between publish attempts
  double noise_sigma = 0.005;   // additive gaussian, meters
  double dropout_prob = 0.0;    // chance a sample is never sent
  double uplink_delay = 0.0;    // seconds between send and broker arrival
  double quantum = 0.01;        // meters
  double max_range = 5.0;       // meters
};

// The intruding object in the robot's polar frame.
struct ObjectState {
  double range = 0.0;        // meters from robot base, >= 0
  double bearing_deg = 0.0;  // [0, 360)
  double radial_speed = 0.0; // m/s, negative = approaching
};

// Planar distance between the object and the sensor's mount point.
double true_distance(const ObjectState& object, const SensorPlacement& sensor);

// One measurement: true distance, plus gaussian noise, clamped at zero, then
// snapped to the sensor's resolution grid. Consumes rng draws only when
// noise_sigma > 0 so noiseless configs stay draw-for-draw reproducible.
RangeReading sample(const SensorNodeConfig& node, const ObjectState& object, DetRng& rng);

enum class PublishOutcome {
  Published,     // broker accepted, entry_id known
  Dropped,       // lost before sending (dropout draw)
  DroppedError,  // transport refused (blackout, connection failure)
  RateLimited,   // broker rejected under its write spacing rule
  InFlight,      // queued behind a simulated uplink delay; resolved later
};
const char* to_string(PublishOutcome o);

struct NodeTickResult {
  PublishOutcome outcome = PublishOutcome::Dropped;
  std::uint64_t entry_id = 0;  // valid when Published
  RangeReading reading;        // what was measured this tick
};

// One publish cycle: measure, maybe drop, otherwise send the reading plus the
// precise sample time through the writer. `field_slot` is the channel slot
// this node owns. Called on the node's write cadence.
NodeTickResult node_tick(const SensorNodeConfig& node, int field_slot, const ObjectState& object,
                         ciot::ChannelWriter& writer, const Clock& clock, DetRng& rng);

}  // namespace fencewire
