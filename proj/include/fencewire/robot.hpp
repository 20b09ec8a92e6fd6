#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "fencewire/safety.hpp"
#include "fencewire/supervisor.hpp"

namespace fencewire::robot {

// A legacy arm reduced to what the safety loop needs: it sweeps a fixed
// cyclic path at a commanded fraction of nominal speed.
struct RobotConfig {
  double nominal_speed = 0.2;    // m/s along the path
  double envelope_radius = 0.3;  // reach of the arm from its base, meters
  double sweep_length = 0.2;     // one-way length of the line sweep, meters
  std::optional<double> decel_limit;  // m/s^2; absent = speed changes instantly

  // Phase covers a full out-and-back cycle.
  double path_length() const { return 2.0 * sweep_length; }
  void validate(const ZoneThresholds& zones) const;  // throws std::invalid_argument
};

struct RobotState {
  double path_phase = 0.0;       // [0, 1)
  double actual_speed = 0.0;     // m/s
  double applied_override = 0.0; // last commanded fraction
};

// Ground-truth safety verdict for a finished run.
struct SafetyOutcome {
  double min_object_clearance = 0.0;     // min(range - envelope_radius)
  bool stop_achieved_before_d_stop = true;
  std::uint64_t violation_ticks = 0;     // object inside envelope while moving
};

struct TraceSample {
  double object_range = 0.0;  // true range, meters
  double robot_speed = 0.0;   // m/s after that tick's command
};

// Move actual_speed toward nominal_speed * override. Without a decel limit
// the target is reached instantly; with one, speed slews at most
// decel_limit * dt per tick in either direction, snapping to the target once
// within a step (so a zero override converges to exactly zero).
RobotState apply_command(RobotState state, const SupervisorCommand& cmd,
                         const RobotConfig& config, double dt);

// Advance along the cyclic path at the current speed.
RobotState advance(RobotState state, const RobotConfig& config, double dt);

// Score a completed run from its per-tick ground truth. The stop flag demands
// zero speed from the first tick the object is at or inside d_stop and for
// every later tick it remains there.
SafetyOutcome score_safety(std::span<const TraceSample> trace, const RobotConfig& config,
                           const ZoneThresholds& zones);

}  // namespace fencewire::robot
