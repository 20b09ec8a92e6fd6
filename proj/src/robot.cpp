#include "fencewire/robot.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fencewire::robot {

void RobotConfig::validate(const ZoneThresholds& zones) const {
  if (!(nominal_speed > 0.0))
    throw std::invalid_argument("robot: nominal_speed must be > 0");
  if (!(envelope_radius > 0.0))
    throw std::invalid_argument("robot: envelope_radius must be > 0");
  if (!(sweep_length > 0.0)) throw std::invalid_argument("robot: sweep_length must be > 0");
  if (decel_limit && !(*decel_limit > 0.0))
    throw std::invalid_argument("robot: decel_limit must be > 0 when set");
  // The stop boundary has to sit outside the arm's reach, otherwise the zone
  // scheme cannot stop the arm before contact is possible.
  if (envelope_radius >= zones.d_stop)
    throw std::invalid_argument("robot: envelope_radius must be < d_stop");
}

RobotState apply_command(RobotState state, const SupervisorCommand& cmd,
                         const RobotConfig& config, double dt) {
  state.applied_override = std::clamp(cmd.override_fraction, 0.0, 1.0);
  double target = config.nominal_speed * state.applied_override;
  if (!config.decel_limit) {
    state.actual_speed = target;
    return state;
  }
  double step = *config.decel_limit * dt;
  double gap = target - state.actual_speed;
  // Snap when within a step (with a hair of slack for accumulated float
  // error) so convergence lands on the target exactly.
  if (std::fabs(gap) <= step + 1e-12 * config.nominal_speed) {
    state.actual_speed = target;
  } else {
    state.actual_speed += (gap > 0.0 ? step : -step);
  }
  return state;
}

RobotState advance(RobotState state, const RobotConfig& config, double dt) {
  double phase = state.path_phase + state.actual_speed * dt / config.path_length();
  state.path_phase = phase - std::floor(phase);
  return state;
}

SafetyOutcome score_safety(std::span<const TraceSample> trace, const RobotConfig& config,
                           const ZoneThresholds& zones) {
  SafetyOutcome out;
  out.min_object_clearance = std::numeric_limits<double>::infinity();
  for (const auto& s : trace) {
    out.min_object_clearance =
        std::min(out.min_object_clearance, s.object_range - config.envelope_radius);
    // Any moving tick at or inside d_stop spoils the stop flag; a run where
    // the object never gets that close passes vacuously.
    if (s.object_range <= zones.d_stop && s.robot_speed != 0.0)
      out.stop_achieved_before_d_stop = false;
    if (s.object_range < config.envelope_radius && s.robot_speed > 0.0)
      out.violation_ticks += 1;
  }
  if (trace.empty()) out.min_object_clearance = 0.0;
  return out;
}

}  // namespace fencewire::robot
