#pragma once

#include <chrono>
#include <cstdint>

namespace fencewire {

// Two timelines run through the system: wall() is the broker-facing UTC
// timestamp (seconds since the Unix epoch, fractional), since_start() is
// seconds since the run began and is what sample times, command times, and
// latency math use. Keeping them on one interface lets lockstep runs swap in
// simulated time without the components noticing.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double wall() const = 0;
  virtual double since_start() const = 0;
};

// Simulated clock for lockstep runs. Offset from a fixed epoch so rendered
// channel timestamps look like real dates while staying fully deterministic.
class SimClock : public Clock {
 public:
  static constexpr std::int64_t kEpoch = 1735689600;  // 2025-01-01T00:00:00Z

  double wall() const override { return static_cast<double>(kEpoch) + t_; }
  double since_start() const override { return t_; }
  void advance_to(double t) { t_ = t; }

 private:
  double t_ = 0.0;
};

// Real clock: system time for wall stamps, steady time for run-relative math
// so NTP steps cannot corrupt latency measurements.
class WallClock : public Clock {
 public:
  WallClock() : t0_(std::chrono::steady_clock::now()) {}

  double wall() const override {
    auto now = std::chrono::system_clock::now().time_since_epoch();
    return std::chrono::duration<double>(now).count();
  }
  double since_start() const override {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
  }

 private:
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace fencewire
