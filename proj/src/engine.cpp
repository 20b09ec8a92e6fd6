#include "fencewire/engine.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <limits>
#include <mutex>
#include <queue>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "fencewire/broker_http.hpp"
#include "fencewire/client.hpp"
#include "fencewire/clock.hpp"
#include "fencewire/log.hpp"
#include "fencewire/sensor.hpp"

namespace fencewire {

namespace {

constexpr const char* kRunWriteKey = "FWRITE000000001";
constexpr const char* kRunReadKey = "FREAD0000000001";
constexpr std::uint64_t kRunChannelId = 1;

std::string issues_to_string(const std::vector<ValidationIssue>& issues) {
  std::ostringstream ss;
  ss << "scenario failed validation:";
  for (const auto& i : issues) ss << "\n  " << i.path << ": " << i.message;
  return ss.str();
}

// Per-node runtime bundle, ordered by ascending sensor_id (= slot order).
struct NodeRt {
  SensorNodeConfig cfg;
  int slot = 0;
  std::uint64_t period_ticks = 0;
  DetRng rng{0};
};

std::vector<NodeRt> build_nodes(const ScenarioSpec& spec) {
  std::vector<SensorPlacement> placements;
  for (const auto& s : spec.sensors) placements.push_back(s.placement);
  auto slots = field_slots(placements);

  std::vector<NodeRt> nodes;
  for (const auto& s : spec.sensors) {
    NodeRt n;
    n.cfg = s;
    n.slot = slots.at(s.placement.sensor_id);
    n.period_ticks = static_cast<std::uint64_t>(std::llround(s.write_interval / spec.tick));
    n.rng = DetRng(DetRng::derive(spec.seed, s.placement.sensor_id));
    nodes.push_back(std::move(n));
  }
  std::sort(nodes.begin(), nodes.end(),
            [](const NodeRt& a, const NodeRt& b) { return a.slot < b.slot; });
  return nodes;
}

ciot::ChannelConfig run_channel_config(const ScenarioSpec& spec) {
  ciot::ChannelConfig cfg;
  cfg.channel_id = kRunChannelId;
  cfg.write_key = kRunWriteKey;
  cfg.read_key = kRunReadKey;
  cfg.min_write_interval = spec.min_write_interval;
  std::vector<SensorPlacement> placements;
  for (const auto& s : spec.sensors) placements.push_back(s.placement);
  for (const auto& [id, slot] : field_slots(placements)) cfg.field_names[slot] = "dist_" + id;
  cfg.field_names[ciot::wire::kTimeSlot] = "t_sample";
  return cfg;
}

// Fails every publish that falls inside a blackout window, otherwise passes
// through. Used identically by both run modes.
class BlackoutWriter : public ciot::ChannelWriter {
 public:
  BlackoutWriter(ciot::ChannelWriter& inner, const CommsSpec& comms, const Clock& clock)
      : inner_(inner), comms_(comms), clock_(clock) {}

  ciot::PublishResult publish(const ciot::FieldMap& fields) override {
    if (comms_.in_blackout(clock_.since_start()))
      return {ciot::PublishStatus::TransportError, 0, "comms blackout", true};
    return inner_.publish(fields);
  }

 private:
  ciot::ChannelWriter& inner_;
  const CommsSpec& comms_;
  const Clock& clock_;
};

void seed_metrics(RunMetrics& m, const ScenarioSpec& spec, const char* mode,
                  const std::vector<NodeRt>& nodes) {
  m.scenario_name = spec.name;
  m.run_mode = mode;
  m.duration = spec.duration;
  m.tick = spec.tick;
  m.envelope_radius = spec.robot.envelope_radius;
  m.d_stop = spec.zones.d_stop;
  m.d_slow = spec.zones.d_slow;
  m.stale_after = spec.stale_after;
  m.nominal_speed = spec.robot.nominal_speed;
  m.seed = spec.seed;
  for (const auto& n : nodes) m.sensor_ids.push_back(n.cfg.placement.sensor_id);
}

void count_node_outcome(RunCounts& counts, PublishOutcome outcome) {
  switch (outcome) {
    case PublishOutcome::Published: counts.published += 1; break;
    case PublishOutcome::Dropped: counts.dropped += 1; break;
    case PublishOutcome::DroppedError:
      counts.dropped += 1;
      counts.transport_errors += 1;
      break;
    case PublishOutcome::RateLimited: counts.rate_limited += 1; break;
    case PublishOutcome::InFlight: break;  // resolved at delivery
  }
}

void finish_metrics(RunMetrics& m) {
  m.latency = latency_from_rows(m.rows);
  m.safety = safety_from_rows(m.rows, m.envelope_radius, m.d_stop, m.d_slow);

  auto& inv = m.invariants;
  // Speed bound: clamped override times nominal can never exceed nominal.
  for (const auto& r : m.rows) {
    if (r.robot_speed < -1e-12 || r.robot_speed > m.nominal_speed + 1e-9) {
      inv.speed_bound = false;
      inv.notes.push_back("speed " + std::to_string(r.robot_speed) + " out of bounds at t=" +
                          std::to_string(r.t));
      break;
    }
  }
  // Conservation: every attempted publish resolved to exactly one outcome.
  if (m.counts.attempts != m.counts.published + m.counts.dropped + m.counts.rate_limited) {
    inv.conservation = false;
    inv.notes.push_back("publish outcomes do not add up to attempts");
  }
  // The channel log must be gapless and ascending.
  for (std::size_t i = 0; i < m.channel_log.size(); ++i) {
    if (m.channel_log[i].entry.entry_id != i + 1) {
      inv.log_gapless = false;
      inv.notes.push_back("entry id gap at index " + std::to_string(i));
      break;
    }
    if (i > 0 &&
        m.channel_log[i].entry.created_at < m.channel_log[i - 1].entry.created_at) {
      inv.log_gapless = false;
      inv.notes.push_back("created_at not monotone at entry " +
                          std::to_string(m.channel_log[i].entry.entry_id));
      break;
    }
  }
  // Failsafe dominance: at each command instant, find the newest entry that
  // was readable; if its age exceeded stale_after the command must be a
  // FAULT_STOP with zero override. The supervisor computes age from the same
  // truncated created_at stamps, so this check never false-fails on rounding.
  for (const auto& c : m.commands) {
    const ChannelLogEntry* newest = nullptr;
    for (const auto& e : m.channel_log) {
      if (e.available_at <= c.cmd.issued_at + 1e-9) newest = &e;
      else break;
    }
    bool stale = true;
    if (newest) {
      double age = c.wall_at_issue - static_cast<double>(newest->entry.created_at);
      stale = age > m.stale_after + 1e-9;
    }
    if (stale && (c.cmd.override_fraction != 0.0 || c.cmd.mode != Mode::FaultStop)) {
      inv.failsafe_dominance = false;
      inv.notes.push_back("moving command at t=" + std::to_string(c.cmd.issued_at) +
                          " despite stale channel data");
      break;
    }
  }
}

}  // namespace

double round_to(double v, double decade) { return std::round(v / decade) * decade; }

LatencyStats latency_from_rows(const std::vector<TickRow>& rows) {
  std::vector<double> xs;
  for (const auto& r : rows)
    if (r.latency_s) xs.push_back(*r.latency_s);
  LatencyStats out;
  out.count = xs.size();
  if (xs.empty()) return out;
  std::sort(xs.begin(), xs.end());
  auto rank = [&](double q) {
    std::size_t idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(xs.size())));
    return xs[idx == 0 ? 0 : idx - 1];  // nearest-rank percentile
  };
  out.p50 = rank(0.50);
  out.p95 = rank(0.95);
  out.max = xs.back();
  return out;
}

robot::SafetyOutcome safety_from_rows(const std::vector<TickRow>& rows, double envelope_radius,
                                      double d_stop, double d_slow) {
  std::vector<robot::TraceSample> trace;
  trace.reserve(rows.size());
  for (const auto& r : rows) trace.push_back({r.true_range, r.robot_speed});
  robot::RobotConfig cfg;
  cfg.envelope_radius = envelope_radius;
  ZoneThresholds zones{d_stop, d_slow};
  return robot::score_safety(trace, cfg, zones);
}

// ---------------------------------------------------------------------------
// Lockstep
// ---------------------------------------------------------------------------

namespace {

// Simulated uplink: publishes are queued with a delivery time and handed to
// the broker during the delivery phase of the owning tick, so a node only
// learns "in flight" at publish time. Delivery order is (deliver_at, send
// sequence), which keeps interleavings deterministic even with mixed delays.
class SimUplink {
 public:
  struct Pending {
    double deliver_at;
    std::uint64_t seq;
    std::size_t node_idx;
    ciot::FieldMap fields;
  };
  struct Delivered {
    std::size_t node_idx;
    ciot::WriteResult result;
    double deliver_at;
  };

  SimUplink(ciot::ChannelStore& store, std::string write_key)
      : store_(store), write_key_(std::move(write_key)) {}

  void enqueue(double deliver_at, std::size_t node_idx, ciot::FieldMap fields) {
    queue_.push(Pending{deliver_at, next_seq_++, node_idx, std::move(fields)});
  }

  std::vector<Delivered> deliver_due(double now) {
    std::vector<Delivered> out;
    while (!queue_.empty() && queue_.top().deliver_at <= now + 1e-12) {
      Pending p = queue_.top();
      queue_.pop();
      double wall = static_cast<double>(SimClock::kEpoch) + p.deliver_at;
      out.push_back({p.node_idx, store_.write(write_key_, p.fields, wall), p.deliver_at});
    }
    return out;
  }

 private:
  struct Later {
    bool operator()(const Pending& a, const Pending& b) const {
      return std::tie(a.deliver_at, a.seq) > std::tie(b.deliver_at, b.seq);
    }
  };
  ciot::ChannelStore& store_;
  std::string write_key_;
  std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
  std::uint64_t next_seq_ = 0;
};

class UplinkWriter : public ciot::ChannelWriter {
 public:
  UplinkWriter(SimUplink& uplink, const Clock& clock) : uplink_(uplink), clock_(clock) {}

  void bind(std::size_t node_idx, double delay) {
    node_idx_ = node_idx;
    delay_ = delay;
  }

  ciot::PublishResult publish(const ciot::FieldMap& fields) override {
    uplink_.enqueue(clock_.since_start() + delay_, node_idx_, fields);
    return {ciot::PublishStatus::InFlight, 0, "", false};
  }

 private:
  SimUplink& uplink_;
  const Clock& clock_;
  std::size_t node_idx_ = 0;
  double delay_ = 0.0;
};

}  // namespace

RunMetrics run_lockstep(const ScenarioSpec& spec) {
  auto issues = validate(spec);
  if (!issues.empty()) throw std::invalid_argument(issues_to_string(issues));

  SimClock clock;
  ciot::ChannelStore store({run_channel_config(spec)});
  auto nodes = build_nodes(spec);

  RunMetrics m;
  seed_metrics(m, spec, "lockstep", nodes);

  SimUplink uplink(store, kRunWriteKey);
  UplinkWriter uplink_writer(uplink, clock);
  BlackoutWriter writer(uplink_writer, spec.comms, clock);
  ciot::DirectReader reader(store, kRunChannelId, kRunReadKey);
  ObjectPath path(spec);

  SupervisorConfig scfg = spec.supervisor_config();
  SupervisorState sstate;
  robot::RobotState rstate;
  SupervisorCommand applied;  // robot follows this; starts as FAULT_STOP / 0
  std::optional<SupervisorCommand> slot;  // capacity-1, newest wins

  const std::uint64_t ticks = static_cast<std::uint64_t>(std::llround(spec.duration / spec.tick));
  const std::uint64_t poll_period =
      static_cast<std::uint64_t>(std::llround(spec.poll_interval / spec.tick));

  std::vector<double> delivered_at_by_entry;  // entry_id - 1 -> run-relative time
  std::optional<std::uint64_t> latency_logged;  // newest entry already measured

  for (std::uint64_t i = 0; i < ticks; ++i) {
    const double t = static_cast<double>(i) * spec.tick;
    clock.advance_to(t);
    const ObjectState obj = path.state_at(t);

    TickRow row;
    row.t = round_to(t, 1e-4);
    row.true_range = round_to(obj.range, 1e-6);
    row.bearing = round_to(obj.bearing_deg, 1e-3);
    row.measured.assign(nodes.size(), "");

    // 1) sensor publish cycles due this tick, in slot order
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      auto& n = nodes[k];
      if (i % n.period_ticks != 0) continue;
      uplink_writer.bind(k, n.cfg.uplink_delay);
      NodeTickResult r = node_tick(n.cfg, n.slot, obj, writer, clock, n.rng);
      m.counts.attempts += 1;
      count_node_outcome(m.counts, r.outcome);
      row.measured[k] = r.reading.in_range()
                            ? ciot::wire::format_distance(*r.reading.distance, n.cfg.quantum)
                            : ciot::wire::kOutOfRangeToken;
    }

    // 2) broker receives whatever the uplink owes it by now
    for (const auto& d : uplink.deliver_due(t)) {
      (void)d.node_idx;
      if (d.result.status == ciot::WriteStatus::Accepted) {
        m.counts.published += 1;
        delivered_at_by_entry.push_back(d.deliver_at);
      } else if (d.result.status == ciot::WriteStatus::RateLimited) {
        m.counts.rate_limited += 1;
      } else {
        m.counts.dropped += 1;
        m.counts.transport_errors += 1;
      }
    }

    // 3) supervisor poll
    if (i % poll_period == 0) {
      auto [st, cmd] = poll_once(std::move(sstate), scfg, reader, clock);
      sstate = std::move(st);
      m.counts.polls += 1;
      m.commands.push_back({cmd, clock.wall(), sstate.last_entry_id});
      slot = cmd;
      // Latency is measured once per entry, at the first command the entry
      // causes; later polls reusing the same entry are not new observations.
      if (cmd.mode != Mode::FaultStop && cmd.cause_entry_id && cmd.sample_time &&
          latency_logged != cmd.cause_entry_id) {
        latency_logged = cmd.cause_entry_id;
        row.latency_s = round_to(cmd.issued_at - *cmd.sample_time, 1e-4);
      }
    }

    // 4) robot applies the newest command and moves
    if (slot) {
      applied = *slot;
      slot.reset();
    }
    rstate = robot::apply_command(rstate, applied, spec.robot, spec.tick);
    rstate = robot::advance(rstate, spec.robot, spec.tick);

    row.entry_id = sstate.last_entry_id;
    row.mode = sstate.mode;
    row.override_fraction = round_to(sstate.override_fraction, 1e-6);
    row.robot_speed = round_to(rstate.actual_speed, 1e-6);
    m.rows.push_back(std::move(row));
  }

  // Resolve publishes still in flight at the end so outcome conservation
  // holds; they arrive after the last poll and influence nothing else.
  for (const auto& d : uplink.deliver_due(std::numeric_limits<double>::infinity())) {
    (void)d.node_idx;
    if (d.result.status == ciot::WriteStatus::Accepted) {
      m.counts.published += 1;
      delivered_at_by_entry.push_back(d.deliver_at);
    } else if (d.result.status == ciot::WriteStatus::RateLimited) {
      m.counts.rate_limited += 1;
    } else {
      m.counts.dropped += 1;
      m.counts.transport_errors += 1;
    }
  }

  m.counts.commands = m.commands.size();
  m.counts.stale_faults = sstate.stale_faults;
  m.counts.decode_warnings = sstate.decode_warnings;
  m.counts.decode_errors = sstate.decode_errors;

  auto entries = store.all_entries(kRunChannelId);
  for (std::size_t i = 0; i < entries.size(); ++i)
    m.channel_log.push_back({entries[i], delivered_at_by_entry[i]});

  finish_metrics(m);
  return m;
}

// ---------------------------------------------------------------------------
// Real time
// ---------------------------------------------------------------------------

namespace {

// Absolute-schedule sleeper that any stop request interrupts.
class StopGate {
 public:
  // Returns false when the run is being stopped.
  bool sleep_until(std::chrono::steady_clock::time_point tp) {
    std::unique_lock lk(mu_);
    return !cv_.wait_until(lk, tp, [&] { return stop_; });
  }
  void trigger() {
    {
      std::lock_guard lk(mu_);
      stop_ = true;
    }
    cv_.notify_all();
  }
  bool stopped() {
    std::lock_guard lk(mu_);
    return stop_;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  bool stop_ = false;
};

struct SampleEvent {
  double t;  // run-relative sample time
  std::size_t node_idx;
  std::string wire_value;
};

}  // namespace

RunMetrics run_realtime(const ScenarioSpec& spec, const RealtimeOptions& opts) {
  auto issues = validate(spec);
  if (!issues.empty()) throw std::invalid_argument(issues_to_string(issues));

  auto nodes = build_nodes(spec);
  RunMetrics m;
  seed_metrics(m, spec, "realtime", nodes);

  // Broker: spawn locally unless an external endpoint was supplied.
  std::unique_ptr<ciot::ChannelStore> store;
  std::unique_ptr<ciot::BrokerHttp> broker;
  std::string endpoint = opts.external_endpoint;
  if (endpoint.empty()) {
    store = std::make_unique<ciot::ChannelStore>(
        std::vector<ciot::ChannelConfig>{run_channel_config(spec)});
    broker = std::make_unique<ciot::BrokerHttp>(*store, [] {
      return std::chrono::duration<double>(
                 std::chrono::system_clock::now().time_since_epoch())
          .count();
    });
    int port = broker->start(opts.host, opts.port);
    endpoint = "http://" + opts.host + ":" + std::to_string(port);
  }
  log::info("realtime: broker endpoint " + endpoint);

  WallClock clock;
  const auto t0 = std::chrono::steady_clock::now();
  const double wall0 = clock.wall();

  StopGate gate;
  std::atomic<std::uint64_t> attempts{0}, published{0}, dropped{0}, transport_errors{0},
      rate_limited{0};
  std::atomic<std::size_t> nodes_started{0};

  std::mutex samples_mu;
  std::vector<SampleEvent> samples;

  struct SupShared {
    std::mutex mu;
    std::vector<CommandRecord> log;
    std::optional<SupervisorCommand> slot;  // capacity 1, newest wins
    SupervisorState final_state;
    std::string config_error;
  } sup;

  // Sensor node threads: measure and publish on each node's cadence.
  std::vector<std::thread> node_threads;
  for (std::size_t k = 0; k < nodes.size(); ++k) {
    node_threads.emplace_back([&, k] {
      NodeRt& n = nodes[k];
      ObjectPath path(spec);
      ciot::HttpWriter http(endpoint, kRunWriteKey);
      BlackoutWriter writer(http, spec.comms, clock);
      for (std::uint64_t cycle = 0;; ++cycle) {
        auto tp = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                           std::chrono::duration<double>(cycle * n.cfg.write_interval));
        if (!gate.sleep_until(tp)) break;
        double now = clock.since_start();
        ObjectState obj = path.state_at(now);
        NodeTickResult r = node_tick(n.cfg, n.slot, obj, writer, clock, n.rng);
        attempts.fetch_add(1);
        switch (r.outcome) {
          case PublishOutcome::Published: published.fetch_add(1); break;
          case PublishOutcome::Dropped: dropped.fetch_add(1); break;
          case PublishOutcome::RateLimited: rate_limited.fetch_add(1); break;
          case PublishOutcome::DroppedError:
          case PublishOutcome::InFlight:  // not produced by the HTTP writer
            dropped.fetch_add(1);
            transport_errors.fetch_add(1);
            break;
        }
        {
          std::lock_guard lk(samples_mu);
          samples.push_back(
              {now, k,
               r.reading.in_range()
                   ? ciot::wire::format_distance(*r.reading.distance, n.cfg.quantum)
                   : ciot::wire::kOutOfRangeToken});
        }
        if (cycle == 0) nodes_started.fetch_add(1);
      }
    });
  }

  // Give every node one publish attempt before the first poll so startup
  // ordering matches the lockstep phase order.
  {
    auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(1);
    while (nodes_started.load() < nodes.size() &&
           std::chrono::steady_clock::now() < deadline)
      std::this_thread::sleep_for(std::chrono::milliseconds(1));
  }

  // Supervisor thread: poll on its own absolute schedule.
  std::thread sup_thread([&] {
    SupervisorConfig scfg = spec.supervisor_config();
    ciot::HttpReader reader(endpoint, kRunChannelId, kRunReadKey);
    SupervisorState state;
    auto sup0 = std::chrono::steady_clock::now() + std::chrono::milliseconds(10);
    for (std::uint64_t k = 0;; ++k) {
      auto tp = sup0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                           std::chrono::duration<double>(k * spec.poll_interval));
      if (!gate.sleep_until(tp)) break;
      try {
        auto [st, cmd] = poll_once(std::move(state), scfg, reader, clock);
        state = std::move(st);
        std::lock_guard lk(sup.mu);
        sup.log.push_back({cmd, clock.wall(), state.last_entry_id});
        sup.slot = cmd;
      } catch (const BrokerConfigError& e) {
        {
          std::lock_guard lk(sup.mu);
          sup.config_error = e.what();
        }
        gate.trigger();
        break;
      }
    }
    std::lock_guard lk(sup.mu);
    sup.final_state = std::move(state);
  });

  // Robot + metrics: the single owner of robot state and the only writer of
  // rows, advancing on the tick cadence.
  robot::RobotState rstate;
  SupervisorCommand applied;
  ObjectPath path(spec);
  const std::uint64_t ticks = static_cast<std::uint64_t>(std::llround(spec.duration / spec.tick));
  std::size_t sample_cursor = 0, log_cursor = 0;
  std::optional<std::uint64_t> entry_seen;
  std::optional<std::uint64_t> latency_logged;
  Mode row_mode = Mode::FaultStop;
  double row_override = 0.0;

  for (std::uint64_t i = 0; i < ticks; ++i) {
    const double t = static_cast<double>(i) * spec.tick;
    auto tp = t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(t));
    if (!gate.sleep_until(tp)) break;

    TickRow row;
    row.t = round_to(t, 1e-4);
    ObjectState obj = path.state_at(t);
    row.true_range = round_to(obj.range, 1e-6);
    row.bearing = round_to(obj.bearing_deg, 1e-3);
    row.measured.assign(nodes.size(), "");

    {
      std::lock_guard lk(samples_mu);
      for (; sample_cursor < samples.size(); ++sample_cursor)
        row.measured[samples[sample_cursor].node_idx] = samples[sample_cursor].wire_value;
    }
    {
      std::lock_guard lk(sup.mu);
      for (; log_cursor < sup.log.size(); ++log_cursor) {
        const CommandRecord& rec = sup.log[log_cursor];
        entry_seen = rec.entry_seen;
        row_mode = rec.cmd.mode;
        row_override = rec.cmd.override_fraction;
        // Once per entry: the first command a new entry causes carries the
        // sense-to-command latency; reuse polls do not.
        if (rec.cmd.mode != Mode::FaultStop && rec.cmd.cause_entry_id && rec.cmd.sample_time &&
            latency_logged != rec.cmd.cause_entry_id) {
          latency_logged = rec.cmd.cause_entry_id;
          row.latency_s = round_to(rec.cmd.issued_at - *rec.cmd.sample_time, 1e-4);
        }
      }
      if (sup.slot) {
        applied = *sup.slot;
        sup.slot.reset();
      }
    }

    rstate = robot::apply_command(rstate, applied, spec.robot, spec.tick);
    rstate = robot::advance(rstate, spec.robot, spec.tick);

    row.entry_id = entry_seen;
    row.mode = row_mode;
    row.override_fraction = round_to(row_override, 1e-6);
    row.robot_speed = round_to(rstate.actual_speed, 1e-6);
    m.rows.push_back(std::move(row));
  }

  gate.trigger();
  for (auto& th : node_threads) th.join();
  sup_thread.join();

  std::string config_error;
  {
    std::lock_guard lk(sup.mu);
    m.commands = sup.log;
    m.counts.stale_faults = sup.final_state.stale_faults;
    m.counts.decode_warnings = sup.final_state.decode_warnings;
    m.counts.decode_errors = sup.final_state.decode_errors;
    config_error = sup.config_error;
  }
  m.counts.attempts = attempts.load();
  m.counts.published = published.load();
  m.counts.dropped = dropped.load();
  m.counts.transport_errors = transport_errors.load();
  m.counts.rate_limited = rate_limited.load();
  m.counts.polls = m.commands.size();
  m.counts.commands = m.commands.size();

  // Pull the channel log over the wire for plots and invariant checks.
  {
    ciot::HttpReader reader(endpoint, kRunChannelId, kRunReadKey);
    auto feed = reader.fetch_feed(1000000);
    if (feed.status == ciot::FetchStatus::Ok) {
      for (const auto& e : feed.entries)
        m.channel_log.push_back({e, static_cast<double>(e.created_at) - wall0});
    }
  }

  if (broker) broker->stop();

  if (!config_error.empty())
    throw std::runtime_error("realtime run aborted: " + config_error);

  finish_metrics(m);
  return m;
}

}  // namespace fencewire
