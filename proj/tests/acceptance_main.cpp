// End-to-end acceptance gates for the safety pipeline: sensing grid, speed
// law, channel wire behavior, staleness failsafe, stopping margins,
// determinism, live-loop latency, and report content. Every gate prints one
// [PASS] line; the first failed requirement prints [FAIL] with its location
// and exits non-zero. Always on — nothing here compiles out in Release.
#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "fencewire/broker_http.hpp"
#include "fencewire/ciot.hpp"
#include "fencewire/engine.hpp"
#include "fencewire/report.hpp"
#include "fencewire/rng.hpp"
#include "fencewire/safety.hpp"
#include "fencewire/scenario.hpp"

#define REQUIRE(cond, msg)                                                       \
  do {                                                                           \
    if (!(cond)) {                                                               \
      std::fprintf(stderr, "[FAIL] %s:%d %s\n", __FILE__, __LINE__, msg);        \
      std::exit(1);                                                              \
    }                                                                            \
  } while (0)

using namespace fencewire;
namespace fs = std::filesystem;

namespace {

fs::path repo_file(const char* rel) {
  return fs::path(__FILE__).parent_path().parent_path() / rel;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good(), "expected file missing");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t fnv64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Gate 1: every reading the sensor model can produce sits on the 0.01 m grid,
// within half a quantum of the true distance, and nothing beyond max range
// sneaks back in.
void gate_quantizer() {
  DetRng rng(DetRng::derive(1001, "accept-quantizer"));
  const double quantum = 0.01, max_range = 5.0;

  for (int i = 0; i < 100000; ++i) {
    double d = rng.uniform01() * max_range;
    auto r = quantize_range(d, quantum, max_range);
    REQUIRE(r.in_range(), "in-band distance must stay in range");
    double v = *r.distance;
    REQUIRE(std::fabs(v - d) <= 0.5 * quantum, "quantization error above half a quantum");
    long k = std::lround(v / quantum);
    REQUIRE(v == static_cast<double>(k) * quantum, "reading off the sensor grid");
    REQUIRE(v >= 0.0 && v <= max_range, "reading outside the measurable band");
  }
  for (int i = 0; i < 10000; ++i) {
    double d = max_range + 1e-9 + rng.uniform01() * 2.0;
    REQUIRE(!quantize_range(d, quantum, max_range).in_range(),
            "beyond max range must read out-of-range");
  }
  REQUIRE(quantize_range(0.0, quantum, max_range) == RangeReading::at(0.0),
          "zero distance is a valid grid point");

  std::printf("[PASS] quantizer: 100000 samples within half a quantum on the 0.01 m grid\n");
}

// ---------------------------------------------------------------------------
// Gate 2: the speed override is monotone in distance, clamped to [0,1], and
// exact at both zone boundaries, for random thresholds.
void gate_speed_law() {
  DetRng rng(DetRng::derive(1002, "accept-speed-law"));

  for (int i = 0; i < 10000; ++i) {
    ZoneThresholds z;
    z.d_stop = 0.05 + rng.uniform01() * 2.0;
    z.d_slow = z.d_stop + 0.05 + rng.uniform01() * 2.5;

    REQUIRE(speed_override(RangeReading::at(z.d_stop), z) == 0.0,
            "override must be exactly 0 at d_stop");
    REQUIRE(speed_override(RangeReading::at(z.d_slow), z) == 1.0,
            "override must be exactly 1 at d_slow");
    REQUIRE(speed_override(RangeReading::out_of_range(), z) == 1.0,
            "nothing in range means full speed");

    double d1 = rng.uniform01() * z.d_slow * 1.3;
    double d2 = rng.uniform01() * z.d_slow * 1.3;
    if (d1 > d2) std::swap(d1, d2);
    double o1 = speed_override(RangeReading::at(d1), z);
    double o2 = speed_override(RangeReading::at(d2), z);
    REQUIRE(o1 >= 0.0 && o1 <= 1.0, "override outside [0,1]");
    REQUIRE(o2 >= 0.0 && o2 <= 1.0, "override outside [0,1]");
    REQUIRE(o1 <= o2, "override must be monotone in distance");

    Zone zone = classify_zone(RangeReading::at(d1), z);
    if (zone == Zone::Stop) REQUIRE(o1 == 0.0, "stop zone must command zero");
    if (zone == Zone::Clear) REQUIRE(o1 == 1.0, "clear zone must command full speed");
    if (zone == Zone::Slow) REQUIRE(o1 > 0.0 && o1 < 1.0, "slow zone must be fractional");
  }
  std::printf("[PASS] speed law: monotone, clamped, exact at both thresholds (10000 cases)\n");
}

// ---------------------------------------------------------------------------
// Gate 3: the HTTP broker answers exactly like a reference list model —
// accepted ids, "0" rejections with their status codes, timestamps, and
// ascending feed order — over randomized write/read schedules.
struct WireOracle {
  double min_interval = 1.0;
  double last_accepted = -1e300;
  long long last_created = std::numeric_limits<long long>::min();
  struct Entry {
    std::uint64_t id;
    long long created;
    std::map<int, std::string> fields;
  };
  std::vector<Entry> log;

  std::pair<int, std::string> write(bool good_key, bool malformed,
                                    const std::map<int, std::string>& fields, double now) {
    if (!good_key) return {401, "0"};
    if (malformed || fields.empty()) return {400, "0"};
    if (now - last_accepted < min_interval) return {200, "0"};
    last_accepted = now;
    long long created = static_cast<long long>(std::floor(now));
    if (created < last_created) created = last_created;
    last_created = created;
    log.push_back({log.size() + 1, created, fields});
    return {200, std::to_string(log.size())};
  }

  static std::string stamp(long long created) {
    std::time_t t = static_cast<std::time_t>(created);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::string entry_json(const Entry& e) const {
    std::string out = "{\"created_at\":\"" + stamp(e.created) +
                      "\",\"entry_id\":" + std::to_string(e.id);
    for (const auto& [slot, val] : e.fields)
      out += ",\"field" + std::to_string(slot) + "\":\"" + val + "\"";
    return out + "}";
  }

  std::pair<int, std::string> last_json(bool good_key) const {
    if (!good_key) return {401, "{\"error\":\"unauthorized\"}"};
    if (log.empty()) return {404, "{\"error\":\"empty\"}"};
    return {200, entry_json(log.back())};
  }
};

void gate_wire_oracle() {
  constexpr int kChannels = 100;
  std::vector<ciot::ChannelConfig> configs;
  std::vector<WireOracle> oracles(kChannels);
  for (int i = 0; i < kChannels; ++i) {
    ciot::ChannelConfig cfg;
    cfg.channel_id = static_cast<std::uint64_t>(i + 1);
    cfg.write_key = "W" + std::to_string(i + 1);
    cfg.read_key = "R" + std::to_string(i + 1);
    cfg.min_write_interval = 0.25 * (1 + i % 8);
    configs.push_back(cfg);
    oracles[i].min_interval = cfg.min_write_interval;
  }

  ciot::ChannelStore store(std::move(configs));
  double now = static_cast<double>(SimClock::kEpoch);
  ciot::BrokerHttp broker(store, [&now] { return now; });
  int port = broker.start("127.0.0.1", 0);
  httplib::Client http("127.0.0.1", port);

  DetRng rng(DetRng::derive(1003, "accept-wire"));
  int writes = 0, rejected = 0, denied = 0, malformed_count = 0;
  int last_c = 0;

  for (int op = 0; op < 10000; ++op) {
    // Revisit the previous channel often enough to keep its limiter hot.
    int c = rng.uniform01() < 0.5 ? last_c
                                  : static_cast<int>(rng.uniform01() * kChannels) % kChannels;
    last_c = c;
    auto& oracle = oracles[c];
    double action = rng.uniform01();

    if (action < 0.55) {
      now += rng.uniform01() * oracle.min_interval * 1.5;
      bool good_key = rng.uniform01() > 0.08;
      bool malformed = good_key && rng.uniform01() < 0.05;
      std::map<int, std::string> fields;
      int nfields = 1 + static_cast<int>(rng.uniform01() * 3.0);
      for (int f = 0; f < nfields; ++f) {
        int slot = 1 + static_cast<int>(rng.uniform01() * 8.0) % 8;
        char val[16];
        std::snprintf(val, sizeof val, "%.2f", rng.uniform01() * 8.0);
        fields[slot] = val;
      }

      std::string body = "api_key=";
      body += good_key ? ("W" + std::to_string(c + 1)) : "WRONG";
      for (const auto& [slot, val] : fields)
        body += "&field" + std::to_string(slot) + "=" + val;
      if (malformed) body += "&field9=1.00";
      if (rng.uniform01() < 0.1) body += "&note=ok";  // unrelated params are tolerated

      auto expected = oracle.write(good_key, malformed, fields, now);
      auto res = http.Post("/update", body, "application/x-www-form-urlencoded");
      REQUIRE(res, "write request failed at the transport");
      REQUIRE(res->status == expected.first, "write status diverged from the model");
      REQUIRE(res->body == expected.second, "write body diverged from the model");
      ++writes;
      if (expected.first == 200 && expected.second == "0") ++rejected;
      if (expected.first == 401) ++denied;
      if (expected.first == 400) ++malformed_count;
    } else if (action < 0.8) {
      bool good_key = rng.uniform01() > 0.1;
      std::string key = good_key ? ("R" + std::to_string(c + 1)) : "WRONG";
      auto expected = oracle.last_json(good_key);
      auto res = http.Get("/channels/" + std::to_string(c + 1) +
                          "/feeds/last.json?api_key=" + key);
      REQUIRE(res, "read request failed at the transport");
      REQUIRE(res->status == expected.first, "read status diverged from the model");
      REQUIRE(res->body == expected.second, "read body diverged from the model");
    } else {
      int results = 1 + static_cast<int>(rng.uniform01() * 10.0);
      auto res = http.Get("/channels/" + std::to_string(c + 1) +
                          "/feeds.json?api_key=R" + std::to_string(c + 1) +
                          "&results=" + std::to_string(results));
      REQUIRE(res, "feed request failed at the transport");
      REQUIRE(res->status == 200, "feed read must succeed with the right key");
      auto doc = nlohmann::json::parse(res->body);
      const auto& feeds = doc.at("feeds");
      std::size_t expect_n = std::min<std::size_t>(results, oracle.log.size());
      REQUIRE(feeds.size() == expect_n, "feed window size diverged from the model");
      for (std::size_t i = 0; i < feeds.size(); ++i) {
        const auto& mine = oracle.log[oracle.log.size() - expect_n + i];
        REQUIRE(feeds[i].at("entry_id").get<std::uint64_t>() == mine.id,
                "feed order or ids diverged from the model");
        REQUIRE(feeds[i].at("created_at").get<std::string>() == WireOracle::stamp(mine.created),
                "feed timestamp diverged from the model");
        for (const auto& [slot, val] : mine.fields)
          REQUIRE(feeds[i].at("field" + std::to_string(slot)).get<std::string>() == val,
                  "feed field value diverged from the model");
      }
      if (!oracle.log.empty())
        REQUIRE(doc.at("channel").at("last_entry_id").get<std::uint64_t>() == oracle.log.size(),
                "channel echo diverged from the model");
    }
  }

  // Full-log ordering on a few channels.
  for (int c : {0, 37, 99}) {
    auto res = http.Get("/channels/" + std::to_string(c + 1) + "/feeds.json?api_key=R" +
                        std::to_string(c + 1) + "&results=100000");
    REQUIRE(res && res->status == 200, "full feed read failed");
    auto doc = nlohmann::json::parse(res->body);
    REQUIRE(doc.at("feeds").size() == oracles[c].log.size(), "full feed length diverged");
    for (std::size_t i = 0; i < oracles[c].log.size(); ++i)
      REQUIRE(doc.at("feeds")[i].at("entry_id").get<std::uint64_t>() == i + 1,
              "entry ids must ascend without gaps");
  }

  auto missing = http.Get("/channels/424242/feeds/last.json?api_key=R1");
  REQUIRE(missing && missing->status == 404 && missing->body == "{\"error\":\"not found\"}",
          "unknown channel must report not found");

  broker.stop();
  REQUIRE(rejected > 0, "schedule never exercised the rate limiter");
  REQUIRE(denied > 0, "schedule never exercised key rejection");
  REQUIRE(malformed_count > 0, "schedule never exercised malformed fields");
  std::printf(
      "[PASS] broker wire responses match the reference model over 10000 operations "
      "(%d writes: %d rate-limited, %d denied, %d malformed)\n",
      writes, rejected, denied, malformed_count);
}

// ---------------------------------------------------------------------------
// Gate 4: once telemetry has been stale for the watchdog window plus one poll
// period during a blackout, every command is FAULT_STOP with override 0 until
// a fresh entry arrives.
void gate_blackout_failsafe() {
  auto spec = load_scenario(repo_file("scenarios/blackout.json"));
  REQUIRE(!spec.comms.blackouts.empty(), "scenario must define a blackout");
  auto m = run_lockstep(spec);
  REQUIRE(m.invariants.all_ok(), "run invariants violated");

  const double window_begin =
      spec.comms.blackouts[0].first + spec.stale_after + spec.poll_interval;
  const double blackout_end = spec.comms.blackouts[0].second;

  bool in_window = false;
  bool recovered = false;
  for (const auto& rec : m.commands) {
    if (rec.cmd.issued_at < window_begin) continue;
    if (rec.cmd.mode != Mode::FaultStop) {
      // The first non-fault command must be driven by a post-blackout entry.
      REQUIRE(rec.cmd.issued_at >= blackout_end,
              "left fault stop before a fresh entry could exist");
      REQUIRE(rec.cmd.cause_entry_id.has_value(),
              "recovery command must cite the entry that caused it");
      recovered = true;
      break;
    }
    REQUIRE(rec.cmd.override_fraction == 0.0, "faulted command must hold override 0");
    in_window = true;
  }
  REQUIRE(in_window, "no commands landed inside the failsafe window");
  REQUIRE(recovered, "the loop never recovered after the blackout");
  std::printf(
      "[PASS] blackout failsafe: every command past the staleness horizon is "
      "FAULT_STOP with override 0 until fresh data\n");
}

// ---------------------------------------------------------------------------
// Gate 5: on the canonical approach the worst-case detection lag is
// write_interval + poll_interval + one tick = 1.26 s, i.e. 0.63 m at 0.5 m/s.
// The 1.5 m slow band absorbs that, so the robot must be standing still
// before the object reaches d_stop; with 4 s writes the lag bound (2.13 m)
// exceeds the band and the stop must be missed.
void gate_stopping_margin() {
  auto spec = load_scenario(repo_file("scenarios/canonical.json"));

  auto t0 = std::chrono::steady_clock::now();
  auto m = run_lockstep(spec);
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  REQUIRE(elapsed < 5.0, "canonical run must finish in under five seconds");

  REQUIRE(m.invariants.all_ok(), "run invariants violated");
  REQUIRE(m.safety.stop_achieved_before_d_stop, "robot failed to stop before d_stop");
  REQUIRE(m.safety.violation_ticks == 0, "robot moved inside its own envelope");

  // The slow-down lands within the analytic lag bound of the d_slow crossing.
  const double lag_bound = 1.0 + spec.poll_interval + spec.tick;  // 1.26 s
  std::size_t crossing = m.rows.size();
  for (std::size_t i = 0; i < m.rows.size(); ++i)
    if (m.rows[i].true_range < spec.zones.d_slow) {
      crossing = i;
      break;
    }
  REQUIRE(crossing < m.rows.size(), "object never entered the slow band");
  bool slowed = false;
  std::size_t horizon =
      std::min(m.rows.size(), crossing + static_cast<std::size_t>(lag_bound / spec.tick) + 1);
  for (std::size_t i = crossing; i < horizon; ++i)
    if (m.rows[i].robot_speed < spec.robot.nominal_speed) {
      slowed = true;
      break;
    }
  REQUIRE(slowed, "slow-down arrived later than the detection lag bound");

  // Same geometry, but sampling every 4 s: worst-case penetration 2.13 m
  // exceeds the 1.5 m slow band, so the stop flag must come back false.
  auto slow_writer = spec;
  slow_writer.sensors[0].write_interval = 4.0;
  slow_writer.stale_after = 12.0;
  auto miss = run_lockstep(slow_writer);
  REQUIRE(miss.invariants.all_ok(), "run invariants violated on the slow-writer variant");
  REQUIRE(!miss.safety.stop_achieved_before_d_stop,
          "4 s writes cannot honour the stop margin, yet the flag claims success");

  std::printf(
      "[PASS] canonical approach stops before d_stop in %.2f ms of wall time; "
      "4 s write cadence misses the margin as the lag bound predicts\n",
      elapsed * 1000.0);
}

// ---------------------------------------------------------------------------
// Gate 6: identical scenario, identical seed, identical bytes.
void gate_determinism() {
  auto spec = load_scenario(repo_file("scenarios/canonical.json"));
  auto dir_a = fs::temp_directory_path() / "fencewire_accept_run_a";
  auto dir_b = fs::temp_directory_path() / "fencewire_accept_run_b";
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);

  auto pa = emit_report(run_lockstep(spec), dir_a);
  auto pb = emit_report(run_lockstep(spec), dir_b);
  std::string csv_a = read_file(pa.csv);
  std::string csv_b = read_file(pb.csv);
  std::uint64_t da = fnv64(csv_a), db = fnv64(csv_b);
  REQUIRE(csv_a == csv_b, "two identical runs produced different run.csv bytes");
  REQUIRE(da == db, "digest mismatch on identical bytes");
  REQUIRE(read_file(pa.summary) == read_file(pb.summary),
          "two identical runs produced different summaries");

  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
  std::printf("[PASS] lockstep determinism: identical run.csv digests (fnv64 %016llx)\n",
              static_cast<unsigned long long>(da));
}

// ---------------------------------------------------------------------------
// Gate 7: over a real 30 s run through the HTTP broker, the p95
// sense-to-command latency stays inside write_interval + poll_interval +
// 0.1 s of margin.
void gate_live_latency() {
  ScenarioSpec spec;
  spec.name = "live-loop";
  spec.duration = 30.0;
  spec.tick = 0.01;
  spec.seed = 99;
  spec.initial_range = 1.2;  // parked in the slow band: every entry matters

  SensorNodeConfig s;
  s.placement.sensor_id = "s1";
  s.write_interval = 1.0;
  s.noise_sigma = 0.005;
  spec.sensors.push_back(s);

  spec.poll_interval = 0.25;
  spec.min_write_interval = 0.5;
  spec.stale_after = 3.0;

  auto m = run_realtime(spec);
  REQUIRE(m.invariants.all_ok(), "run invariants violated in the live loop");
  REQUIRE(m.latency.count >= 20, "too few fresh entries made it through the live loop");

  const double budget = 1.0 + spec.poll_interval + 0.1;  // 1.35 s
  REQUIRE(m.latency.p95 <= budget, "p95 sense-to-command latency over budget");

  std::printf(
      "[PASS] live loop over HTTP: p95 latency %.4f s within the %.2f s budget "
      "(n=%zu p50=%.4f max=%.4f)\n",
      m.latency.p95, budget, m.latency.count, m.latency.p50, m.latency.max);
}

// ---------------------------------------------------------------------------
// Gate 8: the emitted distance plot carries one marker per channel entry —
// duration/write_interval of them, give or take the final boundary — and the
// recorded approach ramp is monotone.
void gate_distance_plot() {
  auto spec = load_scenario(repo_file("scenarios/canonical.json"));
  auto m = run_lockstep(spec);
  auto dir = fs::temp_directory_path() / "fencewire_accept_plot";
  fs::remove_all(dir);
  auto paths = emit_report(m, dir);
  std::string svg = read_file(paths.distance_svg);

  std::size_t markers = 0;
  for (std::size_t pos = svg.find("class=\"sample\""); pos != std::string::npos;
       pos = svg.find("class=\"sample\"", pos + 1))
    ++markers;

  REQUIRE(markers == m.channel_log.size(), "plot must carry one marker per channel entry");
  double expected = spec.duration / spec.sensors[0].write_interval;
  REQUIRE(std::fabs(static_cast<double>(markers) - expected) <= 1.0,
          "marker count must track the write cadence");

  // The channel recorded a monotone approach.
  double prev = std::numeric_limits<double>::infinity();
  for (const auto& logged : m.channel_log) {
    double dist = std::numeric_limits<double>::infinity();
    for (const auto& [slot, val] : logged.entry.fields) {
      if (slot >= ciot::wire::kTimeSlot) continue;
      char* end = nullptr;
      double v = std::strtod(val.c_str(), &end);
      if (end != val.c_str() && *end == '\0' && v >= 0.0) dist = std::min(dist, v);
    }
    if (!std::isfinite(dist)) continue;
    REQUIRE(dist <= prev, "recorded approach ramp must be monotone");
    prev = dist;
  }

  fs::remove_all(dir);
  std::printf("[PASS] distance plot: %zu markers, one per channel entry, on a monotone ramp\n",
              markers);
}

}  // namespace

int main() {
  gate_quantizer();
  gate_speed_law();
  gate_wire_oracle();
  gate_blackout_failsafe();
  gate_stopping_margin();
  gate_determinism();
  gate_live_latency();
  gate_distance_plot();
  std::printf("acceptance: all 8 gates passed\n");
  return 0;
}
