// fencewire command line: run scenarios, host a broker, replay traces,
// validate scenario files.

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "fencewire/broker_http.hpp"
#include "fencewire/ciot.hpp"
#include "fencewire/engine.hpp"
#include "fencewire/log.hpp"
#include "fencewire/report.hpp"
#include "fencewire/scenario.hpp"

namespace {

// 0 = success, 2 = bad input (scenario/config/usage), 3 = runtime fault,
// 4 = a post-run invariant failed.
constexpr int kExitOk = 0;
constexpr int kExitBadInput = 2;
constexpr int kExitRuntime = 3;
constexpr int kExitInvariant = 4;

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

int print_issues(const std::vector<fencewire::ValidationIssue>& issues) {
  for (const auto& i : issues) std::cerr << "scenario." << i.path << ": " << i.message << "\n";
  std::cerr << issues.size() << " validation issue(s)\n";
  return kExitBadInput;
}

int cmd_run(const std::string& scenario_file, const std::string& mode,
            std::optional<std::uint64_t> seed_override, const std::string& out_dir, int port,
            const std::string& endpoint) {
  fencewire::ScenarioSpec spec;
  try {
    spec = fencewire::load_scenario(scenario_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  if (seed_override) spec.seed = *seed_override;
  if (auto issues = fencewire::validate(spec); !issues.empty()) return print_issues(issues);

  fencewire::RunMetrics metrics;
  try {
    if (mode == "lockstep") {
      metrics = fencewire::run_lockstep(spec);
    } else {
      fencewire::RealtimeOptions opts;
      opts.port = port;
      opts.external_endpoint = endpoint;
      metrics = fencewire::run_realtime(spec, opts);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  try {
    auto paths = fencewire::emit_report(metrics, out_dir);
    std::cout << fencewire::summary_to_string(metrics);
    std::cerr << "report: " << paths.csv.string() << ", " << paths.summary.string()
              << ", 3 plots\n";
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  if (!metrics.invariants.all_ok()) {
    for (const auto& n : metrics.invariants.notes) std::cerr << "invariant: " << n << "\n";
    return kExitInvariant;
  }
  return kExitOk;
}

int cmd_broker(const std::string& config_file, const std::string& host, int port,
               const std::string& data_dir) {
  std::vector<fencewire::ciot::ChannelConfig> channels;
  try {
    std::ifstream in(config_file);
    if (!in) throw std::runtime_error("cannot open " + config_file);
    nlohmann::json j = nlohmann::json::parse(in);
    for (const auto& c : j.at("channels")) {
      fencewire::ciot::ChannelConfig cfg;
      cfg.channel_id = c.at("channel_id").get<std::uint64_t>();
      cfg.write_key = c.at("write_key").get<std::string>();
      cfg.read_key = c.at("read_key").get<std::string>();
      cfg.min_write_interval = c.value("min_write_interval", 1.0);
      if (c.contains("field_names"))
        for (const auto& [slot, name] : c["field_names"].items())
          cfg.field_names[std::stoi(slot)] = name.get<std::string>();
      channels.push_back(std::move(cfg));
    }
    if (channels.empty()) throw std::runtime_error("config declares no channels");
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitBadInput;
  }

  std::optional<std::filesystem::path> dir;
  if (!data_dir.empty()) dir = data_dir;

  try {
    fencewire::ciot::ChannelStore store(std::move(channels), dir);
    fencewire::WallClock clock;
    fencewire::ciot::BrokerHttp broker(store, [&clock] { return clock.wall(); });
    int bound = broker.start(host, port);
    std::cout << "broker listening on " << host << ":" << bound << "\n";

    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_stop.load()) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    std::cerr << "shutting down\n";
    broker.stop();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

int cmd_replay(const std::string& csv_file) {
  fencewire::RunMetrics metrics;
  try {
    metrics = fencewire::replay_csv(csv_file);
  } catch (const fencewire::ReplayError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }

  std::string summary = fencewire::summary_to_string(metrics);
  std::cout << summary;

  // When the original summary sits next to the CSV, verify the replay
  // reproduces it exactly.
  auto sibling = std::filesystem::path(csv_file).parent_path() / "summary.json";
  if (std::filesystem::exists(sibling)) {
    std::ifstream in(sibling, std::ios::binary);
    std::stringstream buf;
    buf << in.rdbuf();
    if (buf.str() != summary) {
      std::cerr << "error: replayed summary differs from " << sibling.string() << "\n";
      return kExitRuntime;
    }
    std::cerr << "replay matches " << sibling.string() << "\n";
  }
  return kExitOk;
}

int cmd_validate(const std::string& scenario_file) {
  fencewire::ScenarioSpec spec;
  try {
    spec = fencewire::load_scenario(scenario_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadInput;
  }
  if (auto issues = fencewire::validate(spec); !issues.empty()) return print_issues(issues);
  std::cout << "ok: " << (spec.name.empty() ? scenario_file : spec.name) << " ("
            << spec.sensors.size() << " sensor(s), " << spec.duration << "s)\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fencewire: speed-and-separation monitoring over a channel broker"};
  app.require_subcommand(1);

  // run
  std::string scenario_file, out_dir = "out", mode = "lockstep", endpoint;
  std::optional<std::uint64_t> seed_override;
  int run_port = 0;
  auto* run = app.add_subcommand("run", "run a scenario and write its report");
  run->add_option("--scenario", scenario_file, "scenario JSON file")->required();
  run->add_option("--mode", mode, "lockstep (simulated time) or realtime (HTTP, wall clock)")
      ->check(CLI::IsMember({"lockstep", "realtime"}));
  run->add_option("--seed", seed_override, "override the scenario seed");
  run->add_option("--out", out_dir, "report output directory (default: out)");
  run->add_option("--port", run_port, "realtime: port for the spawned broker (0 = any)");
  run->add_option("--endpoint", endpoint,
                  "realtime: use an already-running broker at this URL instead of spawning one");

  // broker
  std::string broker_config, broker_host = "0.0.0.0", broker_data_dir;
  int broker_port = 8080;
  auto* broker = app.add_subcommand("broker", "host a standalone channel broker");
  broker->add_option("--config", broker_config, "broker channel config JSON")->required();
  broker->add_option("--host", broker_host, "bind address (default 0.0.0.0)");
  broker->add_option("--port", broker_port, "listen port (default 8080)");
  broker->add_option("--data-dir", broker_data_dir, "persist channel logs in this directory");

  // replay
  std::string replay_csv_file;
  auto* replay = app.add_subcommand("replay", "rebuild a summary from a run.csv");
  replay->add_option("--csv", replay_csv_file, "run.csv produced by `fencewire run`")->required();

  // validate
  std::string validate_file;
  auto* validate = app.add_subcommand("validate", "check a scenario file without running it");
  validate->add_option("--scenario", validate_file, "scenario JSON file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitBadInput;
  }

  if (run->parsed())
    return cmd_run(scenario_file, mode, seed_override, out_dir, run_port, endpoint);
  if (broker->parsed()) return cmd_broker(broker_config, broker_host, broker_port, broker_data_dir);
  if (replay->parsed()) return cmd_replay(replay_csv_file);
  return cmd_validate(validate_file);
}
