#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include "fencewire/ciot.hpp"

namespace httplib {
class Server;
}

namespace fencewire::ciot {

// HTTP surface of the broker, wire-compatible with the hosted channel service
// for the subset the system uses:
//
//   POST /update                              form body: api_key, field1..8
//     -> 200 text/plain, body = new entry id, or "0" when rate-limited
//   GET  /channels/{id}/feeds/last.json?api_key=K
//     -> 200 entry JSON, or 404 {"error":"empty"}
//   GET  /channels/{id}/feeds.json?api_key=K&results=N
//     -> 200 {"channel":{...},"feeds":[...ascending...]}
//   GET  /channels/{id}/refine.json?api_key=K&window=N   (extension)
//     -> 200 {"fields":{"1":mean,...},"skipped":n,"window":N}
//
// Timestamps for accepted writes come from `wall_now`, injected so tests and
// simulated runs control the clock.
class BrokerHttp {
 public:
  BrokerHttp(ChannelStore& store, std::function<double()> wall_now);
  ~BrokerHttp();

  BrokerHttp(const BrokerHttp&) = delete;
  BrokerHttp& operator=(const BrokerHttp&) = delete;

  // Bind and serve on a background thread. Port 0 picks a free port; the
  // chosen port is returned. Throws std::runtime_error when the bind fails
  // (e.g. the port is already taken).
  int start(const std::string& host, int port);
  void stop();

  int port() const { return port_; }

 private:
  void route();

  ChannelStore& store_;
  std::function<double()> wall_now_;
  std::unique_ptr<httplib::Server> server_;
  std::thread serve_thread_;
  int port_ = 0;
  std::atomic<bool> running_{false};
};

}  // namespace fencewire::ciot
