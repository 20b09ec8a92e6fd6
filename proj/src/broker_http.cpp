#include "fencewire/broker_http.hpp"

#include <httplib.h>
#include <json.hpp>

#include <stdexcept>

#include "fencewire/log.hpp"

namespace fencewire::ciot {

using nlohmann::json;

namespace {

void respond_json(httplib::Response& res, int status, const json& j) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

}  // namespace

BrokerHttp::BrokerHttp(ChannelStore& store, std::function<double()> wall_now)
    : store_(store), wall_now_(std::move(wall_now)), server_(std::make_unique<httplib::Server>()) {
  // SO_REUSEADDR alone: quick restarts reuse TIME_WAIT ports, but a second
  // live broker on the same port must fail loudly instead of load-sharing.
  server_->set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof(yes));
  });
  route();
}

BrokerHttp::~BrokerHttp() { stop(); }

void BrokerHttp::route() {
  auto& svr = *server_;

  svr.Post("/update", [this](const httplib::Request& req, httplib::Response& res) {
    std::string api_key;
    FieldMap fields;
    bool malformed = false;
    for (const auto& [key, value] : req.params) {
      if (key == "api_key") {
        api_key = value;
      } else if (key.rfind("field", 0) == 0) {
        try {
          fields[std::stoi(key.substr(5))] = value;
        } catch (const std::exception&) {
          malformed = true;
        }
      }
      // Other parameters (status, lat, ...) are tolerated and ignored.
    }
    if (malformed) {
      res.status = 400;
      res.set_content("0", "text/plain");
      return;
    }
    WriteResult r = store_.write(api_key, fields, wall_now_());
    switch (r.status) {
      case WriteStatus::Accepted:
        res.set_content(std::to_string(r.entry_id), "text/plain");
        return;
      case WriteStatus::RateLimited:
        // The hosted service reports a rejected update as entry id 0.
        res.set_content("0", "text/plain");
        return;
      case WriteStatus::AuthError:
        res.status = 401;
        res.set_content("0", "text/plain");
        return;
      case WriteStatus::BadRequest:
        res.status = 400;
        res.set_content("0", "text/plain");
        return;
    }
  });

  svr.Get(R"(/channels/(\d+)/feeds/last\.json)",
          [this](const httplib::Request& req, httplib::Response& res) {
            std::uint64_t id = std::stoull(req.matches[1].str());
            auto r = store_.read_last(id, req.get_param_value("api_key"));
            switch (r.status) {
              case ReadStatus::Ok:
                res.set_content(wire::entry_to_json(r.entry), "application/json");
                return;
              case ReadStatus::Empty:
                respond_json(res, 404, json{{"error", "empty"}});
                return;
              case ReadStatus::NotFound:
                respond_json(res, 404, json{{"error", "not found"}});
                return;
              case ReadStatus::AuthError:
                respond_json(res, 401, json{{"error", "unauthorized"}});
                return;
              default:
                respond_json(res, 400, json{{"error", "bad request"}});
                return;
            }
          });

  svr.Get(R"(/channels/(\d+)/feeds\.json)",
          [this](const httplib::Request& req, httplib::Response& res) {
            std::uint64_t id = std::stoull(req.matches[1].str());
            std::size_t results = 100;
            if (req.has_param("results")) {
              try {
                results = std::stoull(req.get_param_value("results"));
              } catch (const std::exception&) {
                respond_json(res, 400, json{{"error", "bad results"}});
                return;
              }
            }
            auto r = store_.read_feed(id, req.get_param_value("api_key"), results);
            switch (r.status) {
              case ReadStatus::Ok: {
                json channel;
                channel["id"] = r.config->channel_id;
                for (const auto& [slot, name] : r.config->field_names)
                  channel["field" + std::to_string(slot)] = name;
                channel["last_entry_id"] =
                    r.entries.empty() ? 0 : r.entries.back().entry_id;
                json feeds = json::array();
                for (const auto& e : r.entries) feeds.push_back(json::parse(wire::entry_to_json(e)));
                respond_json(res, 200, json{{"channel", channel}, {"feeds", feeds}});
                return;
              }
              case ReadStatus::NotFound:
                respond_json(res, 404, json{{"error", "not found"}});
                return;
              case ReadStatus::AuthError:
                respond_json(res, 401, json{{"error", "unauthorized"}});
                return;
              default:
                respond_json(res, 400, json{{"error", "bad request"}});
                return;
            }
          });

  svr.Get(R"(/channels/(\d+)/refine\.json)",
          [this](const httplib::Request& req, httplib::Response& res) {
            std::uint64_t id = std::stoull(req.matches[1].str());
            std::size_t window = 3;
            if (req.has_param("window")) {
              try {
                window = std::stoull(req.get_param_value("window"));
              } catch (const std::exception&) {
                window = 0;
              }
            }
            auto r = store_.refine(id, req.get_param_value("api_key"), window);
            switch (r.status) {
              case ReadStatus::Ok: {
                json fields = json::object();
                for (const auto& [slot, mean] : r.means) fields[std::to_string(slot)] = mean;
                respond_json(res, 200,
                             json{{"fields", fields}, {"skipped", r.skipped}, {"window", window}});
                return;
              }
              case ReadStatus::NotFound:
                respond_json(res, 404, json{{"error", "not found"}});
                return;
              case ReadStatus::AuthError:
                respond_json(res, 401, json{{"error", "unauthorized"}});
                return;
              default:
                respond_json(res, 400, json{{"error", "bad window"}});
                return;
            }
          });
}

int BrokerHttp::start(const std::string& host, int port) {
  if (running_) throw std::runtime_error("broker: already running");
  if (port == 0) {
    port_ = server_->bind_to_any_port(host);
    if (port_ <= 0) throw std::runtime_error("broker: could not bind to any port on " + host);
  } else {
    if (!server_->bind_to_port(host, port))
      throw std::runtime_error("broker: port " + std::to_string(port) + " on " + host +
                               " is unavailable (already in use?)");
    port_ = port;
  }
  running_ = true;
  serve_thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  log::info("broker: listening on " + host + ":" + std::to_string(port_));
  return port_;
}

void BrokerHttp::stop() {
  if (!running_) return;
  running_ = false;
  server_->stop();
  if (serve_thread_.joinable()) serve_thread_.join();
}

}  // namespace fencewire::ciot
