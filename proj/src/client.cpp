#include "fencewire/client.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cctype>

namespace fencewire::ciot {

using nlohmann::json;

PublishResult DirectWriter::publish(const FieldMap& fields) {
  WriteResult r = store_.write(write_key_, fields, clock_.wall());
  switch (r.status) {
    case WriteStatus::Accepted: return {PublishStatus::Published, r.entry_id, "", false};
    case WriteStatus::RateLimited: return {PublishStatus::RateLimited, 0, "", false};
    case WriteStatus::AuthError: return {PublishStatus::AuthError, 0, "bad write key", false};
    case WriteStatus::BadRequest:
      return {PublishStatus::TransportError, 0, "bad request", false};
  }
  return {PublishStatus::TransportError, 0, "unreachable", false};
}

FetchResult DirectReader::fetch_last() {
  auto r = store_.read_last(channel_id_, read_key_);
  switch (r.status) {
    case ReadStatus::Ok: return {FetchStatus::Ok, r.entry, ""};
    case ReadStatus::Empty: return {FetchStatus::Empty, {}, ""};
    case ReadStatus::NotFound: return {FetchStatus::NotFound, {}, "no such channel"};
    case ReadStatus::AuthError: return {FetchStatus::AuthError, {}, "bad read key"};
    default: return {FetchStatus::TransportError, {}, "bad request"};
  }
}

RefineFetch DirectReader::fetch_refine(std::size_t window) {
  auto r = store_.refine(channel_id_, read_key_, window);
  RefineFetch out;
  switch (r.status) {
    case ReadStatus::Ok:
      out.status = FetchStatus::Ok;
      out.means = r.means;
      out.skipped = r.skipped;
      return out;
    case ReadStatus::NotFound: out.status = FetchStatus::NotFound; return out;
    case ReadStatus::AuthError: out.status = FetchStatus::AuthError; return out;
    default: out.status = FetchStatus::TransportError; return out;
  }
}

namespace {

bool all_digits(const std::string& s) {
  if (s.empty()) return false;
  for (unsigned char c : s)
    if (!std::isdigit(c)) return false;
  return true;
}

std::string encode_update_body(const std::string& key, const FieldMap& fields) {
  std::string body = "api_key=" + wire::url_encode(key);
  for (const auto& [slot, value] : fields)
    body += "&field" + std::to_string(slot) + "=" + wire::url_encode(value);
  return body;
}

}  // namespace

struct HttpWriter::Impl {
  httplib::Client cli;
  std::string write_key;
  Impl(const std::string& endpoint, std::string key) : cli(endpoint), write_key(std::move(key)) {
    cli.set_connection_timeout(2, 0);
    cli.set_read_timeout(2, 0);
  }
};

HttpWriter::HttpWriter(std::string endpoint, std::string write_key)
    : impl_(std::make_unique<Impl>(endpoint, std::move(write_key))) {}

HttpWriter::~HttpWriter() = default;

PublishResult HttpWriter::publish(const FieldMap& fields) {
  auto res = impl_->cli.Post("/update", encode_update_body(impl_->write_key, fields),
                             "application/x-www-form-urlencoded");
  if (!res)
    return {PublishStatus::TransportError, 0, httplib::to_string(res.error()), true};
  if (res->status == 401) return {PublishStatus::AuthError, 0, "bad write key", false};
  if (res->status != 200)
    return {PublishStatus::TransportError, 0, "http status " + std::to_string(res->status),
            false};
  if (res->body == "0") return {PublishStatus::RateLimited, 0, "", false};
  if (!all_digits(res->body))
    return {PublishStatus::TransportError, 0, "unparsable update response", false};
  return {PublishStatus::Published, std::stoull(res->body), "", false};
}

struct HttpReader::Impl {
  httplib::Client cli;
  std::uint64_t channel_id;
  std::string read_key;
  Impl(const std::string& endpoint, std::uint64_t id, std::string key)
      : cli(endpoint), channel_id(id), read_key(std::move(key)) {
    cli.set_connection_timeout(2, 0);
    cli.set_read_timeout(2, 0);
  }
  std::string base() const { return "/channels/" + std::to_string(channel_id); }
};

HttpReader::HttpReader(std::string endpoint, std::uint64_t channel_id, std::string read_key)
    : impl_(std::make_unique<Impl>(endpoint, channel_id, std::move(read_key))) {}

HttpReader::~HttpReader() = default;

FetchResult HttpReader::fetch_last() {
  auto res = impl_->cli.Get(impl_->base() + "/feeds/last.json?api_key=" +
                            wire::url_encode(impl_->read_key));
  if (!res) return {FetchStatus::TransportError, {}, httplib::to_string(res.error())};
  if (res->status == 200) {
    auto entry = wire::entry_from_json(res->body);
    if (!entry) return {FetchStatus::TransportError, {}, "unparsable entry"};
    return {FetchStatus::Ok, *entry, ""};
  }
  if (res->status == 404) {
    json j = json::parse(res->body, nullptr, false);
    if (j.is_object() && j.value("error", "") == "empty") return {FetchStatus::Empty, {}, ""};
    return {FetchStatus::NotFound, {}, "no such channel"};
  }
  if (res->status == 401) return {FetchStatus::AuthError, {}, "bad read key"};
  return {FetchStatus::TransportError, {}, "http status " + std::to_string(res->status)};
}

RefineFetch HttpReader::fetch_refine(std::size_t window) {
  RefineFetch out;
  auto res = impl_->cli.Get(impl_->base() + "/refine.json?api_key=" +
                            wire::url_encode(impl_->read_key) +
                            "&window=" + std::to_string(window));
  if (!res) {
    out.status = FetchStatus::TransportError;
    return out;
  }
  if (res->status == 404) {
    out.status = FetchStatus::NotFound;
    return out;
  }
  if (res->status == 401) {
    out.status = FetchStatus::AuthError;
    return out;
  }
  json j = json::parse(res->body, nullptr, false);
  if (res->status != 200 || !j.is_object() || !j.contains("fields")) {
    out.status = FetchStatus::TransportError;
    return out;
  }
  out.status = FetchStatus::Ok;
  out.skipped = j.value("skipped", std::uint64_t{0});
  for (auto& [k, v] : j["fields"].items())
    if (v.is_number()) out.means[std::stoi(k)] = v.get<double>();
  return out;
}

FeedFetch HttpReader::fetch_feed(std::size_t results) {
  FeedFetch out;
  auto res = impl_->cli.Get(impl_->base() + "/feeds.json?api_key=" +
                            wire::url_encode(impl_->read_key) +
                            "&results=" + std::to_string(results));
  if (!res) return out;
  if (res->status == 404) {
    out.status = FetchStatus::NotFound;
    return out;
  }
  if (res->status == 401) {
    out.status = FetchStatus::AuthError;
    return out;
  }
  json j = json::parse(res->body, nullptr, false);
  if (res->status != 200 || !j.is_object() || !j.contains("feeds") || !j["feeds"].is_array())
    return out;
  out.status = FetchStatus::Ok;
  for (const auto& item : j["feeds"]) {
    auto entry = wire::entry_from_json(item.dump());
    if (entry) out.entries.push_back(*entry);
  }
  return out;
}

}  // namespace fencewire::ciot
