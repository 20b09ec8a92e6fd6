#include "fencewire/ciot.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <stdexcept>

#include "fencewire/log.hpp"

namespace fencewire::ciot {

using nlohmann::json;

namespace wire {

std::string format_created_at(std::int64_t unix_seconds) {
  std::time_t t = static_cast<std::time_t>(unix_seconds);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[80];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

std::optional<std::int64_t> parse_created_at(const std::string& text) {
  std::tm tm{};
  int y, mo, d, h, mi, s;
  if (std::sscanf(text.c_str(), "%d-%d-%dT%d:%d:%dZ", &y, &mo, &d, &h, &mi, &s) != 6)
    return std::nullopt;
  tm.tm_year = y - 1900;
  tm.tm_mon = mo - 1;
  tm.tm_mday = d;
  tm.tm_hour = h;
  tm.tm_min = mi;
  tm.tm_sec = s;
  return static_cast<std::int64_t>(timegm(&tm));
}

int decimals_for_quantum(double quantum) {
  for (int k = 0; k <= 9; ++k) {
    double scaled = quantum * std::pow(10.0, k);
    if (std::fabs(scaled - std::round(scaled)) < 1e-9 * std::max(1.0, scaled)) return k;
  }
  return 9;
}

std::string format_distance(double meters, double quantum) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", decimals_for_quantum(quantum), meters);
  return buf;
}

std::string format_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", s);
  return buf;
}

std::string url_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out.push_back(static_cast<char>(c));
    } else {
      out.push_back('%');
      out.push_back(hex[c >> 4]);
      out.push_back(hex[c & 0xF]);
    }
  }
  return out;
}

std::string url_decode(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '%' && i + 2 < s.size()) {
      auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
      };
      int hi = nibble(s[i + 1]), lo = nibble(s[i + 2]);
      if (hi >= 0 && lo >= 0) {
        out.push_back(static_cast<char>(hi * 16 + lo));
        i += 2;
        continue;
      }
    }
    out.push_back(s[i] == '+' ? ' ' : s[i]);
  }
  return out;
}

std::map<std::string, std::string> parse_form(std::string_view body) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos <= body.size()) {
    std::size_t amp = body.find('&', pos);
    std::string_view pair =
        body.substr(pos, amp == std::string_view::npos ? std::string_view::npos : amp - pos);
    if (!pair.empty()) {
      std::size_t eq = pair.find('=');
      if (eq == std::string_view::npos) {
        out[url_decode(pair)] = "";
      } else {
        out[url_decode(pair.substr(0, eq))] = url_decode(pair.substr(eq + 1));
      }
    }
    if (amp == std::string_view::npos) break;
    pos = amp + 1;
  }
  return out;
}

std::string entry_to_json(const ChannelEntry& e) {
  json j;
  j["created_at"] = format_created_at(e.created_at);
  j["entry_id"] = e.entry_id;
  for (const auto& [slot, value] : e.fields) j["field" + std::to_string(slot)] = value;
  return j.dump();
}

std::optional<ChannelEntry> entry_from_json(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  if (!j.contains("entry_id") || !j.contains("created_at")) return std::nullopt;
  ChannelEntry e;
  if (!j["entry_id"].is_number_unsigned() && !j["entry_id"].is_number_integer())
    return std::nullopt;
  e.entry_id = j["entry_id"].get<std::uint64_t>();
  auto ts = parse_created_at(j["created_at"].get<std::string>());
  if (!ts) return std::nullopt;
  e.created_at = *ts;
  for (int slot = 1; slot <= kMaxFieldSlots; ++slot) {
    std::string key = "field" + std::to_string(slot);
    if (j.contains(key) && j[key].is_string()) e.fields[slot] = j[key].get<std::string>();
  }
  return e;
}

}  // namespace wire

struct ChannelStore::Channel {
  ChannelConfig config;
  mutable std::shared_mutex mu;
  std::vector<ChannelEntry> entries;
  double last_accepted = -1e300;  // rate limiter state; moves only on acceptance
  std::ofstream sink;             // open when persistence is on
};

ChannelStore::ChannelStore(std::vector<ChannelConfig> channels,
                           std::optional<std::filesystem::path> data_dir)
    : data_dir_(std::move(data_dir)) {
  if (data_dir_) std::filesystem::create_directories(*data_dir_);
  for (auto& cfg : channels) {
    auto ch = std::make_unique<Channel>();
    ch->config = std::move(cfg);
    if (data_dir_) replay_from_disk(*ch);
    channels_.push_back(std::move(ch));
  }
}

ChannelStore::~ChannelStore() = default;

ChannelStore::Channel* ChannelStore::by_write_key(std::string_view key) {
  for (auto& ch : channels_)
    if (ch->config.write_key == key) return ch.get();
  return nullptr;
}

const ChannelStore::Channel* ChannelStore::by_id(std::uint64_t id) const {
  for (const auto& ch : channels_)
    if (ch->config.channel_id == id) return ch.get();
  return nullptr;
}

void ChannelStore::replay_from_disk(Channel& ch) {
  auto path = *data_dir_ / ("channel_" + std::to_string(ch.config.channel_id) + ".jsonl");
  std::ifstream in(path);
  std::string line;
  std::size_t replayed = 0;
  while (in && std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      log::warn("persistence: skipping malformed line in " + path.string());
      continue;
    }
    ChannelEntry e;
    e.entry_id = j.value("entry_id", std::uint64_t{0});
    e.created_at = j.value("created_at", std::int64_t{0});
    if (j.contains("fields") && j["fields"].is_object()) {
      for (auto& [k, v] : j["fields"].items())
        if (v.is_string()) e.fields[std::stoi(k)] = v.get<std::string>();
    }
    if (e.entry_id != ch.entries.size() + 1) {
      log::warn("persistence: entry id gap in " + path.string() + ", truncating replay");
      break;
    }
    ch.entries.push_back(std::move(e));
    ch.last_accepted = j.value("accepted_at", static_cast<double>(ch.entries.back().created_at));
    ++replayed;
  }
  in.close();
  if (replayed > 0)
    log::info("persistence: replayed " + std::to_string(replayed) + " entries for channel " +
              std::to_string(ch.config.channel_id));
  ch.sink.open(path, std::ios::app);
}

void ChannelStore::persist(Channel& ch, const ChannelEntry& e, double accepted_at) {
  if (!ch.sink.is_open()) return;
  json j;
  j["entry_id"] = e.entry_id;
  j["created_at"] = e.created_at;
  j["accepted_at"] = accepted_at;
  json fields = json::object();
  for (const auto& [slot, value] : e.fields) fields[std::to_string(slot)] = value;
  j["fields"] = std::move(fields);
  ch.sink << j.dump() << '\n';
  ch.sink.flush();
}

WriteResult ChannelStore::write(std::string_view write_api_key, const FieldMap& fields,
                                double now) {
  Channel* ch = by_write_key(write_api_key);
  if (!ch) return {WriteStatus::AuthError, 0};
  if (fields.empty()) return {WriteStatus::BadRequest, 0};
  for (const auto& [slot, value] : fields) {
    (void)value;
    if (slot < 1 || slot > wire::kMaxFieldSlots) return {WriteStatus::BadRequest, 0};
  }

  std::unique_lock lk(ch->mu);
  if (now - ch->last_accepted < ch->config.min_write_interval)
    return {WriteStatus::RateLimited, 0};

  ChannelEntry e;
  e.entry_id = ch->entries.size() + 1;
  e.created_at = static_cast<std::int64_t>(std::floor(now));
  // Guard the non-decreasing timestamp invariant against wall-clock steps.
  if (!ch->entries.empty()) e.created_at = std::max(e.created_at, ch->entries.back().created_at);
  e.fields = fields;
  ch->entries.push_back(e);
  ch->last_accepted = now;
  persist(*ch, e, now);
  return {WriteStatus::Accepted, e.entry_id};
}

ReadLastResult ChannelStore::read_last(std::uint64_t channel_id,
                                       std::string_view read_api_key) const {
  const Channel* ch = by_id(channel_id);
  if (!ch) return {ReadStatus::NotFound, {}};
  if (ch->config.read_key != read_api_key) return {ReadStatus::AuthError, {}};
  std::shared_lock lk(ch->mu);
  if (ch->entries.empty()) return {ReadStatus::Empty, {}};
  return {ReadStatus::Ok, ch->entries.back()};
}

ReadFeedResult ChannelStore::read_feed(std::uint64_t channel_id, std::string_view read_api_key,
                                       std::size_t results) const {
  const Channel* ch = by_id(channel_id);
  if (!ch) return {ReadStatus::NotFound, {}, nullptr};
  if (ch->config.read_key != read_api_key) return {ReadStatus::AuthError, {}, nullptr};
  std::shared_lock lk(ch->mu);
  ReadFeedResult out;
  out.status = ReadStatus::Ok;
  out.config = &ch->config;
  std::size_t n = std::min(results, ch->entries.size());
  out.entries.assign(ch->entries.end() - static_cast<std::ptrdiff_t>(n), ch->entries.end());
  return out;
}

RefineResult ChannelStore::refine(std::uint64_t channel_id, std::string_view read_api_key,
                                  std::size_t window) const {
  const Channel* ch = by_id(channel_id);
  if (!ch) return {ReadStatus::NotFound, {}, 0};
  if (ch->config.read_key != read_api_key) return {ReadStatus::AuthError, {}, 0};
  if (window == 0) return {ReadStatus::BadRequest, {}, 0};
  std::shared_lock lk(ch->mu);
  RefineResult out;
  out.status = ReadStatus::Ok;
  std::map<int, std::pair<double, std::size_t>> acc;  // slot -> (sum, count)
  // Walk the log newest-first, collecting up to `window` numeric values per
  // slot; anything unparsable is skipped and counted.
  for (auto it = ch->entries.rbegin(); it != ch->entries.rend(); ++it) {
    for (const auto& [slot, value] : it->fields) {
      auto& [sum, count] = acc[slot];
      if (count >= window) continue;
      char* end = nullptr;
      double v = std::strtod(value.c_str(), &end);
      if (end == value.c_str() || *end != '\0' || !std::isfinite(v)) {
        ++out.skipped;
        continue;
      }
      sum += v;
      ++count;
    }
  }
  for (const auto& [slot, sc] : acc)
    if (sc.second > 0) out.means[slot] = sc.first / static_cast<double>(sc.second);
  return out;
}

std::vector<ChannelEntry> ChannelStore::all_entries(std::uint64_t channel_id) const {
  const Channel* ch = by_id(channel_id);
  if (!ch) return {};
  std::shared_lock lk(ch->mu);
  return ch->entries;
}

const ChannelConfig* ChannelStore::config_for(std::uint64_t channel_id) const {
  const Channel* ch = by_id(channel_id);
  return ch ? &ch->config : nullptr;
}

}  // namespace fencewire::ciot
