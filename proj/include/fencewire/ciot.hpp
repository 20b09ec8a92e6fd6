#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace fencewire::ciot {

// Field slot -> decimal string, slots 1..8. Values travel as strings on the
// wire; absent slots are simply omitted.
using FieldMap = std::map<int, std::string>;

namespace wire {

inline constexpr int kMaxFieldSlots = 8;
// Slot 8 carries the precise sample time (decimal seconds since run start);
// distance slots therefore stop at 7.
inline constexpr int kTimeSlot = 8;
inline constexpr int kMaxSensorSlots = kTimeSlot - 1;
// Out-of-range sentinel used in distance slots.
inline constexpr const char* kOutOfRangeToken = "-1";

// "YYYY-MM-DDThh:mm:ssZ" — whole-second UTC, the only timestamp shape that
// crosses the wire.
std::string format_created_at(std::int64_t unix_seconds);
std::optional<std::int64_t> parse_created_at(const std::string& text);

// Decimal places needed to print multiples of `quantum` exactly (0.01 -> 2).
int decimals_for_quantum(double quantum);
std::string format_distance(double meters, double quantum);
std::string format_seconds(double s);  // fixed 4 decimals

std::string url_encode(std::string_view s);
std::string url_decode(std::string_view s);
// application/x-www-form-urlencoded body -> key/value pairs.
std::map<std::string, std::string> parse_form(std::string_view body);

}  // namespace wire

struct ChannelConfig {
  std::uint64_t channel_id = 0;
  std::string write_key;
  std::string read_key;
  double min_write_interval = 1.0;  // seconds between accepted writes
  std::map<int, std::string> field_names;

  // Hosted-service free tier spacing, offered as a preset.
  static constexpr double kFreeTierWriteInterval = 15.0;
};

struct ChannelEntry {
  std::uint64_t entry_id = 0;     // 1-based, strictly increasing, gapless
  std::int64_t created_at = 0;    // unix seconds (whole-second on the wire)
  FieldMap fields;

  bool operator==(const ChannelEntry&) const = default;
};

namespace wire {
// Exact JSON object for one entry: {"created_at":"...","entry_id":N,
// "field1":"...",...} with absent slots omitted.
std::string entry_to_json(const ChannelEntry& e);
std::optional<ChannelEntry> entry_from_json(const std::string& text);
}  // namespace wire

enum class WriteStatus { Accepted, RateLimited, AuthError, BadRequest };
struct WriteResult {
  WriteStatus status = WriteStatus::BadRequest;
  std::uint64_t entry_id = 0;  // valid when Accepted
};

enum class ReadStatus { Ok, Empty, NotFound, AuthError, BadRequest };
struct ReadLastResult {
  ReadStatus status = ReadStatus::NotFound;
  ChannelEntry entry;
};
struct ReadFeedResult {
  ReadStatus status = ReadStatus::NotFound;
  std::vector<ChannelEntry> entries;  // ascending entry_id
  const ChannelConfig* config = nullptr;
};
struct RefineResult {
  ReadStatus status = ReadStatus::NotFound;
  std::map<int, double> means;  // slot -> trailing mean of numeric values
  std::uint64_t skipped = 0;    // non-numeric values ignored
};

// The broker's storage core: per-channel append-only logs with per-channel
// write rate limiting. Writes to one channel are serialized through its lock;
// reads take shared locks and observe a prefix-consistent log. When a data
// directory is given, every accepted write is appended to
// <dir>/channel_<id>.jsonl and replayed on construction, which keeps the
// broker restartable without a database.
class ChannelStore {
 public:
  explicit ChannelStore(std::vector<ChannelConfig> channels,
                        std::optional<std::filesystem::path> data_dir = std::nullopt);
  ~ChannelStore();

  ChannelStore(const ChannelStore&) = delete;
  ChannelStore& operator=(const ChannelStore&) = delete;

  // The channel is addressed by its write key, as the hosted service does.
  // A write inside min_write_interval of the previous accepted one is
  // RateLimited and leaves no trace in the log or the limiter.
  WriteResult write(std::string_view write_api_key, const FieldMap& fields, double now);

  ReadLastResult read_last(std::uint64_t channel_id, std::string_view read_api_key) const;
  ReadFeedResult read_feed(std::uint64_t channel_id, std::string_view read_api_key,
                           std::size_t results) const;

  // Trailing moving average over the last `window` numeric values per slot.
  RefineResult refine(std::uint64_t channel_id, std::string_view read_api_key,
                      std::size_t window) const;

  // Full log snapshot, for metrics/plots (not part of the wire surface).
  std::vector<ChannelEntry> all_entries(std::uint64_t channel_id) const;

  const ChannelConfig* config_for(std::uint64_t channel_id) const;

 private:
  struct Channel;
  Channel* by_write_key(std::string_view key);
  const Channel* by_id(std::uint64_t id) const;
  void replay_from_disk(Channel& ch);
  void persist(Channel& ch, const ChannelEntry& e, double accepted_at);

  std::vector<std::unique_ptr<Channel>> channels_;
  std::optional<std::filesystem::path> data_dir_;
};

}  // namespace fencewire::ciot
