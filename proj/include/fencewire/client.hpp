#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>

#include "fencewire/ciot.hpp"
#include "fencewire/clock.hpp"

namespace fencewire::ciot {

enum class PublishStatus { Published, RateLimited, InFlight, AuthError, TransportError };
struct PublishResult {
  PublishStatus status = PublishStatus::TransportError;
  std::uint64_t entry_id = 0;  // valid when Published
  std::string detail;
  bool retryable = false;  // advisory only; nothing retries automatically
};

enum class FetchStatus { Ok, Empty, NotFound, AuthError, TransportError };
struct FetchResult {
  FetchStatus status = FetchStatus::TransportError;
  ChannelEntry entry;
  std::string detail;
};

struct RefineFetch {
  FetchStatus status = FetchStatus::TransportError;
  std::map<int, double> means;
  std::uint64_t skipped = 0;
};

struct FeedFetch {
  FetchStatus status = FetchStatus::TransportError;
  std::vector<ChannelEntry> entries;  // ascending
};

// Write and read halves of the channel transport. Sensor nodes hold a writer,
// the supervisor holds a reader; implementations decide whether the calls hit
// an in-process store or an HTTP endpoint.
class ChannelWriter {
 public:
  virtual ~ChannelWriter() = default;
  virtual PublishResult publish(const FieldMap& fields) = 0;
};

class ChannelReader {
 public:
  virtual ~ChannelReader() = default;
  virtual FetchResult fetch_last() = 0;
  virtual RefineFetch fetch_refine(std::size_t window) = 0;
};

// In-process transport that hits a ChannelStore directly, stamping writes
// with the injected clock. Used by unit tests and anywhere HTTP would add
// nothing.
class DirectWriter : public ChannelWriter {
 public:
  DirectWriter(ChannelStore& store, std::string write_key, const Clock& clock)
      : store_(store), write_key_(std::move(write_key)), clock_(clock) {}
  PublishResult publish(const FieldMap& fields) override;

 private:
  ChannelStore& store_;
  std::string write_key_;
  const Clock& clock_;
};

class DirectReader : public ChannelReader {
 public:
  DirectReader(ChannelStore& store, std::uint64_t channel_id, std::string read_key)
      : store_(store), channel_id_(channel_id), read_key_(std::move(read_key)) {}
  FetchResult fetch_last() override;
  RefineFetch fetch_refine(std::size_t window) override;

 private:
  ChannelStore& store_;
  std::uint64_t channel_id_;
  std::string read_key_;
};

// HTTP transport speaking the broker's wire protocol. A connection failure
// surfaces as TransportError with retryable=true; the caller owns any retry
// policy (the supervisor deliberately does not retry and fails safe instead).
class HttpWriter : public ChannelWriter {
 public:
  HttpWriter(std::string endpoint, std::string write_key);
  ~HttpWriter() override;
  PublishResult publish(const FieldMap& fields) override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class HttpReader : public ChannelReader {
 public:
  HttpReader(std::string endpoint, std::uint64_t channel_id, std::string read_key);
  ~HttpReader() override;
  FetchResult fetch_last() override;
  RefineFetch fetch_refine(std::size_t window) override;
  FeedFetch fetch_feed(std::size_t results);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace fencewire::ciot
