#include "fencewire/log.hpp"

#include <cstdio>
#include <cstdlib>
#include <mutex>
#include <string>

namespace fencewire::log {
namespace {

Level parse_level(const char* s) {
  if (!s) return Level::Warn;
  std::string v(s);
  if (v == "error") return Level::Error;
  if (v == "warn") return Level::Warn;
  if (v == "info") return Level::Info;
  if (v == "debug") return Level::Debug;
  return Level::Warn;
}

const char* tag(Level l) {
  switch (l) {
    case Level::Error: return "error";
    case Level::Warn: return "warn";
    case Level::Info: return "info";
    case Level::Debug: return "debug";
  }
  return "?";
}

std::mutex g_mu;

}  // namespace

Level threshold() {
  static Level lvl = parse_level(std::getenv("FENCEWIRE_LOG"));
  return lvl;
}

void write(Level level, const std::string& msg) {
  if (static_cast<int>(level) > static_cast<int>(threshold())) return;
  std::lock_guard<std::mutex> lk(g_mu);
  std::fprintf(stderr, "fencewire [%s] %s\n", tag(level), msg.c_str());
}

}  // namespace fencewire::log
