#pragma once

#include <string>

namespace fencewire::log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Threshold comes from the FENCEWIRE_LOG environment variable
// (error|warn|info|debug), read once; default is warn.
Level threshold();

void write(Level level, const std::string& msg);

inline void error(const std::string& m) { write(Level::Error, m); }
inline void warn(const std::string& m) { write(Level::Warn, m); }
inline void info(const std::string& m) { write(Level::Info, m); }
inline void debug(const std::string& m) { write(Level::Debug, m); }

}  // namespace fencewire::log
