#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "fencewire/engine.hpp"

namespace fencewire {

inline constexpr int kCsvSchemaVersion = 1;

struct ReportPaths {
  std::filesystem::path csv;
  std::filesystem::path summary;
  std::filesystem::path distance_svg;
  std::filesystem::path override_svg;
  std::filesystem::path speed_svg;
};

// Write run.csv, summary.json, and the three plot SVGs into out_dir
// (created if needed). Output depends only on the metrics, so emitting the
// same run twice produces byte-identical files.
ReportPaths emit_report(const RunMetrics& metrics, const std::filesystem::path& out_dir);

// The summary document as a string (exactly what summary.json holds).
std::string summary_to_string(const RunMetrics& metrics);

class ReplayError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rebuild metrics from a run.csv: rows are re-parsed, latency and safety
// statistics are recomputed from them, and broker-side counters are taken
// from the file's metadata line. Summaries produced from the result match
// the original summary.json byte for byte. Throws ReplayError on an
// unsupported schema version or a truncated/corrupt file, without producing
// a partial summary.
RunMetrics replay_csv(const std::filesystem::path& csv_file);

}  // namespace fencewire
