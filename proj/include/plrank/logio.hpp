#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "plrank/records.hpp"

namespace plrank {

inline constexpr int kLogFormatVersion = 1;
inline constexpr int kModelFormatVersion = 1;

// Log files are JSON Lines: one header object, then one record object per
// line, so readers can stream and any line parses on its own. Readers are
// sequential per file; writers take the file exclusively.
struct LogHeader {
  int version = kLogFormatVersion;
  std::uint64_t seed = 0;
  nlohmann::json generator = nlohmann::json::object();
};

// Per-reason ingestion accounting. Nothing is dropped silently: every
// rejected line lands in exactly one counter.
struct IngestReport {
  std::int64_t lines = 0;  // record lines seen (header excluded)
  std::int64_t accepted = 0;
  std::int64_t malformed = 0;
  std::int64_t multiple_clicks = 0;
  std::int64_t empty_banner = 0;
  std::int64_t banner_too_large = 0;
  std::int64_t duplicate_product = 0;
  std::int64_t nonpositive_score = 0;
  std::int64_t score_out_of_range = 0;
  std::int64_t total_below_sum = 0;
  std::int64_t clicked_rank_out_of_range = 0;

  std::int64_t rejected_total() const;
  nlohmann::json to_json() const;
  std::string summary() const;
};

struct ReadLogsResult {
  LogHeader header;
  std::vector<BannerRecord> records;  // valid records, file order
  IngestReport report;
};

// Writes header + records. Records are validated first; an invalid record or
// an I/O failure throws with the offending record position.
void write_logs(const std::vector<BannerRecord>& records, const std::string& path,
                const LogHeader& header);

// Streams a log file. An unreadable or mismatched header is fatal; bad record
// lines are counted per reason and skipped.
ReadLogsResult read_logs(const std::string& path);

// Scoring-model files: a JSON header line carrying the model name, then one
// "<product-id>\t<score>" line per product.
void write_model(const ScoringModel& model, const std::string& path);
ScoringModel read_model(const std::string& path);

}  // namespace plrank
