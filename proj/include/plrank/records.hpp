#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace plrank {

struct DisplayedProduct {
  std::string product_id;
  double logging_score = 0.0;
};

// One logged impression: the displayed ordering with the scores the logging
// policy used, the full candidate-pool mass, and the click feedback. At most
// one click per banner; multi-click lines are rejected at ingestion.
struct BannerRecord {
  std::string banner_id;
  std::vector<DisplayedProduct> displayed;
  double total_candidate_score = 0.0;
  std::optional<int> clicked_rank;  // 1-based
  bool shuffled = false;

  double displayed_score_sum() const {
    double sum = 0.0;
    for (const auto& p : displayed) sum += p.logging_score;
    return sum;
  }
};

// The scoring function under evaluation.
struct ScoringModel {
  std::string name;
  std::unordered_map<std::string, double> scores;

  double score_of(const std::string& product_id) const;
};

enum class RecordDefect {
  kNone,
  kEmptyBanner,
  kBannerTooLarge,
  kDuplicateProduct,
  kNonpositiveScore,
  kScoreOutOfRange,
  kTotalBelowSum,
  kClickedRankOutOfRange,
};

std::string_view defect_name(RecordDefect defect);

// Checks every record invariant the metrics rely on; kNone means valid.
RecordDefect validate_record(const BannerRecord& record);

}  // namespace plrank
