#include "plrank/records.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "plrank/pl_core.hpp"

namespace plrank {

double ScoringModel::score_of(const std::string& product_id) const {
  auto it = scores.find(product_id);
  if (it == scores.end()) {
    throw std::out_of_range("model '" + name + "' has no score for product '" +
                            product_id + "'");
  }
  return it->second;
}

std::string_view defect_name(RecordDefect defect) {
  switch (defect) {
    case RecordDefect::kNone: return "none";
    case RecordDefect::kEmptyBanner: return "empty_banner";
    case RecordDefect::kBannerTooLarge: return "banner_too_large";
    case RecordDefect::kDuplicateProduct: return "duplicate_product";
    case RecordDefect::kNonpositiveScore: return "nonpositive_score";
    case RecordDefect::kScoreOutOfRange: return "score_out_of_range";
    case RecordDefect::kTotalBelowSum: return "total_below_sum";
    case RecordDefect::kClickedRankOutOfRange: return "clicked_rank_out_of_range";
  }
  return "unknown";
}

RecordDefect validate_record(const BannerRecord& record) {
  const int n = static_cast<int>(record.displayed.size());
  if (n == 0) return RecordDefect::kEmptyBanner;
  if (n > kMaxBannerSize) return RecordDefect::kBannerTooLarge;

  std::unordered_set<std::string_view> ids;
  double sum = 0.0;
  double min_score = record.displayed.front().logging_score;
  for (const auto& p : record.displayed) {
    if (!ids.insert(p.product_id).second) return RecordDefect::kDuplicateProduct;
    if (!std::isfinite(p.logging_score) || p.logging_score <= 0.0) {
      return RecordDefect::kNonpositiveScore;
    }
    sum += p.logging_score;
    min_score = std::min(min_score, p.logging_score);
  }
  const double total = record.total_candidate_score;
  if (!std::isfinite(total) || total < sum * (1.0 - 1e-9)) {
    return RecordDefect::kTotalBelowSum;
  }
  if (min_score < kMinRelativeScore * total) {
    return RecordDefect::kScoreOutOfRange;
  }
  if (record.clicked_rank && (*record.clicked_rank < 1 || *record.clicked_rank > n)) {
    return RecordDefect::kClickedRankOutOfRange;
  }
  return RecordDefect::kNone;
}

}  // namespace plrank
