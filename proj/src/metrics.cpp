#include "plrank/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace plrank {

namespace {

// domain separation: evaluation streams must differ from the simulator's
// per-banner streams even when the same master seed is reused
constexpr std::uint64_t kEvalStreamDomain = 0x6576616C'75617465ull;

std::vector<double> displayed_scores(const BannerRecord& record) {
  std::vector<double> scores;
  scores.reserve(record.displayed.size());
  for (const auto& p : record.displayed) scores.push_back(p.logging_score);
  return scores;
}

void require_click(const BannerRecord& record, const char* op) {
  if (!record.clicked_rank) {
    throw std::invalid_argument(std::string(op) +
                                " requires a clicked banner (banner '" +
                                record.banner_id + "' has no click)");
  }
}

void require_matching_dist(const BannerRecord& record,
                           const RankDistribution& rank_dist) {
  if (rank_dist.probs.size() != record.displayed.size()) {
    throw std::invalid_argument(
        "rank distribution size does not match banner size");
  }
  if (rank_dist.rank != *record.clicked_rank) {
    throw std::invalid_argument(
        "rank distribution was computed for a different rank than the click");
  }
}

}  // namespace

std::string metric_kind_name(MetricKind kind) {
  switch (kind) {
    case MetricKind::kPairwiseDisagreement: return "pd";
    case MetricKind::kCounterfactualDisagreement: return "cd";
    case MetricKind::kCounterfactualDisagreementExact: return "cd-exact";
  }
  return "unknown";
}

std::optional<MetricKind> parse_metric_kind(std::string_view name) {
  if (name == "pd") return MetricKind::kPairwiseDisagreement;
  if (name == "cd") return MetricKind::kCounterfactualDisagreement;
  if (name == "cd-exact" || name == "cd_exact") {
    return MetricKind::kCounterfactualDisagreementExact;
  }
  return std::nullopt;
}

MetricSample pd_sample(const BannerRecord& record, const ScoringModel& model,
                       Rng& rng) {
  const int n = static_cast<int>(record.displayed.size());
  if (!record.clicked_rank || n < 2) {
    return {SampleStatus::kRejectedNoPair, 0};
  }
  const int clicked = *record.clicked_rank - 1;
  int negative = rng.uniform_int(n - 1);
  if (negative >= clicked) ++negative;

  const double clicked_score =
      model.score_of(record.displayed[static_cast<std::size_t>(clicked)].product_id);
  const double negative_score =
      model.score_of(record.displayed[static_cast<std::size_t>(negative)].product_id);
  if (clicked_score == negative_score) {
    return {SampleStatus::kRejectedTiedScore, 0};
  }
  return {SampleStatus::kAccepted, clicked_score < negative_score ? 1 : 0};
}

MetricSample cd_sample(const BannerRecord& record, const ScoringModel& model,
                       const RankDistribution& rank_dist, Rng& rng) {
  require_click(record, "cd_sample");
  require_matching_dist(record, rank_dist);
  const int clicked = *record.clicked_rank - 1;
  const int negative = sample_rank_product(rank_dist, rng);
  if (negative == clicked) {
    return {SampleStatus::kRejectedSameProduct, 0};
  }
  const double clicked_score =
      model.score_of(record.displayed[static_cast<std::size_t>(clicked)].product_id);
  const double negative_score =
      model.score_of(record.displayed[static_cast<std::size_t>(negative)].product_id);
  if (clicked_score == negative_score) {
    return {SampleStatus::kRejectedTiedScore, 0};
  }
  return {SampleStatus::kAccepted, clicked_score < negative_score ? 1 : 0};
}

ExactContribution cd_exact_contribution(const BannerRecord& record,
                                        const ScoringModel& model,
                                        const RankDistribution& rank_dist) {
  require_click(record, "cd_exact_contribution");
  require_matching_dist(record, rank_dist);
  const int clicked = *record.clicked_rank - 1;
  const double clicked_score =
      model.score_of(record.displayed[static_cast<std::size_t>(clicked)].product_id);

  ExactContribution out;
  for (std::size_t j = 0; j < record.displayed.size(); ++j) {
    const double s = model.score_of(record.displayed[j].product_id);
    if (s == clicked_score) continue;  // ties carry no mass; covers j == clicked
    out.acceptance_mass += rank_dist.probs[j];
    if (clicked_score < s) out.numerator += rank_dist.probs[j];
  }
  return out;
}

RankDistribution logging_rank_distribution(const BannerRecord& record) {
  require_click(record, "logging_rank_distribution");
  const int n = static_cast<int>(record.displayed.size());
  if (record.shuffled) {
    // the logged ordering of a shuffled banner is uniform, whatever the scores
    RankDistribution dist;
    dist.rank = *record.clicked_rank;
    dist.probs.assign(static_cast<std::size_t>(n), 1.0 / n);
    return dist;
  }
  return conditional_rank_probs(displayed_scores(record),
                                record.total_candidate_score,
                                *record.clicked_rank);
}

MetricEstimate estimate_metric(std::span<const BannerRecord> records,
                               const ScoringModel& model, MetricKind kind,
                               int resamples_per_banner, std::uint64_t seed) {
  if (resamples_per_banner < 1) {
    throw std::invalid_argument("resamples_per_banner must be >= 1");
  }
  const bool exact = kind == MetricKind::kCounterfactualDisagreementExact;

  MetricEstimate est;
  est.banners = static_cast<std::int64_t>(records.size());

  double value_sum = 0.0;
  double numerator_sum = 0.0;
  double mass_sum = 0.0;
  // per-banner aggregates: (value sum, accepted) or (numerator, mass)
  std::vector<std::pair<double, double>> by_banner;

  for (const auto& record : records) {
    // a clickless banner is one rejection, however many resamples were asked
    if (!record.clicked_rank || record.displayed.size() < 2) {
      ++est.rejected_no_pair;
      continue;
    }

    RankDistribution dist;
    if (kind != MetricKind::kPairwiseDisagreement) {
      dist = logging_rank_distribution(record);
    }

    if (exact) {
      const ExactContribution c = cd_exact_contribution(record, model, dist);
      numerator_sum += c.numerator;
      mass_sum += c.acceptance_mass;
      if (c.acceptance_mass > 0.0) {
        ++est.accepted;
        by_banner.emplace_back(c.numerator, c.acceptance_mass);
      } else {
        ++est.rejected_tied_score;
      }
      continue;
    }

    Rng rng = Rng::derive(seed, fnv1a64(record.banner_id) ^ kEvalStreamDomain);
    double banner_value = 0.0;
    int banner_accepted = 0;
    for (int m = 0; m < resamples_per_banner; ++m) {
      const MetricSample sample =
          kind == MetricKind::kPairwiseDisagreement
              ? pd_sample(record, model, rng)
              : cd_sample(record, model, dist, rng);
      switch (sample.status) {
        case SampleStatus::kAccepted:
          banner_value += sample.value;
          ++banner_accepted;
          ++est.accepted;
          break;
        case SampleStatus::kRejectedSameProduct:
          ++est.rejected_same_product;
          break;
        case SampleStatus::kRejectedTiedScore:
          ++est.rejected_tied_score;
          break;
        case SampleStatus::kRejectedNoPair:
          ++est.rejected_no_pair;
          break;
      }
    }
    value_sum += banner_value;
    if (banner_accepted > 0) {
      by_banner.emplace_back(banner_value, static_cast<double>(banner_accepted));
    }
  }

  if (exact) {
    if (mass_sum <= 0.0) return est;  // undefined
    const double ratio = numerator_sum / mass_sum;
    est.value = ratio;
    // delta-method standard error of the ratio from banner-level pairs
    const std::size_t b = by_banner.size();
    if (b >= 2) {
      double ss = 0.0;
      for (const auto& [num, mass] : by_banner) {
        const double d = num - ratio * mass;
        ss += d * d;
      }
      est.std_error =
          std::sqrt(ss * static_cast<double>(b) / static_cast<double>(b - 1)) /
          mass_sum;
    }
    return est;
  }

  if (est.accepted == 0) return est;  // undefined
  const double value = value_sum / static_cast<double>(est.accepted);
  est.value = value;
  if (resamples_per_banner == 1) {
    est.std_error =
        std::sqrt(value * (1.0 - value) / static_cast<double>(est.accepted));
  } else {
    // resamples within a banner are correlated; cluster by banner
    const std::size_t b = by_banner.size();
    if (b >= 2) {
      double mean = 0.0;
      for (const auto& [sum, acc] : by_banner) mean += sum / acc;
      mean /= static_cast<double>(b);
      double ss = 0.0;
      for (const auto& [sum, acc] : by_banner) {
        const double d = sum / acc - mean;
        ss += d * d;
      }
      est.std_error = std::sqrt(ss / (static_cast<double>(b) *
                                      static_cast<double>(b - 1)));
    } else {
      est.std_error =
          std::sqrt(value * (1.0 - value) / static_cast<double>(est.accepted));
    }
  }
  return est;
}

}  // namespace plrank
