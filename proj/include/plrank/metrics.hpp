#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "plrank/pl_core.hpp"
#include "plrank/records.hpp"
#include "plrank/rng.hpp"

namespace plrank {

enum class MetricKind {
  kPairwiseDisagreement,         // negative drawn uniformly from the banner
  kCounterfactualDisagreement,   // negative drawn from the logging policy's
                                 // conditional rank distribution
  kCounterfactualDisagreementExact,  // same expectation, draw marginalized out
};

std::string metric_kind_name(MetricKind kind);
std::optional<MetricKind> parse_metric_kind(std::string_view name);

enum class SampleStatus {
  kAccepted,
  kRejectedNoPair,       // no click, or nothing to compare against
  kRejectedSameProduct,  // the resample put the clicked product at its rank
  kRejectedTiedScore,    // model scores the pair equally
};

struct MetricSample {
  SampleStatus status = SampleStatus::kRejectedNoPair;
  int value = 0;  // 1 = disagreement, 0 = agreement; meaningful when accepted
};

// One pairwise-disagreement sample: the negative is uniform over the
// non-clicked products of the banner.
MetricSample pd_sample(const BannerRecord& record, const ScoringModel& model,
                       Rng& rng);

// One counterfactual-disagreement sample: the negative is the product the
// logging policy would place at the clicked rank in an independent redraw.
// rank_dist must be the distribution for this banner at r = clicked rank.
MetricSample cd_sample(const BannerRecord& record, const ScoringModel& model,
                       const RankDistribution& rank_dist, Rng& rng);

struct ExactContribution {
  double numerator = 0.0;        // rank-distribution mass on products the
                                 // model scores above the clicked one
  double acceptance_mass = 0.0;  // mass on products with a different score
};

// Marginalizes the counterfactual draw: summing numerators and acceptance
// masses over banners and taking the ratio gives the same conditional
// expectation cd_sample estimates, with no sampling noise.
ExactContribution cd_exact_contribution(const BannerRecord& record,
                                        const ScoringModel& model,
                                        const RankDistribution& rank_dist);

// The distribution the estimator redraws from for one clicked record: the
// exact conditional rank distribution of the logging policy, or uniform for
// banners whose logged ordering was uniformly shuffled.
RankDistribution logging_rank_distribution(const BannerRecord& record);

struct MetricEstimate {
  std::optional<double> value;  // disagreement in [0, 1]; empty when nothing
                                // was accepted (metric undefined)
  double std_error = 0.0;
  std::int64_t accepted = 0;
  std::int64_t rejected_no_pair = 0;
  std::int64_t rejected_same_product = 0;
  std::int64_t rejected_tied_score = 0;
  std::int64_t banners = 0;  // records seen
};

// Aggregates per-banner samples (or exact contributions) over a record
// stream. Per-banner draw streams are derived from the seed and the banner
// id, so results do not depend on record order or subset filtering, and a
// sweep row equals a standalone run with the same seed. resamples_per_banner
// > 1 reduces Monte-Carlo noise; the standard error then comes from
// banner-level clustering instead of the binomial formula.
MetricEstimate estimate_metric(std::span<const BannerRecord> records,
                               const ScoringModel& model, MetricKind kind,
                               int resamples_per_banner, std::uint64_t seed);

}  // namespace plrank
