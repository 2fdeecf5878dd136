#pragma once

#include <span>
#include <string>
#include <vector>

#include "plrank/rng.hpp"

namespace plrank {

// Hard cap on banner size for the exact conditional computation. The subset
// tables grow as 2^n, so larger banners are rejected outright instead of
// approximated.
inline constexpr int kMaxBannerSize = 16;

// Largest banner size the factorial enumeration oracle accepts.
inline constexpr int kMaxBruteForceSize = 8;

// Smallest allowed ratio of a displayed score to the candidate total. Every
// sequential-draw factor is then >= 1e-18, so a product of up to 16 factors
// stays far above double underflow and all probability arithmetic can run in
// plain linear space.
inline constexpr double kMinRelativeScore = 1e-18;

struct ScoredProduct {
  std::string id;
  double score = 0.0;
};

// A candidate pool: products eligible for one banner together with the scores
// the logging policy sampled from. total_score is the mass of the whole pool,
// which may exceed the listed sum when only the displayed products are kept
// (the total is the one statistic of the non-displayed candidates the
// conditional distribution needs).
struct ScoredCandidateSet {
  std::vector<ScoredProduct> products;
  double total_score = 0.0;

  double listed_score_sum() const;
  // Throws std::invalid_argument on a broken invariant: empty pool, duplicate
  // ids, non-positive or out-of-range scores, total below the listed sum.
  void validate() const;
};

// Exact conditional probabilities that each displayed product lands at `rank`
// when the ordering is redrawn conditioned on the displayed set. probs is
// indexed by displayed-product position; rank is 1-based.
struct RankDistribution {
  int rank = 0;
  std::vector<double> probs;

  void validate() const;
};

// Sequential sampling without replacement, probability proportional to score.
// Returns banner_size indices into candidates.products in draw order. The set
// must list the full pool (total_score equal to the listed sum): phantom mass
// cannot be drawn.
std::vector<int> sample_banner(const ScoredCandidateSet& candidates,
                               int banner_size, Rng& rng);

// Log probability that sequential sampling produces exactly `banner` (indices
// into candidates.products, in display order) as its first draws.
double banner_log_prob(const ScoredCandidateSet& candidates,
                       std::span<const int> banner);
double banner_log_prob(const ScoredCandidateSet& candidates,
                       std::span<const std::string> banner_ids);

// P(product at `rank` | displayed set) for the ordering distribution induced
// by conditioning sequential sampling on the displayed set. displayed_scores
// are the displayed products' scores; total_score is the full pool mass.
// Subset dynamic program, O(n^2 * 2^n) time, O(n * 2^n) memory, n <= 16.
RankDistribution conditional_rank_probs(std::span<const double> displayed_scores,
                                        double total_score, int rank);
RankDistribution conditional_rank_probs(const ScoredCandidateSet& candidates,
                                        std::span<const int> displayed,
                                        int rank);

// Same distribution by enumerating all n! orderings and normalizing. Oracle
// for the dynamic program; n <= 8.
RankDistribution brute_force_rank_probs(std::span<const double> displayed_scores,
                                        double total_score, int rank);
RankDistribution brute_force_rank_probs(const ScoredCandidateSet& candidates,
                                        std::span<const int> displayed,
                                        int rank);

// First-stage table of the dynamic program: entry m is the probability that
// the first popcount(m) draws are exactly the subset m of the displayed
// products. Exposed for the normalization self-checks.
std::vector<double> prefix_set_probs(std::span<const double> displayed_scores,
                                     double total_score);

// Categorical draw from dist.probs; returns a displayed-product position.
int sample_rank_product(const RankDistribution& dist, Rng& rng);

}  // namespace plrank
