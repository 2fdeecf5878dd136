#include "plrank/pl_core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace plrank {

namespace {

void check_displayed_scores(std::span<const double> scores, double total_score,
                            int max_size) {
  if (scores.empty()) {
    throw std::invalid_argument("displayed set is empty");
  }
  if (static_cast<int>(scores.size()) > max_size) {
    throw std::invalid_argument("banner size " + std::to_string(scores.size()) +
                                " exceeds the supported maximum of " +
                                std::to_string(max_size));
  }
  double sum = 0.0;
  double min_score = scores[0];
  for (double s : scores) {
    if (!std::isfinite(s) || s <= 0.0) {
      throw std::invalid_argument("scores must be strictly positive");
    }
    sum += s;
    min_score = std::min(min_score, s);
  }
  if (!std::isfinite(total_score) || total_score < sum * (1.0 - 1e-9)) {
    throw std::invalid_argument(
        "total_score is below the sum of displayed scores");
  }
  if (min_score < kMinRelativeScore * total_score) {
    throw std::invalid_argument(
        "score range too wide: a displayed score is below 1e-18 of the "
        "candidate total");
  }
}

void check_rank(int rank, int n) {
  if (rank < 1 || rank > n) {
    throw std::invalid_argument("rank " + std::to_string(rank) +
                                " out of range 1.." + std::to_string(n));
  }
}

// Mass of the pool outside a score subset, i.e. the phantom mass plus the sum
// of the scores not in the subset. Computed once in extended precision and
// snapped to zero when the caller's total is just the listed sum re-rounded;
// subtracting subset sums from the total directly would cancel catastrophically
// when the remainder is tiny against the total.
double phantom_mass(std::span<const double> scores, double total_score) {
  long double sum = 0.0L;
  for (double s : scores) sum += s;
  const long double extra = static_cast<long double>(total_score) - sum;
  if (extra <= 1e-12L * total_score) return 0.0;
  return static_cast<double>(extra);
}

// total pool mass left after removing each subset of displayed products;
// entry m is extra + sum(scores outside m), built by complement addition
std::vector<double> remaining_mass(std::span<const double> scores,
                                   double total_score) {
  const std::size_t m = std::size_t{1} << scores.size();
  const double extra = phantom_mass(scores, total_score);
  std::vector<double> outside(m);
  outside[0] = extra;
  for (std::size_t mask = 1; mask < m; ++mask) {
    const int low = std::countr_zero(static_cast<std::uint32_t>(mask));
    outside[mask] = outside[mask & (mask - 1)] + scores[static_cast<std::size_t>(low)];
  }
  // denom[mask] = outside[complement of mask]
  std::vector<double> denom(m);
  const std::size_t full = m - 1;
  for (std::size_t mask = 0; mask < m; ++mask) {
    denom[mask] = outside[full ^ mask];
  }
  return denom;
}

// shared first-stage table; denom must come from remaining_mass
std::vector<double> prefix_set_table(std::span<const double> scores,
                                     std::span<const double> denom) {
  const int n = static_cast<int>(scores.size());
  const std::size_t m = std::size_t{1} << n;
  std::vector<double> first_k(m, 0.0);
  first_k[0] = 1.0;
  for (std::size_t mask = 1; mask < m; ++mask) {
    double acc = 0.0;
    for (int p = 0; p < n; ++p) {
      const std::size_t bit = std::size_t{1} << p;
      if (!(mask & bit)) continue;
      const std::size_t sub = mask ^ bit;
      acc += first_k[sub] * scores[static_cast<std::size_t>(p)] / denom[sub];
    }
    first_k[mask] = acc;
  }
  return first_k;
}

std::vector<int> resolve_displayed(const ScoredCandidateSet& candidates,
                                   std::span<const int> displayed) {
  std::unordered_set<int> seen;
  for (int idx : displayed) {
    if (idx < 0 || idx >= static_cast<int>(candidates.products.size())) {
      throw std::invalid_argument("displayed index out of range");
    }
    if (!seen.insert(idx).second) {
      throw std::invalid_argument("duplicate product in displayed set");
    }
  }
  return std::vector<int>(displayed.begin(), displayed.end());
}

std::vector<double> gather_scores(const ScoredCandidateSet& candidates,
                                  std::span<const int> displayed) {
  std::vector<double> scores;
  scores.reserve(displayed.size());
  for (int idx : displayed) scores.push_back(candidates.products[idx].score);
  return scores;
}

}  // namespace

double ScoredCandidateSet::listed_score_sum() const {
  double sum = 0.0;
  for (const auto& p : products) sum += p.score;
  return sum;
}

void ScoredCandidateSet::validate() const {
  if (products.empty()) {
    throw std::invalid_argument("candidate set is empty");
  }
  std::unordered_set<std::string_view> ids;
  double sum = 0.0;
  double min_score = products.front().score;
  for (const auto& p : products) {
    if (!std::isfinite(p.score) || p.score <= 0.0) {
      throw std::invalid_argument("candidate score must be strictly positive (product '" +
                                  p.id + "')");
    }
    if (!ids.insert(p.id).second) {
      throw std::invalid_argument("duplicate product id '" + p.id +
                                  "' in candidate set");
    }
    sum += p.score;
    min_score = std::min(min_score, p.score);
  }
  if (!std::isfinite(total_score) || total_score < sum * (1.0 - 1e-9)) {
    throw std::invalid_argument("total_score is below the sum of listed scores");
  }
  if (min_score < kMinRelativeScore * total_score) {
    throw std::invalid_argument(
        "score range too wide: a candidate score is below 1e-18 of the total");
  }
}

void RankDistribution::validate() const {
  const int n = static_cast<int>(probs.size());
  if (n == 0) throw std::invalid_argument("rank distribution is empty");
  check_rank(rank, n);
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0 || p > 1.0 + 1e-9) {
      throw std::invalid_argument("rank distribution entry outside [0, 1]");
    }
    sum += p;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw std::invalid_argument("rank distribution does not sum to 1");
  }
}

std::vector<int> sample_banner(const ScoredCandidateSet& candidates,
                               int banner_size, Rng& rng) {
  candidates.validate();
  if (banner_size <= 0) {
    throw std::invalid_argument("banner size must be positive");
  }
  if (banner_size > static_cast<int>(candidates.products.size())) {
    throw std::invalid_argument("banner size exceeds the number of candidates");
  }
  const double listed = candidates.listed_score_sum();
  if (std::abs(candidates.total_score - listed) > 1e-9 * candidates.total_score) {
    throw std::invalid_argument(
        "sampling needs the full candidate pool: total_score must equal the "
        "listed score sum");
  }

  std::vector<int> pool(candidates.products.size());
  std::iota(pool.begin(), pool.end(), 0);
  std::vector<int> drawn;
  drawn.reserve(static_cast<std::size_t>(banner_size));
  double remaining = listed;
  for (int k = 0; k < banner_size; ++k) {
    const double u = rng.uniform01() * remaining;
    std::size_t pick = pool.size() - 1;  // fallback absorbs rounding slack
    double acc = 0.0;
    for (std::size_t j = 0; j < pool.size(); ++j) {
      acc += candidates.products[static_cast<std::size_t>(pool[j])].score;
      if (u < acc) {
        pick = j;
        break;
      }
    }
    const int idx = pool[pick];
    drawn.push_back(idx);
    remaining -= candidates.products[static_cast<std::size_t>(idx)].score;
    pool[pick] = pool.back();
    pool.pop_back();
  }
  return drawn;
}

double banner_log_prob(const ScoredCandidateSet& candidates,
                       std::span<const int> banner) {
  candidates.validate();
  if (banner.empty()) {
    throw std::invalid_argument("banner is empty");
  }
  std::vector<bool> in_banner(candidates.products.size(), false);
  for (int idx : banner) {
    if (idx < 0 || idx >= static_cast<int>(candidates.products.size())) {
      throw std::invalid_argument("unknown product in banner");
    }
    if (in_banner[static_cast<std::size_t>(idx)]) {
      throw std::invalid_argument("duplicate product in banner");
    }
    in_banner[static_cast<std::size_t>(idx)] = true;
  }

  // mass never drawn: phantom candidates plus listed products off the banner
  std::vector<double> listed;
  listed.reserve(candidates.products.size());
  for (const auto& p : candidates.products) listed.push_back(p.score);
  double rest = phantom_mass(listed, candidates.total_score);
  for (std::size_t i = 0; i < listed.size(); ++i) {
    if (!in_banner[i]) rest += listed[i];
  }

  // remaining mass before each draw, accumulated from the banner tail
  double log_prob = 0.0;
  std::vector<double> remaining(banner.size());
  double tail = rest;
  for (std::size_t i = banner.size(); i-- > 0;) {
    tail += candidates.products[static_cast<std::size_t>(banner[i])].score;
    remaining[i] = tail;
  }
  for (std::size_t i = 0; i < banner.size(); ++i) {
    log_prob += std::log(candidates.products[static_cast<std::size_t>(banner[i])].score) -
                std::log(remaining[i]);
  }
  return log_prob;
}

double banner_log_prob(const ScoredCandidateSet& candidates,
                       std::span<const std::string> banner_ids) {
  std::unordered_map<std::string_view, int> index;
  index.reserve(candidates.products.size());
  for (int i = 0; i < static_cast<int>(candidates.products.size()); ++i) {
    index.emplace(candidates.products[static_cast<std::size_t>(i)].id, i);
  }
  std::vector<int> banner;
  banner.reserve(banner_ids.size());
  for (const auto& id : banner_ids) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw std::invalid_argument("unknown product id '" + id + "' in banner");
    }
    banner.push_back(it->second);
  }
  return banner_log_prob(candidates, banner);
}

std::vector<double> prefix_set_probs(std::span<const double> displayed_scores,
                                     double total_score) {
  check_displayed_scores(displayed_scores, total_score, kMaxBannerSize);
  const auto denom = remaining_mass(displayed_scores, total_score);
  return prefix_set_table(displayed_scores, denom);
}

// Two-stage subset dynamic program. Stage one builds, for every subset m of
// the displayed products, the probability that the first |m| draws are
// exactly m. Stage two carries the extra coordinate "the rank-th draw was
// product p": subsets of size `rank` are seeded from stage one (the rank-th
// draw is the product that completes the subset), larger subsets extend the
// draw sequence without touching p. The answer is the full-set joint row
// normalized by the full-set probability from stage one.
RankDistribution conditional_rank_probs(std::span<const double> displayed_scores,
                                        double total_score, int rank) {
  check_displayed_scores(displayed_scores, total_score, kMaxBannerSize);
  const int n = static_cast<int>(displayed_scores.size());
  check_rank(rank, n);

  const std::size_t m = std::size_t{1} << n;
  const std::size_t full = m - 1;
  const auto denom = remaining_mass(displayed_scores, total_score);
  const auto first_k = prefix_set_table(displayed_scores, denom);

  // joint[mask * n + p] = P(first |mask| draws are mask, rank-th draw is p)
  std::vector<double> joint(m * static_cast<std::size_t>(n), 0.0);
  for (std::size_t mask = 1; mask < m; ++mask) {
    const int size = std::popcount(mask);
    if (size < rank) continue;
    double* row = joint.data() + mask * static_cast<std::size_t>(n);
    if (size == rank) {
      for (int p = 0; p < n; ++p) {
        const std::size_t bit = std::size_t{1} << p;
        if (!(mask & bit)) continue;
        const std::size_t sub = mask ^ bit;
        row[p] = first_k[sub] * displayed_scores[static_cast<std::size_t>(p)] /
                 denom[sub];
      }
    } else {
      for (int p = 0; p < n; ++p) {
        const std::size_t bit = std::size_t{1} << p;
        if (!(mask & bit)) continue;
        const std::size_t sub = mask ^ bit;
        const double w =
            displayed_scores[static_cast<std::size_t>(p)] / denom[sub];
        const double* sub_row = joint.data() + sub * static_cast<std::size_t>(n);
        // sub_row[p] is zero (p is not in sub), so the whole row can be added
        for (int q = 0; q < n; ++q) row[q] += sub_row[q] * w;
      }
    }
  }

  RankDistribution dist;
  dist.rank = rank;
  dist.probs.resize(static_cast<std::size_t>(n));
  const double z = first_k[full];
  const double* full_row = joint.data() + full * static_cast<std::size_t>(n);
  for (int p = 0; p < n; ++p) {
    dist.probs[static_cast<std::size_t>(p)] = full_row[p] / z;
  }
  return dist;
}

RankDistribution conditional_rank_probs(const ScoredCandidateSet& candidates,
                                        std::span<const int> displayed,
                                        int rank) {
  candidates.validate();
  const auto idx = resolve_displayed(candidates, displayed);
  const auto scores = gather_scores(candidates, idx);
  return conditional_rank_probs(scores, candidates.total_score, rank);
}

RankDistribution brute_force_rank_probs(std::span<const double> displayed_scores,
                                        double total_score, int rank) {
  check_displayed_scores(displayed_scores, total_score, kMaxBruteForceSize);
  const int n = static_cast<int>(displayed_scores.size());
  check_rank(rank, n);

  const double extra = phantom_mass(displayed_scores, total_score);
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
  std::vector<double> remaining(static_cast<std::size_t>(n));
  double z = 0.0;
  do {
    // remaining mass before draw i, accumulated from the undrawn tail
    double tail = extra;
    for (int i = n - 1; i >= 0; --i) {
      tail += displayed_scores[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])];
      remaining[static_cast<std::size_t>(i)] = tail;
    }
    double w = 1.0;
    for (int i = 0; i < n; ++i) {
      w *= displayed_scores[static_cast<std::size_t>(perm[static_cast<std::size_t>(i)])] /
           remaining[static_cast<std::size_t>(i)];
    }
    z += w;
    acc[static_cast<std::size_t>(perm[static_cast<std::size_t>(rank - 1)])] += w;
  } while (std::next_permutation(perm.begin(), perm.end()));

  RankDistribution dist;
  dist.rank = rank;
  dist.probs.resize(static_cast<std::size_t>(n));
  for (int p = 0; p < n; ++p) {
    dist.probs[static_cast<std::size_t>(p)] = acc[static_cast<std::size_t>(p)] / z;
  }
  return dist;
}

RankDistribution brute_force_rank_probs(const ScoredCandidateSet& candidates,
                                        std::span<const int> displayed,
                                        int rank) {
  candidates.validate();
  const auto idx = resolve_displayed(candidates, displayed);
  const auto scores = gather_scores(candidates, idx);
  return brute_force_rank_probs(scores, candidates.total_score, rank);
}

int sample_rank_product(const RankDistribution& dist, Rng& rng) {
  dist.validate();
  const double u = rng.uniform01();
  double acc = 0.0;
  int last_positive = -1;
  for (int i = 0; i < static_cast<int>(dist.probs.size()); ++i) {
    const double p = dist.probs[static_cast<std::size_t>(i)];
    if (p > 0.0) last_positive = i;
    acc += p;
    if (u < acc) return i;
  }
  // u landed in the rounding slack past the last positive entry
  return last_positive;
}

}  // namespace plrank
