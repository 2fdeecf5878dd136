#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "plrank/records.hpp"

namespace plrank {

// Position-based click model: the probability of clicking the product at
// rank r is examination[r-1] * relevance[product]. One categorical draw per
// banner decides between "no click" and each rank, so at most one click falls
// out by construction.
struct ClickModel {
  std::vector<double> examination;                    // by rank, 0-indexed
  std::unordered_map<std::string, double> relevance;  // in [0, 1]
};

struct RelevanceSpec {
  double min = 0.05;
  double max = 0.95;
};

// Logging scores are drawn per banner on a log scale: position in [0, 1] is a
// weighted blend of fresh per-banner noise, the product's relevance, and a
// fixed per-product idiosyncrasy (the logging model's own systematic error).
// The idiosyncrasy term is what lets a fixed scoring model correlate with the
// logging policy without correlating with relevance.
// Defaults give a strongly peaked policy: the spacing of the top candidates'
// log-scores is what decides how often a redraw reproduces the displayed
// product, and that spacing scales as log(max/min) / pool size.
struct ScoreGenSpec {
  double min = 1e-5;
  double max = 7e5;
  double noise_weight = 0.20;
  double relevance_weight = 0.30;
  double idiosyncrasy_weight = 0.50;
};

struct ExaminationSpec {
  std::string kind = "geometric";  // flat | inverse_rank | geometric | explicit
  double scale = 0.45;
  double decay = 0.5;              // geometric only
  std::vector<double> values;      // explicit only

  std::vector<double> resolve(int max_banner_size) const;
};

// Model zoo: the oracle, a pure-noise model, a ladder of noise-perturbed
// relevance models, and policy-mimicking models that chase the logging
// policy's preferences instead of relevance.
struct ZooSpec {
  int count = 40;
  int bias_chasers = 8;
  std::vector<double> noise_levels;  // optional explicit ladder
};

struct SimConfig {
  std::uint64_t seed = 1;
  std::int64_t num_banners = 10000;
  int candidate_pool_size = 20;
  std::vector<std::pair<int, double>> banner_sizes = {{6, 1.0}};  // size, weight
  double shuffle_fraction = 0.0;
  RelevanceSpec relevance;
  ScoreGenSpec logging_score;
  ExaminationSpec examination;
  ZooSpec zoo;

  int max_banner_size() const;
  void validate() const;  // rejects impossible click budgets up front

  static SimConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct SimOutput {
  std::vector<BannerRecord> records;
  ClickModel ground_truth;
  std::unordered_map<std::string, double> policy_idiosyncrasy;
};

// Generates the full synthetic log. Deterministic: the catalog comes from a
// seed-derived stream and every banner from its own substream, so identical
// configs give bit-identical output.
SimOutput simulate_logs(const SimConfig& config);

// Builds the scoring-model zoo against a simulation's ground truth.
std::vector<ScoringModel> generate_model_zoo(const SimOutput& sim,
                                             const ScoreGenSpec& score_spec,
                                             const ZooSpec& zoo,
                                             std::uint64_t seed);

struct CtrRow {
  int banner_size = 0;
  int rank = 0;  // 1-based
  std::int64_t impressions = 0;
  std::int64_t clicks = 0;
  double ctr = 0.0;
};

// Exact click-through counts per rank, bucketed by banner size.
std::vector<CtrRow> ctr_by_rank(std::span<const BannerRecord> records);

// Ground-truth file: click model, policy idiosyncrasy, and the generating
// config, kept separate from the log so evaluation never reads it implicitly.
void write_ground_truth(const SimOutput& sim, const SimConfig& config,
                        const std::string& path);
nlohmann::json read_ground_truth(const std::string& path);

}  // namespace plrank
