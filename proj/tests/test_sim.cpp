#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <vector>

#include <doctest.h>

#include "plrank/sim.hpp"
#include "plrank/stats.hpp"

using namespace plrank;

namespace {

SimConfig small_config() {
  SimConfig cfg;
  cfg.seed = 2025;
  cfg.num_banners = 5000;
  cfg.candidate_pool_size = 16;
  cfg.banner_sizes = {{4, 1.0}};
  return cfg;
}

}  // namespace

TEST_CASE("simulate_logs: identical configs give identical logs") {
  const auto cfg = small_config();
  const auto a = simulate_logs(cfg);
  const auto b = simulate_logs(cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE(a.records[i].banner_id == b.records[i].banner_id);
    REQUIRE(a.records[i].total_candidate_score ==
            b.records[i].total_candidate_score);
    REQUIRE(a.records[i].clicked_rank == b.records[i].clicked_rank);
    REQUIRE(a.records[i].shuffled == b.records[i].shuffled);
    REQUIRE(a.records[i].displayed.size() == b.records[i].displayed.size());
    for (std::size_t j = 0; j < a.records[i].displayed.size(); ++j) {
      REQUIRE(a.records[i].displayed[j].product_id ==
              b.records[i].displayed[j].product_id);
      REQUIRE(a.records[i].displayed[j].logging_score ==
              b.records[i].displayed[j].logging_score);
    }
  }
  for (const auto& [id, rel] : a.ground_truth.relevance) {
    REQUIRE(b.ground_truth.relevance.at(id) == rel);
  }
}

TEST_CASE("simulate_logs: zero examination means zero clicks") {
  auto cfg = small_config();
  cfg.examination.kind = "flat";
  cfg.examination.scale = 0.0;
  const auto sim = simulate_logs(cfg);
  for (const auto& r : sim.records) CHECK_FALSE(r.clicked_rank.has_value());
}

TEST_CASE("simulate_logs: click budget above one is rejected up front") {
  auto cfg = small_config();
  cfg.examination.kind = "flat";
  cfg.examination.scale = 0.9;  // 4 ranks * 0.9 * rel_max > 1
  CHECK_THROWS_AS((void)simulate_logs(cfg), std::invalid_argument);
}

TEST_CASE("simulate_logs: record invariants hold") {
  auto cfg = small_config();
  cfg.shuffle_fraction = 0.3;
  cfg.banner_sizes = {{3, 0.5}, {6, 0.5}};
  const auto sim = simulate_logs(cfg);
  std::set<int> sizes;
  for (const auto& r : sim.records) {
    REQUIRE(validate_record(r) == RecordDefect::kNone);
    sizes.insert(static_cast<int>(r.displayed.size()));
  }
  CHECK(sizes == std::set<int>{3, 6});
}

TEST_CASE("simulate_logs: shuffled count is exact") {
  for (const double f : {0.0, 0.05, 0.3, 1.0}) {
    auto cfg = small_config();
    cfg.num_banners = 4001;
    cfg.shuffle_fraction = f;
    const auto sim = simulate_logs(cfg);
    std::int64_t shuffled = 0;
    for (const auto& r : sim.records) shuffled += r.shuffled;
    CHECK(shuffled == std::llround(f * 4001));
  }
}

TEST_CASE("simulate_logs: shuffled banners use the uniform ordering") {
  auto cfg = small_config();
  cfg.num_banners = 30000;
  cfg.banner_sizes = {{3, 1.0}};
  cfg.shuffle_fraction = 1.0;
  cfg.logging_score.min = 0.5;   // strongly peaked scores would show through
  cfg.logging_score.max = 50.0;  // if the shuffle were broken
  const auto sim = simulate_logs(cfg);

  // pattern = permutation of the banner's products relative to sorted ids;
  // under a uniform shuffle all 6 patterns are equally likely whatever the set
  std::map<std::vector<int>, int> counts;
  for (const auto& r : sim.records) {
    std::vector<std::string> sorted;
    for (const auto& p : r.displayed) sorted.push_back(p.product_id);
    std::sort(sorted.begin(), sorted.end());
    std::vector<int> pattern;
    for (const auto& p : r.displayed) {
      pattern.push_back(static_cast<int>(
          std::find(sorted.begin(), sorted.end(), p.product_id) - sorted.begin()));
    }
    ++counts[pattern];
  }
  REQUIRE(counts.size() == 6);
  double chi2 = 0.0;
  const double expected = 30000.0 / 6.0;
  for (const auto& [pattern, count] : counts) {
    const double d = count - expected;
    chi2 += d * d / expected;
  }
  CHECK(chi2 < 20.515);  // chi-square(5 df) at alpha = 0.001
}

TEST_CASE("ctr_by_rank: trivial inputs") {
  CHECK(ctr_by_rank({}).empty());

  BannerRecord r;
  r.banner_id = "b";
  r.displayed = {{"a", 1.0}, {"b", 1.0}};
  r.total_candidate_score = 2.0;
  r.clicked_rank = 1;
  std::vector<BannerRecord> one{r};
  const auto rows = ctr_by_rank(one);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].banner_size == 2);
  CHECK(rows[0].rank == 1);
  CHECK(rows[0].impressions == 1);
  CHECK(rows[0].clicks == 1);
  CHECK(rows[0].ctr == 1.0);
  CHECK(rows[1].clicks == 0);
  CHECK(rows[1].ctr == 0.0);

  auto no_click = r;
  no_click.clicked_rank.reset();
  std::vector<BannerRecord> quiet{no_click};
  for (const auto& row : ctr_by_rank(quiet)) CHECK(row.ctr == 0.0);
}

TEST_CASE("ctr_by_rank: flat examination and uniform scores remove the rank effect") {
  auto cfg = small_config();
  cfg.num_banners = 40000;
  cfg.examination.kind = "flat";
  cfg.examination.scale = 0.2;
  cfg.logging_score.min = 1.0;
  cfg.logging_score.max = 1.0;
  const auto sim = simulate_logs(cfg);
  const auto rows = ctr_by_rank(sim.records);
  REQUIRE(rows.size() == 4);
  double pooled_clicks = 0.0, pooled_impressions = 0.0;
  for (const auto& row : rows) {
    pooled_clicks += static_cast<double>(row.clicks);
    pooled_impressions += static_cast<double>(row.impressions);
  }
  const double pooled = pooled_clicks / pooled_impressions;
  for (const auto& row : rows) {
    const double tol =
        3.0 * std::sqrt(pooled * (1.0 - pooled) /
                        static_cast<double>(row.impressions));
    CHECK(std::abs(row.ctr - pooled) <= tol);
  }
}

TEST_CASE("ctr_by_rank: steep examination yields a decreasing curve") {
  auto cfg = small_config();
  cfg.num_banners = 50000;
  cfg.banner_sizes = {{6, 1.0}};
  cfg.examination.kind = "inverse_rank";
  cfg.examination.scale = 0.35;
  cfg.logging_score.max = 20.0;
  const auto sim = simulate_logs(cfg);
  const auto rows = ctr_by_rank(sim.records);
  REQUIRE(rows.size() == 6);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    CHECK(rows[i].ctr < rows[i - 1].ctr);
  }
}

TEST_CASE("ctr_by_rank: two-rank ratio follows examination times relevance") {
  auto cfg = small_config();
  cfg.num_banners = 60000;
  cfg.banner_sizes = {{2, 1.0}};
  cfg.examination.kind = "explicit";
  cfg.examination.values = {0.5, 0.25};
  const auto sim = simulate_logs(cfg);

  const auto rows = ctr_by_rank(sim.records);
  REQUIRE(rows.size() == 2);

  double rel_sum[2] = {0.0, 0.0};
  for (const auto& r : sim.records) {
    for (int rank = 0; rank < 2; ++rank) {
      rel_sum[rank] += sim.ground_truth.relevance.at(
          r.displayed[static_cast<std::size_t>(rank)].product_id);
    }
  }
  const double n = static_cast<double>(sim.records.size());
  const double expected_ratio = 2.0 * (rel_sum[0] / n) / (rel_sum[1] / n);
  const double ratio = rows[0].ctr / rows[1].ctr;
  const double rel_se =
      std::sqrt(rows[0].ctr * (1.0 - rows[0].ctr) /
                    (static_cast<double>(rows[0].impressions) * rows[0].ctr * rows[0].ctr) +
                rows[1].ctr * (1.0 - rows[1].ctr) /
                    (static_cast<double>(rows[1].impressions) * rows[1].ctr * rows[1].ctr));
  CHECK(std::abs(ratio - expected_ratio) <= 3.0 * ratio * rel_se);
}

TEST_CASE("simulate_logs: higher relevance clicks more at a fixed rank") {
  auto cfg = small_config();
  cfg.num_banners = 60000;
  cfg.candidate_pool_size = 8;
  cfg.banner_sizes = {{3, 1.0}};
  cfg.shuffle_fraction = 1.0;  // uniform placement isolates relevance
  const auto sim = simulate_logs(cfg);

  std::string best_id, worst_id;
  double best_rel = -1.0, worst_rel = 2.0;
  for (const auto& [id, rel] : sim.ground_truth.relevance) {
    if (rel > best_rel) {
      best_rel = rel;
      best_id = id;
    }
    if (rel < worst_rel) {
      worst_rel = rel;
      worst_id = id;
    }
  }

  const int rank = 1;
  std::int64_t best_impr = 0, best_clicks = 0, worst_impr = 0, worst_clicks = 0;
  for (const auto& r : sim.records) {
    const auto& id = r.displayed[rank - 1].product_id;
    const bool clicked = r.clicked_rank && *r.clicked_rank == rank;
    if (id == best_id) {
      ++best_impr;
      best_clicks += clicked;
    } else if (id == worst_id) {
      ++worst_impr;
      worst_clicks += clicked;
    }
  }
  REQUIRE(best_impr > 1000);
  REQUIRE(worst_impr > 1000);
  const double best_ctr = static_cast<double>(best_clicks) / static_cast<double>(best_impr);
  const double worst_ctr = static_cast<double>(worst_clicks) / static_cast<double>(worst_impr);
  CHECK(best_ctr > worst_ctr);
}

TEST_CASE("generate_model_zoo: composition and determinism") {
  auto cfg = small_config();
  cfg.num_banners = 10;
  const auto sim = simulate_logs(cfg);
  ZooSpec spec;
  spec.count = 8;
  spec.bias_chasers = 2;
  const auto zoo = generate_model_zoo(sim, cfg.logging_score, spec, cfg.seed);
  REQUIRE(zoo.size() == 8);
  CHECK(zoo[0].name == "m00_oracle");
  CHECK(zoo[1].name == "m01_noise");
  int mimics = 0, ladder = 0;
  for (const auto& m : zoo) {
    mimics += m.name.find("policy_mimic") != std::string::npos;
    ladder += m.name.find("rel_noise") != std::string::npos;
  }
  CHECK(mimics == 2);
  CHECK(ladder == 4);

  const auto again = generate_model_zoo(sim, cfg.logging_score, spec, cfg.seed);
  for (std::size_t i = 0; i < zoo.size(); ++i) {
    REQUIRE(zoo[i].name == again[i].name);
    for (const auto& [id, s] : zoo[i].scores) {
      REQUIRE(again[i].scores.at(id) == s);
    }
  }

  ZooSpec tiny;
  tiny.count = 1;
  CHECK_THROWS_AS((void)generate_model_zoo(sim, cfg.logging_score, tiny, 1),
                  std::invalid_argument);
}

TEST_CASE("generate_model_zoo: oracle reproduces the relevance ordering") {
  auto cfg = small_config();
  cfg.num_banners = 10;
  const auto sim = simulate_logs(cfg);
  ZooSpec spec;
  spec.count = 2;
  spec.bias_chasers = 0;
  const auto zoo = generate_model_zoo(sim, cfg.logging_score, spec, cfg.seed);
  const auto& oracle = zoo[0];

  std::vector<std::string> ids;
  for (const auto& [id, rel] : sim.ground_truth.relevance) ids.push_back(id);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      const bool rel_less = sim.ground_truth.relevance.at(ids[i]) <
                            sim.ground_truth.relevance.at(ids[j]);
      const bool score_less = oracle.scores.at(ids[i]) < oracle.scores.at(ids[j]);
      REQUIRE(rel_less == score_less);
    }
  }
}

TEST_CASE("sim config: json round trip and validation") {
  auto cfg = small_config();
  cfg.banner_sizes = {{2, 0.25}, {6, 0.75}};
  cfg.examination.kind = "geometric";
  cfg.examination.scale = 0.3;
  cfg.examination.decay = 0.5;
  const auto parsed = SimConfig::from_json(cfg.to_json());
  CHECK(parsed.seed == cfg.seed);
  CHECK(parsed.num_banners == cfg.num_banners);
  CHECK(parsed.banner_sizes == cfg.banner_sizes);
  CHECK(parsed.examination.kind == "geometric");

  auto bad = cfg.to_json();
  bad["surprise"] = 1;
  CHECK_THROWS_AS((void)SimConfig::from_json(bad), std::invalid_argument);

  auto neg = cfg.to_json();
  neg["logging_score"]["min"] = -1.0;
  CHECK_THROWS_AS((void)SimConfig::from_json(neg), std::invalid_argument);

  auto wide = cfg.to_json();
  wide["banner_sizes"] = nlohmann::json::array({nlohmann::json::array({17, 1.0})});
  CHECK_THROWS_AS((void)SimConfig::from_json(wide), std::invalid_argument);
}
