#include "plrank/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>

#include "plrank/pl_core.hpp"
#include "plrank/rng.hpp"
#include "plrank/stats.hpp"

namespace plrank {

namespace {

using nlohmann::json;

// substream tags under the master seed; the banner domain keeps generation
// streams apart from evaluation streams keyed by the same banner ids
constexpr std::uint64_t kCatalogStream = 0x634174;
constexpr std::uint64_t kZooStreamBase = 0x7A6F6F00;
constexpr std::uint64_t kBannerStreamDomain = 0x73696D'756C617465ull;

std::string padded_id(char prefix, std::int64_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%c%0*lld", prefix, width,
                static_cast<long long>(i));
  return std::string(buf);
}

struct Catalog {
  std::vector<std::string> ids;
  std::vector<double> relevance;     // raw, in [spec.min, spec.max]
  std::vector<double> relevance01;   // normalized to [0, 1]
  std::vector<double> idiosyncrasy;  // U[0, 1], fixed per product
};

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
  for (int k = static_cast<int>(v.size()) - 1; k > 0; --k) {
    const int j = rng.uniform_int(k + 1);
    std::swap(v[static_cast<std::size_t>(k)], v[static_cast<std::size_t>(j)]);
  }
}

// jittered stratified sample of [0, 1], randomly assigned to products; the
// marginal is near-exactly uniform in every realization, so small catalogs do
// not inherit lumpy score spacings from draw luck
std::vector<double> stratified_unit_values(int n, Rng& rng) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    v[static_cast<std::size_t>(i)] = (i + rng.uniform01()) / n;
  }
  shuffle_in_place(v, rng);
  return v;
}

Catalog make_catalog(const SimConfig& cfg) {
  Catalog cat;
  const int n = cfg.candidate_pool_size;
  Rng rng = Rng::derive(cfg.seed, kCatalogStream);
  cat.ids.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) cat.ids.push_back(padded_id('p', i, 4));

  cat.relevance01 = stratified_unit_values(n, rng);
  // the idiosyncrasy is the policy's systematic error, so its realized
  // correlation with relevance must match the nominal zero; retry the
  // assignment until the sample correlation is negligible
  cat.idiosyncrasy = stratified_unit_values(n, rng);
  for (int attempt = 0; attempt < 200; ++attempt) {
    const auto corr = pearson_correlation(cat.relevance01, cat.idiosyncrasy);
    if (!corr || std::abs(*corr) <= 0.03) break;
    cat.idiosyncrasy = stratified_unit_values(n, rng);
  }

  const double span = cfg.relevance.max - cfg.relevance.min;
  cat.relevance.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    cat.relevance[static_cast<std::size_t>(i)] =
        cfg.relevance.min + span * cat.relevance01[static_cast<std::size_t>(i)];
  }
  if (span <= 0.0) {
    std::fill(cat.relevance01.begin(), cat.relevance01.end(), 0.5);
  }
  return cat;
}

// exact shuffled-banner count: the flags telescope to llround(f * N)
bool shuffled_at(std::int64_t index, double fraction) {
  const double f = fraction;
  return std::llround(f * static_cast<double>(index + 1)) >
         std::llround(f * static_cast<double>(index));
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument("invalid config: " + message);
}

void check_known_keys(const json& j, const std::set<std::string>& allowed,
                      const std::string& where) {
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw std::invalid_argument("invalid config: unknown key '" + item.key() +
                                  "' in " + where);
    }
  }
}

}  // namespace

std::vector<double> ExaminationSpec::resolve(int max_banner_size) const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(max_banner_size));
  if (kind == "flat") {
    out.assign(static_cast<std::size_t>(max_banner_size), scale);
  } else if (kind == "inverse_rank") {
    for (int r = 1; r <= max_banner_size; ++r) out.push_back(scale / r);
  } else if (kind == "geometric") {
    double v = scale;
    for (int r = 1; r <= max_banner_size; ++r, v *= decay) out.push_back(v);
  } else if (kind == "explicit") {
    if (static_cast<int>(values.size()) < max_banner_size) {
      throw std::invalid_argument(
          "invalid config: explicit examination curve is shorter than the "
          "largest banner size");
    }
    out.assign(values.begin(), values.begin() + max_banner_size);
  } else {
    throw std::invalid_argument("invalid config: unknown examination kind '" +
                                kind + "'");
  }
  for (double v : out) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument(
          "invalid config: examination values must lie in [0, 1]");
    }
  }
  return out;
}

int SimConfig::max_banner_size() const {
  int m = 0;
  for (const auto& [size, weight] : banner_sizes) m = std::max(m, size);
  return m;
}

void SimConfig::validate() const {
  require(num_banners >= 0, "num_banners must be >= 0");
  require(candidate_pool_size >= 1, "candidate_pool_size must be >= 1");
  require(!banner_sizes.empty(), "banner_sizes must not be empty");
  for (const auto& [size, weight] : banner_sizes) {
    require(size >= 1 && size <= kMaxBannerSize,
            "banner sizes must lie in 1..16");
    require(size <= candidate_pool_size,
            "banner size exceeds the candidate pool");
    require(weight > 0.0, "banner size weights must be positive");
  }
  require(shuffle_fraction >= 0.0 && shuffle_fraction <= 1.0,
          "shuffle_fraction must lie in [0, 1]");
  require(relevance.min >= 0.0 && relevance.min <= relevance.max &&
              relevance.max <= 1.0,
          "relevance range must satisfy 0 <= min <= max <= 1");
  require(logging_score.min > 0.0 && logging_score.min <= logging_score.max,
          "logging score range must satisfy 0 < min <= max");
  const double wsum = logging_score.noise_weight +
                      logging_score.relevance_weight +
                      logging_score.idiosyncrasy_weight;
  require(logging_score.noise_weight >= 0.0 &&
              logging_score.relevance_weight >= 0.0 &&
              logging_score.idiosyncrasy_weight >= 0.0 &&
              std::abs(wsum - 1.0) <= 1e-6,
          "logging score weights must be non-negative and sum to 1");
  // keep every score above the relative floor the metrics ingest
  require(logging_score.min >=
              kMinRelativeScore * logging_score.max * candidate_pool_size,
          "logging score range risks underflow in the conditional computation");
  require(zoo.count >= 2, "zoo count must be >= 2");
  require(zoo.bias_chasers >= 0, "zoo bias_chasers must be >= 0");
  for (double level : zoo.noise_levels) {
    require(level >= 0.0 && level <= 1.0, "zoo noise levels must lie in [0, 1]");
  }

  // no realizable banner may have click probabilities summing past 1
  const auto exam = examination.resolve(max_banner_size());
  double q_max = 0.0;
  for (double e : exam) q_max += e * relevance.max;
  require(q_max <= 1.0,
          "examination curve and relevance range allow a click budget above 1");
}

SimOutput simulate_logs(const SimConfig& config) {
  config.validate();
  const Catalog cat = make_catalog(config);
  const auto exam = config.examination.resolve(config.max_banner_size());
  const int pool = config.candidate_pool_size;

  // normalized cumulative weights over banner sizes
  std::vector<double> size_cum;
  double wtotal = 0.0;
  for (const auto& [size, weight] : config.banner_sizes) wtotal += weight;
  double acc = 0.0;
  for (const auto& [size, weight] : config.banner_sizes) {
    acc += weight / wtotal;
    size_cum.push_back(acc);
  }

  const double log_lo = std::log(config.logging_score.min);
  const double log_hi = std::log(config.logging_score.max);
  const double wn = config.logging_score.noise_weight;
  const double wr = config.logging_score.relevance_weight;
  const double wi = config.logging_score.idiosyncrasy_weight;

  SimOutput out;
  out.records.reserve(static_cast<std::size_t>(config.num_banners));
  ScoredCandidateSet candidates;
  candidates.products.resize(static_cast<std::size_t>(pool));
  for (int p = 0; p < pool; ++p) {
    candidates.products[static_cast<std::size_t>(p)].id = cat.ids[static_cast<std::size_t>(p)];
  }

  for (std::int64_t i = 0; i < config.num_banners; ++i) {
    Rng rng = Rng::derive(config.seed,
                          fnv1a64(padded_id('b', i, 8)) ^ kBannerStreamDomain);

    const double us = rng.uniform01();
    int n = config.banner_sizes.back().first;
    for (std::size_t k = 0; k < size_cum.size(); ++k) {
      if (us < size_cum[k]) {
        n = config.banner_sizes[k].first;
        break;
      }
    }

    double total = 0.0;
    for (int p = 0; p < pool; ++p) {
      const double t = wn * rng.uniform01() +
                       wr * cat.relevance01[static_cast<std::size_t>(p)] +
                       wi * cat.idiosyncrasy[static_cast<std::size_t>(p)];
      const double score = std::exp(log_lo + t * (log_hi - log_lo));
      candidates.products[static_cast<std::size_t>(p)].score = score;
      total += score;
    }
    candidates.total_score = total;

    std::vector<int> displayed = sample_banner(candidates, n, rng);
    const bool shuffled = shuffled_at(i, config.shuffle_fraction);
    if (shuffled) shuffle_in_place(displayed, rng);

    BannerRecord record;
    record.banner_id = padded_id('b', i, 8);
    record.displayed.reserve(static_cast<std::size_t>(n));
    for (int idx : displayed) {
      record.displayed.push_back(
          {cat.ids[static_cast<std::size_t>(idx)],
           candidates.products[static_cast<std::size_t>(idx)].score});
    }
    record.total_candidate_score = total;
    record.shuffled = shuffled;

    // one categorical draw: no click, or exactly one rank
    const double u = rng.uniform01();
    double cum = 0.0;
    for (int r = 0; r < n; ++r) {
      cum += exam[static_cast<std::size_t>(r)] *
             cat.relevance[static_cast<std::size_t>(displayed[static_cast<std::size_t>(r)])];
      if (u < cum) {
        record.clicked_rank = r + 1;
        break;
      }
    }
    out.records.push_back(std::move(record));
  }

  for (int p = 0; p < pool; ++p) {
    out.ground_truth.relevance[cat.ids[static_cast<std::size_t>(p)]] =
        cat.relevance[static_cast<std::size_t>(p)];
    out.policy_idiosyncrasy[cat.ids[static_cast<std::size_t>(p)]] =
        cat.idiosyncrasy[static_cast<std::size_t>(p)];
  }
  out.ground_truth.examination = exam;
  return out;
}

std::vector<ScoringModel> generate_model_zoo(const SimOutput& sim,
                                             const ScoreGenSpec& score_spec,
                                             const ZooSpec& zoo,
                                             std::uint64_t seed) {
  if (zoo.count < 2) {
    throw std::invalid_argument("model zoo needs at least 2 models");
  }

  // stable product order for reproducible noise draws
  std::vector<std::string> ids;
  ids.reserve(sim.ground_truth.relevance.size());
  for (const auto& [id, rel] : sim.ground_truth.relevance) ids.push_back(id);
  std::sort(ids.begin(), ids.end());

  double rel_min = 1.0, rel_max = 0.0;
  for (const auto& id : ids) {
    const double r = sim.ground_truth.relevance.at(id);
    rel_min = std::min(rel_min, r);
    rel_max = std::max(rel_max, r);
  }
  const double rel_span = rel_max - rel_min;
  auto rel01 = [&](const std::string& id) {
    return rel_span > 0.0
               ? (sim.ground_truth.relevance.at(id) - rel_min) / rel_span
               : 0.5;
  };
  // the logging policy's stationary preference for a product
  const double wr = score_spec.relevance_weight;
  const double wi = score_spec.idiosyncrasy_weight;
  auto policy_prior = [&](const std::string& id) {
    if (wr + wi <= 0.0) return 0.5;
    return (wr * rel01(id) + wi * sim.policy_idiosyncrasy.at(id)) / (wr + wi);
  };

  // composition: oracle and pure noise always; then bias chasers; the rest is
  // the noise ladder (small zoos fill in that priority order)
  const int chasers = std::min(zoo.bias_chasers, zoo.count - 2);
  int ladder_len = zoo.count - 2 - chasers;
  std::vector<double> ladder = zoo.noise_levels;
  if (ladder.empty()) {
    for (int j = 1; j <= ladder_len; ++j) {
      ladder.push_back(static_cast<double>(j) / (ladder_len + 1));
    }
  } else {
    ladder_len = static_cast<int>(ladder.size());
  }

  std::vector<ScoringModel> models;
  int index = 0;
  char name[64];

  auto blend_model = [&](const char* label, double level, double base_weight,
                         auto&& base_of) {
    std::snprintf(name, sizeof(name), "m%02d_%s_%.3f", index, label, level);
    ScoringModel m;
    m.name = name;
    Rng rng = Rng::derive(seed, kZooStreamBase + static_cast<std::uint64_t>(index));
    for (const auto& id : ids) {
      m.scores[id] = base_weight * base_of(id) + level * rng.uniform01();
    }
    models.push_back(std::move(m));
    ++index;
  };

  {
    std::snprintf(name, sizeof(name), "m%02d_oracle", index);
    ScoringModel m;
    m.name = name;
    for (const auto& id : ids) m.scores[id] = rel01(id);
    models.push_back(std::move(m));
    ++index;
  }
  {
    std::snprintf(name, sizeof(name), "m%02d_noise", index);
    ScoringModel m;
    m.name = name;
    Rng rng = Rng::derive(seed, kZooStreamBase + static_cast<std::uint64_t>(index));
    for (const auto& id : ids) m.scores[id] = rng.uniform01();
    models.push_back(std::move(m));
    ++index;
  }
  for (int j = 0; j < chasers; ++j) {
    const double mu = chasers > 1 ? 0.4 * j / (chasers - 1) : 0.0;
    blend_model("policy_mimic", mu, 1.0 - mu, policy_prior);
  }
  for (double level : ladder) {
    blend_model("rel_noise", level, 1.0 - level, rel01);
  }
  return models;
}

std::vector<CtrRow> ctr_by_rank(std::span<const BannerRecord> records) {
  std::map<int, std::vector<std::pair<std::int64_t, std::int64_t>>> buckets;
  for (const auto& record : records) {
    const int n = static_cast<int>(record.displayed.size());
    auto& rows = buckets[n];
    if (static_cast<int>(rows.size()) < n) rows.resize(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) ++rows[static_cast<std::size_t>(r)].first;
    if (record.clicked_rank) {
      ++rows[static_cast<std::size_t>(*record.clicked_rank - 1)].second;
    }
  }
  std::vector<CtrRow> out;
  for (const auto& [size, rows] : buckets) {
    for (int r = 0; r < static_cast<int>(rows.size()); ++r) {
      const auto& [impressions, clicks] = rows[static_cast<std::size_t>(r)];
      out.push_back({size, r + 1, impressions, clicks,
                     impressions > 0
                         ? static_cast<double>(clicks) / static_cast<double>(impressions)
                         : 0.0});
    }
  }
  return out;
}

SimConfig SimConfig::from_json(const json& j) {
  SimConfig cfg;
  check_known_keys(j,
                   {"seed", "num_banners", "candidate_pool_size", "banner_sizes",
                    "shuffle_fraction", "relevance", "logging_score",
                    "examination", "zoo"},
                   "config");
  try {
    cfg.seed = j.value("seed", cfg.seed);
    cfg.num_banners = j.value("num_banners", cfg.num_banners);
    cfg.candidate_pool_size =
        j.value("candidate_pool_size", cfg.candidate_pool_size);
    if (j.contains("banner_sizes")) {
      cfg.banner_sizes.clear();
      for (const auto& entry : j["banner_sizes"]) {
        cfg.banner_sizes.emplace_back(entry.at(0).get<int>(),
                                      entry.at(1).get<double>());
      }
    }
    cfg.shuffle_fraction = j.value("shuffle_fraction", cfg.shuffle_fraction);
    if (j.contains("relevance")) {
      const auto& r = j["relevance"];
      check_known_keys(r, {"min", "max"}, "relevance");
      cfg.relevance.min = r.value("min", cfg.relevance.min);
      cfg.relevance.max = r.value("max", cfg.relevance.max);
    }
    if (j.contains("logging_score")) {
      const auto& s = j["logging_score"];
      check_known_keys(s,
                       {"min", "max", "noise_weight", "relevance_weight",
                        "idiosyncrasy_weight"},
                       "logging_score");
      cfg.logging_score.min = s.value("min", cfg.logging_score.min);
      cfg.logging_score.max = s.value("max", cfg.logging_score.max);
      cfg.logging_score.noise_weight =
          s.value("noise_weight", cfg.logging_score.noise_weight);
      cfg.logging_score.relevance_weight =
          s.value("relevance_weight", cfg.logging_score.relevance_weight);
      cfg.logging_score.idiosyncrasy_weight =
          s.value("idiosyncrasy_weight", cfg.logging_score.idiosyncrasy_weight);
    }
    if (j.contains("examination")) {
      const auto& e = j["examination"];
      check_known_keys(e, {"kind", "scale", "decay", "values"}, "examination");
      cfg.examination.kind = e.value("kind", cfg.examination.kind);
      cfg.examination.scale = e.value("scale", cfg.examination.scale);
      cfg.examination.decay = e.value("decay", cfg.examination.decay);
      if (e.contains("values")) {
        cfg.examination.values = e["values"].get<std::vector<double>>();
      }
    }
    if (j.contains("zoo")) {
      const auto& z = j["zoo"];
      check_known_keys(z, {"count", "bias_chasers", "noise_levels"}, "zoo");
      cfg.zoo.count = z.value("count", cfg.zoo.count);
      cfg.zoo.bias_chasers = z.value("bias_chasers", cfg.zoo.bias_chasers);
      if (z.contains("noise_levels")) {
        cfg.zoo.noise_levels = z["noise_levels"].get<std::vector<double>>();
      }
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

json SimConfig::to_json() const {
  json sizes = json::array();
  for (const auto& [size, weight] : banner_sizes) {
    sizes.push_back(json::array({size, weight}));
  }
  json exam{{"kind", examination.kind},
            {"scale", examination.scale},
            {"decay", examination.decay}};
  if (!examination.values.empty()) exam["values"] = examination.values;
  json zoo_j{{"count", zoo.count}, {"bias_chasers", zoo.bias_chasers}};
  if (!zoo.noise_levels.empty()) zoo_j["noise_levels"] = zoo.noise_levels;
  return json{{"seed", seed},
              {"num_banners", num_banners},
              {"candidate_pool_size", candidate_pool_size},
              {"banner_sizes", sizes},
              {"shuffle_fraction", shuffle_fraction},
              {"relevance", {{"min", relevance.min}, {"max", relevance.max}}},
              {"logging_score",
               {{"min", logging_score.min},
                {"max", logging_score.max},
                {"noise_weight", logging_score.noise_weight},
                {"relevance_weight", logging_score.relevance_weight},
                {"idiosyncrasy_weight", logging_score.idiosyncrasy_weight}}},
              {"examination", exam},
              {"zoo", zoo_j}};
}

void write_ground_truth(const SimOutput& sim, const SimConfig& config,
                        const std::string& path) {
  json truth{{"format", "plrank-truth"},
             {"version", 1},
             {"examination", sim.ground_truth.examination},
             {"relevance", sim.ground_truth.relevance},
             {"policy_idiosyncrasy", sim.policy_idiosyncrasy},
             {"config", config.to_json()}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << truth.dump(2) << '\n';
  out.flush();
  if (!out) {
    throw std::runtime_error("I/O failure writing '" + path + "'");
  }
}

json read_ground_truth(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open ground-truth file '" + path + "'");
  }
  json truth;
  try {
    in >> truth;
  } catch (const json::exception& e) {
    throw std::runtime_error("unreadable ground truth in '" + path + "': " +
                             e.what());
  }
  if (truth.value("format", "") != "plrank-truth") {
    throw std::runtime_error("'" + path + "' is not a plrank ground-truth file");
  }
  return truth;
}

}  // namespace plrank
