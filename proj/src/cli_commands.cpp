#include "plrank/cli_commands.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "plrank/stats.hpp"

namespace plrank {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// shortest decimal that parses back to the same double
std::string format_double(double v) { return json(v).dump(); }

json estimate_to_json(const MetricEstimate& est) {
  json j{{"value", nullptr},
         {"std_error", est.std_error},
         {"accepted", est.accepted},
         {"rejected_no_pair", est.rejected_no_pair},
         {"rejected_same_product", est.rejected_same_product},
         {"rejected_tied_score", est.rejected_tied_score},
         {"banners", est.banners},
         {"defined", est.value.has_value()}};
  if (est.value) j["value"] = *est.value;
  return j;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::vector<BannerRecord> filter_subset(const std::vector<BannerRecord>& records,
                                        const std::string& subset) {
  if (subset == "all") return records;
  bool want_shuffled = false;
  if (subset == "shuffled") {
    want_shuffled = true;
  } else if (subset != "non-shuffled") {
    throw std::invalid_argument("unknown subset '" + subset +
                                "' (expected shuffled, non-shuffled or all)");
  }
  std::vector<BannerRecord> out;
  for (const auto& r : records) {
    if (r.shuffled == want_shuffled) out.push_back(r);
  }
  return out;
}

int cmd_simulate(const SimulateOptions& opt, std::ostream& out,
                 std::ostream& err) {
  try {
    std::ifstream in(opt.config_path);
    if (!in) {
      throw std::runtime_error("cannot open config file '" + opt.config_path +
                               "'");
    }
    json config_json;
    try {
      in >> config_json;
    } catch (const json::exception& e) {
      throw std::runtime_error("unreadable config '" + opt.config_path +
                               "': " + e.what());
    }
    const SimConfig config = SimConfig::from_json(config_json);

    const SimOutput sim = simulate_logs(config);

    LogHeader header;
    header.seed = config.seed;
    header.generator = json{{"tool", "plrank simulate"},
                            {"config", config.to_json()}};
    write_logs(sim.records, opt.out_path, header);

    const std::string truth_path =
        opt.truth_path.empty() ? opt.out_path + ".truth.json" : opt.truth_path;
    write_ground_truth(sim, config, truth_path);

    const std::string models_dir =
        opt.models_dir.empty() ? opt.out_path + ".models" : opt.models_dir;
    fs::create_directories(models_dir);
    const auto zoo =
        generate_model_zoo(sim, config.logging_score, config.zoo, config.seed);
    for (const auto& model : zoo) {
      write_model(model, (fs::path(models_dir) / (model.name + ".model")).string());
    }

    std::int64_t clicked = 0, shuffled = 0;
    for (const auto& r : sim.records) {
      clicked += r.clicked_rank.has_value();
      shuffled += r.shuffled;
    }
    out << json{{"log", opt.out_path},
                {"truth", truth_path},
                {"models_dir", models_dir},
                {"records", static_cast<std::int64_t>(sim.records.size())},
                {"clicked", clicked},
                {"shuffled", shuffled},
                {"models", static_cast<std::int64_t>(zoo.size())}}
               .dump()
        << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "simulate: " << e.what() << '\n';
    return 1;
  }
}

EvaluateResult evaluate_log(const EvaluateOptions& opt) {
  const auto kind = parse_metric_kind(opt.metric);
  if (!kind) {
    throw std::invalid_argument("unknown metric '" + opt.metric +
                                "' (expected pd, cd or cd-exact)");
  }
  ReadLogsResult log = read_logs(opt.log_path);
  const ScoringModel model = read_model(opt.model_path);
  const auto records = filter_subset(log.records, opt.subset);

  EvaluateResult result;
  result.model_name = model.name;
  result.kind = *kind;
  result.ingest = log.report;
  result.estimate =
      estimate_metric(records, model, *kind, opt.resamples, opt.seed);
  return result;
}

int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out,
                 std::ostream& err) {
  try {
    const EvaluateResult result = evaluate_log(opt);
    json j{{"log", opt.log_path},
           {"model", result.model_name},
           {"metric", metric_kind_name(result.kind)},
           {"subset", opt.subset},
           {"seed", opt.seed},
           {"resamples", opt.resamples},
           {"estimate", estimate_to_json(result.estimate)},
           {"ingest", result.ingest.to_json()}};
    out << j.dump() << '\n';
    if (!result.estimate.value) {
      err << "evaluate: metric undefined, no accepted samples ("
          << result.ingest.summary() << ")\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    err << "evaluate: " << e.what() << '\n';
    return 1;
  }
}

std::vector<SweepRow> sweep_log(const SweepOptions& opt, std::ostream& err) {
  ReadLogsResult log = read_logs(opt.log_path);
  if (log.report.rejected_total() > 0) {
    err << "sweep: ingest " << log.report.summary() << '\n';
  }

  std::vector<fs::path> model_paths;
  for (const auto& entry : fs::directory_iterator(opt.models_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".model") {
      model_paths.push_back(entry.path());
    }
  }
  std::sort(model_paths.begin(), model_paths.end());
  if (model_paths.empty()) {
    throw std::runtime_error("no .model files in '" + opt.models_dir + "'");
  }

  // subset filtering is done once; estimates are per-banner deterministic, so
  // rows match standalone evaluate runs with the same seed
  std::map<std::string, std::vector<BannerRecord>> subsets;
  for (const auto& subset : opt.subsets) {
    subsets.emplace(subset, filter_subset(log.records, subset));
  }

  std::vector<SweepRow> rows;
  for (const auto& path : model_paths) {
    ScoringModel model;
    try {
      model = read_model(path.string());
    } catch (const std::exception& e) {
      err << "sweep: skipping '" << path.string() << "': " << e.what() << '\n';
      continue;
    }
    for (const auto& metric : opt.metrics) {
      const auto kind = parse_metric_kind(metric);
      if (!kind) {
        throw std::invalid_argument("unknown metric '" + metric + "'");
      }
      for (const auto& subset : opt.subsets) {
        try {
          SweepRow row;
          row.model = model.name;
          row.metric = metric;
          row.subset = subset;
          row.estimate = estimate_metric(subsets.at(subset), model, *kind,
                                         opt.resamples, opt.seed);
          rows.push_back(std::move(row));
        } catch (const std::exception& e) {
          err << "sweep: model '" << model.name << "' failed on " << metric
              << "/" << subset << ": " << e.what() << '\n';
        }
      }
    }
  }
  return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << "model,metric,subset,value,std_error,accepted,rejected_no_pair,"
         "rejected_same_product,rejected_tied_score,banners\n";
  for (const auto& row : rows) {
    const auto& est = row.estimate;
    out << row.model << ',' << row.metric << ',' << row.subset << ','
        << (est.value ? format_double(*est.value) : std::string()) << ','
        << format_double(est.std_error) << ',' << est.accepted << ','
        << est.rejected_no_pair << ',' << est.rejected_same_product << ','
        << est.rejected_tied_score << ',' << est.banners << '\n';
  }
  out.flush();
  if (!out) {
    throw std::runtime_error("I/O failure writing '" + path + "'");
  }
}

int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const auto rows = sweep_log(opt, err);
    if (rows.empty()) {
      err << "sweep: no rows produced\n";
      return 1;
    }
    write_sweep_csv(rows, opt.out_csv);
    out << json{{"csv", opt.out_csv},
                {"rows", static_cast<std::int64_t>(rows.size())}}
               .dump()
        << '\n';
    return 0;
  } catch (const std::exception& e) {
    err << "sweep: " << e.what() << '\n';
    return 1;
  }
}

CompareResult compare_columns(const CompareOptions& opt) {
  const auto parse_spec = [](const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == spec.size()) {
      throw std::invalid_argument("column spec '" + spec +
                                  "' must look like metric:subset");
    }
    return std::pair<std::string, std::string>{spec.substr(0, colon),
                                               spec.substr(colon + 1)};
  };
  const auto [x_metric, x_subset] = parse_spec(opt.x_spec);
  const auto [y_metric, y_subset] = parse_spec(opt.y_spec);

  std::ifstream in(opt.csv_path);
  if (!in) {
    throw std::runtime_error("cannot open CSV '" + opt.csv_path + "'");
  }
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error("CSV '" + opt.csv_path + "' is empty");
  }
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* required : {"model", "metric", "subset", "value"}) {
    if (!col.count(required)) {
      throw std::runtime_error("CSV is missing column '" +
                               std::string(required) + "'");
    }
  }

  std::map<std::string, double> x_values, y_values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < header.size()) continue;
    const std::string& model = fields[col["model"]];
    const std::string& metric = fields[col["metric"]];
    const std::string& subset = fields[col["subset"]];
    const std::string& value = fields[col["value"]];
    if (value.empty()) continue;  // undefined estimate
    const double v = std::stod(value);
    if (metric == x_metric && subset == x_subset) x_values[model] = v;
    if (metric == y_metric && subset == y_subset) y_values[model] = v;
  }

  CompareResult result;
  std::vector<double> xs, ys;
  for (const auto& [model, x] : x_values) {
    const auto it = y_values.find(model);
    if (it == y_values.end()) continue;
    result.pairs.push_back({model, x, it->second});
    xs.push_back(x);
    ys.push_back(it->second);
  }
  if (result.pairs.size() < 3) {
    throw std::runtime_error("need at least 3 paired rows, got " +
                             std::to_string(result.pairs.size()));
  }
  result.pearson = pearson_correlation(xs, ys);
  result.spearman = spearman_correlation(xs, ys);
  return result;
}

int cmd_compare(const CompareOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const CompareResult result = compare_columns(opt);
    out << "model," << opt.x_spec << ',' << opt.y_spec << '\n';
    for (const auto& pair : result.pairs) {
      out << pair.model << ',' << format_double(pair.x) << ','
          << format_double(pair.y) << '\n';
    }
    out << "pearson_r,"
        << (result.pearson ? format_double(*result.pearson) : "undefined")
        << '\n';
    out << "spearman_rho,"
        << (result.spearman ? format_double(*result.spearman) : "undefined")
        << '\n';
    if (!result.pearson || !result.spearman) {
      err << "compare: correlation undefined (constant column)\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    err << "compare: " << e.what() << '\n';
    return 1;
  }
}

OracleReport run_oracle(const OracleOptions& opt) {
  if (opt.max_n < 1 || opt.max_n > kMaxBruteForceSize) {
    throw std::invalid_argument("oracle max-n must lie in 1..8");
  }
  if (opt.trials < 1) {
    throw std::invalid_argument("oracle trials must be >= 1");
  }

  const auto start = std::chrono::steady_clock::now();
  OracleReport report;
  report.trials = opt.trials;

  for (std::int64_t trial = 0; trial < opt.trials; ++trial) {
    Rng rng = Rng::derive(opt.seed, static_cast<std::uint64_t>(trial));
    const int n = 1 + rng.uniform_int(opt.max_n);

    std::vector<double> scores(static_cast<std::size_t>(n));
    if (trial % 5 == 4) {
      // adversarial spread: scores 1e6 apart inside one banner
      for (auto& s : scores) {
        s = (rng.uniform01() < 0.5 ? 1.0 : 1e6) * (0.5 + rng.uniform01());
      }
    } else {
      for (auto& s : scores) {
        s = std::exp(std::log(1e-3) + rng.uniform01() * std::log(1e6));
      }
    }
    double sum = 0.0;
    for (double s : scores) sum += s;
    const bool phantom = trial % 2 == 1;
    const double total = phantom ? sum * (1.0 + 2.0 * rng.uniform01()) : sum;
    const int rank = 1 + rng.uniform_int(n);

    const auto dp = conditional_rank_probs(scores, total, rank);
    const auto brute = brute_force_rank_probs(scores, total, rank);
    double prob_sum = 0.0;
    for (int p = 0; p < n; ++p) {
      report.worst_dp_vs_enumeration =
          std::max(report.worst_dp_vs_enumeration,
                   std::abs(dp.probs[static_cast<std::size_t>(p)] -
                            brute.probs[static_cast<std::size_t>(p)]));
      prob_sum += dp.probs[static_cast<std::size_t>(p)];
    }
    report.worst_rank_prob_sum =
        std::max(report.worst_rank_prob_sum, std::abs(prob_sum - 1.0));

    if (!phantom) {
      // with the whole pool displayed, the first-k masses of each size sum to 1
      const auto first_k = prefix_set_probs(scores, total);
      std::vector<double> by_size(static_cast<std::size_t>(n) + 1, 0.0);
      for (std::size_t mask = 0; mask < first_k.size(); ++mask) {
        by_size[static_cast<std::size_t>(std::popcount(mask))] += first_k[mask];
      }
      for (int k = 0; k <= n; ++k) {
        report.worst_prefix_set_sum =
            std::max(report.worst_prefix_set_sum,
                     std::abs(by_size[static_cast<std::size_t>(k)] - 1.0));
      }
    }

    if (!phantom && n <= 6) {
      // banner probabilities over all ordered k-tuples sum to 1
      ScoredCandidateSet pool;
      pool.total_score = total;
      for (int p = 0; p < n; ++p) {
        pool.products.push_back({"q" + std::to_string(p),
                                 scores[static_cast<std::size_t>(p)]});
      }
      const int k = 1 + rng.uniform_int(n);
      double mass = 0.0;
      std::vector<int> tuple(static_cast<std::size_t>(k), 0);
      std::vector<bool> used(static_cast<std::size_t>(n), false);
      // depth-first enumeration of ordered k-tuples without repetition
      std::function<void(int)> walk = [&](int depth) {
        if (depth == k) {
          mass += std::exp(banner_log_prob(pool, tuple));
          return;
        }
        for (int p = 0; p < n; ++p) {
          if (used[static_cast<std::size_t>(p)]) continue;
          used[static_cast<std::size_t>(p)] = true;
          tuple[static_cast<std::size_t>(depth)] = p;
          walk(depth + 1);
          used[static_cast<std::size_t>(p)] = false;
        }
      };
      walk(0);
      report.worst_banner_prob_sum =
          std::max(report.worst_banner_prob_sum, std::abs(mass - 1.0));
    }
  }

  report.elapsed_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  report.passed = report.worst_dp_vs_enumeration <= 1e-10 &&
                  report.worst_rank_prob_sum <= 1e-10 &&
                  report.worst_prefix_set_sum <= 1e-10 &&
                  report.worst_banner_prob_sum <= 1e-10;
  return report;
}

int cmd_oracle(const OracleOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const OracleReport report = run_oracle(opt);
    out << "trials " << report.trials << " (max n " << opt.max_n << ", seed "
        << opt.seed << ")\n";
    out << "dp vs enumeration      worst |diff| = "
        << format_double(report.worst_dp_vs_enumeration) << '\n';
    out << "rank prob sum          worst |sum-1| = "
        << format_double(report.worst_rank_prob_sum) << '\n';
    out << "prefix-set mass        worst |sum-1| = "
        << format_double(report.worst_prefix_set_sum) << '\n';
    out << "banner prob mass       worst |sum-1| = "
        << format_double(report.worst_banner_prob_sum) << '\n';
    out << "elapsed " << format_double(report.elapsed_seconds) << " s\n";
    out << (report.passed ? "PASS" : "FAIL")
        << " (every deviation must be <= 1e-10)\n";
    return report.passed ? 0 : 1;
  } catch (const std::exception& e) {
    err << "oracle: " << e.what() << '\n';
    return 1;
  }
}

int cmd_ctr_by_rank(const CtrOptions& opt, std::ostream& out, std::ostream& err) {
  try {
    const ReadLogsResult log = read_logs(opt.log_path);
    if (log.report.rejected_total() > 0) {
      err << "ctr-by-rank: ingest " << log.report.summary() << '\n';
    }
    const auto rows = ctr_by_rank(log.records);
    std::ostringstream csv;
    csv << "banner_size,rank,impressions,clicks,ctr\n";
    for (const auto& row : rows) {
      csv << row.banner_size << ',' << row.rank << ',' << row.impressions << ','
          << row.clicks << ',' << format_double(row.ctr) << '\n';
    }
    if (opt.out_csv.empty()) {
      out << csv.str();
    } else {
      std::ofstream file(opt.out_csv, std::ios::binary | std::ios::trunc);
      if (!file) {
        throw std::runtime_error("cannot open '" + opt.out_csv +
                                 "' for writing");
      }
      file << csv.str();
    }
    return 0;
  } catch (const std::exception& e) {
    err << "ctr-by-rank: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace plrank
