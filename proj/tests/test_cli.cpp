#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <doctest.h>
#include <json.hpp>

#include "plrank/cli_commands.hpp"
#include "plrank/stats.hpp"

using namespace plrank;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("plrank_cli_" + std::to_string(::getpid()) + "_" +
            std::to_string(counter()++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  static int& counter() {
    static int c = 0;
    return c;
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::string write_config(const TempDir& tmp, const json& patch) {
  json cfg{{"seed", 31337},
           {"num_banners", 5000},
           {"candidate_pool_size", 14},
           {"banner_sizes", json::array({json::array({4, 1.0})})},
           {"shuffle_fraction", 0.3},
           {"zoo", {{"count", 6}, {"bias_chasers", 2}}}};
  for (const auto& item : patch.items()) cfg[item.key()] = item.value();
  const auto path = tmp.file("config.json");
  std::ofstream out(path);
  out << cfg.dump(2);
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("cmd_simulate: produces log, truth and zoo; reruns are identical") {
  TempDir tmp;
  SimulateOptions opt;
  opt.config_path = write_config(tmp, {});
  opt.out_path = tmp.file("run.jsonl");
  std::ostringstream out, err;
  REQUIRE(cmd_simulate(opt, out, err) == 0);

  const auto summary = json::parse(out.str());
  CHECK(summary["records"] == 5000);
  CHECK(summary["models"] == 6);
  CHECK(summary["shuffled"] == 1500);

  const auto log = read_logs(opt.out_path);
  CHECK(log.records.size() == 5000);
  CHECK(log.report.rejected_total() == 0);
  CHECK(log.header.generator["config"]["num_banners"] == 5000);

  const auto truth = read_ground_truth(opt.out_path + ".truth.json");
  CHECK(truth["relevance"].size() == 14);

  int model_files = 0;
  for (const auto& entry : fs::directory_iterator(opt.out_path + ".models")) {
    model_files += entry.path().extension() == ".model";
  }
  CHECK(model_files == 6);

  // byte-identical rerun
  const std::string first = slurp(opt.out_path);
  SimulateOptions again = opt;
  again.out_path = tmp.file("run2.jsonl");
  std::ostringstream out2, err2;
  REQUIRE(cmd_simulate(again, out2, err2) == 0);
  CHECK(slurp(again.out_path) == first);
}

TEST_CASE("cmd_simulate: zero banners still write a valid log") {
  TempDir tmp;
  SimulateOptions opt;
  opt.config_path = write_config(tmp, {{"num_banners", 0}});
  opt.out_path = tmp.file("empty.jsonl");
  std::ostringstream out, err;
  REQUIRE(cmd_simulate(opt, out, err) == 0);
  const auto log = read_logs(opt.out_path);
  CHECK(log.records.empty());
}

TEST_CASE("cmd_simulate: bad config is rejected") {
  TempDir tmp;
  SimulateOptions opt;
  opt.config_path = write_config(tmp, {{"shuffle_fraction", 1.5}});
  opt.out_path = tmp.file("never.jsonl");
  std::ostringstream out, err;
  CHECK(cmd_simulate(opt, out, err) == 1);
  CHECK(err.str().find("shuffle_fraction") != std::string::npos);
}

TEST_CASE("evaluate and sweep: deterministic, consistent, failure-tolerant") {
  TempDir tmp;
  SimulateOptions sim_opt;
  sim_opt.config_path = write_config(tmp, {});
  sim_opt.out_path = tmp.file("log.jsonl");
  std::ostringstream sim_out, sim_err;
  REQUIRE(cmd_simulate(sim_opt, sim_out, sim_err) == 0);
  const std::string models_dir = sim_opt.out_path + ".models";

  // pick the oracle model file
  std::string oracle_path;
  for (const auto& entry : fs::directory_iterator(models_dir)) {
    if (entry.path().filename().string().find("oracle") != std::string::npos) {
      oracle_path = entry.path().string();
    }
  }
  REQUIRE_FALSE(oracle_path.empty());

  EvaluateOptions eval_opt;
  eval_opt.log_path = sim_opt.out_path;
  eval_opt.model_path = oracle_path;
  eval_opt.metric = "cd";
  eval_opt.subset = "non-shuffled";
  eval_opt.seed = 11;

  std::ostringstream eval_out1, eval_out2, eval_err;
  REQUIRE(cmd_evaluate(eval_opt, eval_out1, eval_err) == 0);
  REQUIRE(cmd_evaluate(eval_opt, eval_out2, eval_err) == 0);
  CHECK(eval_out1.str() == eval_out2.str());
  const auto parsed = json::parse(eval_out1.str());
  CHECK(parsed["estimate"]["defined"] == true);
  CHECK(parsed["estimate"]["accepted"].get<std::int64_t>() > 0);

  // sweep: rows = models x metrics x subsets, minus injected failures
  SweepOptions sweep_opt;
  sweep_opt.log_path = sim_opt.out_path;
  sweep_opt.models_dir = models_dir;
  sweep_opt.out_csv = tmp.file("sweep.csv");
  sweep_opt.metrics = {"pd", "cd"};
  sweep_opt.subsets = {"shuffled", "non-shuffled"};
  sweep_opt.seed = 11;
  std::ostringstream sweep_out, sweep_err;
  REQUIRE(cmd_sweep(sweep_opt, sweep_out, sweep_err) == 0);
  CHECK(json::parse(sweep_out.str())["rows"] == 6 * 2 * 2);

  const std::string csv_once = slurp(sweep_opt.out_csv);
  std::ostringstream sweep_out2, sweep_err2;
  REQUIRE(cmd_sweep(sweep_opt, sweep_out2, sweep_err2) == 0);
  CHECK(slurp(sweep_opt.out_csv) == csv_once);

  // sweep rows must equal standalone evaluate runs with the same seed
  {
    std::istringstream csv(csv_once);
    std::string line;
    std::getline(csv, line);  // header
    bool seen = false;
    while (std::getline(csv, line)) {
      if (line.rfind("m00_oracle,cd,non-shuffled,", 0) == 0) {
        const auto value_field = line.substr(line.find("non-shuffled,") + 13);
        const double row_value = std::stod(value_field);
        CHECK(row_value ==
              doctest::Approx(parsed["estimate"]["value"].get<double>())
                  .epsilon(1e-12));
        seen = true;
      }
    }
    CHECK(seen);
  }

  // a model missing products fails per-model, the sweep continues
  {
    ScoringModel broken;
    broken.name = "zz_broken";
    broken.scores = {{"p0000", 1.0}};
    write_model(broken, (fs::path(models_dir) / "zz_broken.model").string());
    std::ostringstream out3, err3;
    REQUIRE(cmd_sweep(sweep_opt, out3, err3) == 0);
    CHECK(json::parse(out3.str())["rows"] == 6 * 2 * 2);  // broken adds nothing
    CHECK(err3.str().find("zz_broken") != std::string::npos);
  }

  // undefined metric: evaluate against an all-ties model
  {
    ScoringModel flat;
    flat.name = "flat";
    const auto truth = read_ground_truth(sim_opt.out_path + ".truth.json");
    for (const auto& item : truth["relevance"].items()) {
      flat.scores[item.key()] = 1.0;
    }
    const auto flat_path = tmp.file("flat.model");
    write_model(flat, flat_path);
    EvaluateOptions undef = eval_opt;
    undef.model_path = flat_path;
    undef.metric = "pd";
    std::ostringstream out4, err4;
    CHECK(cmd_evaluate(undef, out4, err4) == 1);
    const auto j = json::parse(out4.str());
    CHECK(j["estimate"]["defined"] == false);
    CHECK(j["estimate"]["value"].is_null());
    CHECK(j["estimate"]["rejected_tied_score"].get<std::int64_t>() > 0);
  }
}

TEST_CASE("cmd_compare: exact relationships and degenerate columns") {
  TempDir tmp;
  const auto csv = tmp.file("table.csv");
  {
    std::ofstream out(csv);
    out << "model,metric,subset,value,std_error,accepted,rejected_no_pair,"
           "rejected_same_product,rejected_tied_score,banners\n";
    for (int i = 0; i < 5; ++i) {
      const double v = 0.1 * (i + 1);
      out << "m" << i << ",pd,shuffled," << v << ",0,10,0,0,0,10\n";
      out << "m" << i << ",cd,non-shuffled," << v << ",0,10,0,0,0,10\n";
      out << "m" << i << ",pd,non-shuffled," << (1.0 - v) << ",0,10,0,0,0,10\n";
      out << "m" << i << ",cd,shuffled,0.25,0,10,0,0,0,10\n";
    }
  }

  CompareOptions same{csv, "cd:non-shuffled", "pd:shuffled"};
  const auto identical = compare_columns(same);
  CHECK(*identical.pearson == doctest::Approx(1.0));
  CHECK(*identical.spearman == doctest::Approx(1.0));
  REQUIRE(identical.pairs.size() == 5);

  CompareOptions anti{csv, "pd:non-shuffled", "pd:shuffled"};
  const auto reversed = compare_columns(anti);
  CHECK(*reversed.pearson == doctest::Approx(-1.0));
  CHECK(*reversed.spearman == doctest::Approx(-1.0));

  CompareOptions flat{csv, "cd:shuffled", "pd:shuffled"};
  std::ostringstream out, err;
  CHECK(cmd_compare(flat, out, err) == 1);
  CHECK(out.str().find("undefined") != std::string::npos);

  CompareOptions missing{csv, "nope:shuffled", "pd:shuffled"};
  std::ostringstream out2, err2;
  CHECK(cmd_compare(missing, out2, err2) == 1);
}

TEST_CASE("cmd_oracle: small run passes and reports") {
  OracleOptions opt;
  opt.max_n = 5;
  opt.trials = 40;
  opt.seed = 3;
  std::ostringstream out, err;
  REQUIRE(cmd_oracle(opt, out, err) == 0);
  CHECK(out.str().find("PASS") != std::string::npos);

  OracleOptions bad;
  bad.max_n = 9;
  std::ostringstream out2, err2;
  CHECK(cmd_oracle(bad, out2, err2) == 1);
}

TEST_CASE("cmd_ctr_by_rank: writes the expected table") {
  TempDir tmp;
  SimulateOptions sim_opt;
  sim_opt.config_path =
      write_config(tmp, {{"num_banners", 2000},
                         {"banner_sizes", json::array({json::array({3, 1.0})})}});
  sim_opt.out_path = tmp.file("log.jsonl");
  std::ostringstream sim_out, sim_err;
  REQUIRE(cmd_simulate(sim_opt, sim_out, sim_err) == 0);

  CtrOptions opt;
  opt.log_path = sim_opt.out_path;
  opt.out_csv = tmp.file("ctr.csv");
  std::ostringstream out, err;
  REQUIRE(cmd_ctr_by_rank(opt, out, err) == 0);
  const auto csv = slurp(opt.out_csv);
  CHECK(csv.rfind("banner_size,rank,impressions,clicks,ctr", 0) == 0);
  CHECK(csv.find("\n3,1,2000,") != std::string::npos);
  CHECK(csv.find("\n3,3,2000,") != std::string::npos);
}

TEST_CASE("pipeline: sweep orders the noise ladder on shuffled traffic") {
  TempDir tmp;
  SimulateOptions sim_opt;
  sim_opt.config_path = write_config(
      tmp, {{"num_banners", 60000},
            {"shuffle_fraction", 0.5},
            {"candidate_pool_size", 20},
            {"banner_sizes", json::array({json::array({5, 1.0})})},
            {"zoo",
             {{"count", 10},
              {"bias_chasers", 0},
              {"noise_levels", {0.1, 0.2, 0.35, 0.5, 0.65, 0.8, 0.9, 1.0}}}}});
  sim_opt.out_path = tmp.file("ladder.jsonl");
  std::ostringstream sim_out, sim_err;
  REQUIRE(cmd_simulate(sim_opt, sim_out, sim_err) == 0);

  SweepOptions sweep_opt;
  sweep_opt.log_path = sim_opt.out_path;
  sweep_opt.models_dir = sim_opt.out_path + ".models";
  sweep_opt.out_csv = tmp.file("ladder.csv");
  sweep_opt.metrics = {"pd"};
  sweep_opt.subsets = {"shuffled"};
  sweep_opt.seed = 4;
  std::ostringstream sweep_out, sweep_err;
  REQUIRE(cmd_sweep(sweep_opt, sweep_out, sweep_err) == 0);

  // parse the ladder rows back out of the CSV
  std::istringstream csv(slurp(sweep_opt.out_csv));
  std::string line;
  std::getline(csv, line);
  std::vector<double> noise_levels, values;
  while (std::getline(csv, line)) {
    const auto name_end = line.find(',');
    const std::string model = line.substr(0, name_end);
    const auto tag = model.find("rel_noise_");
    if (tag == std::string::npos) continue;
    noise_levels.push_back(std::stod(model.substr(tag + 10)));
    std::istringstream fields(line);
    std::string field;
    for (int i = 0; i <= 3; ++i) std::getline(fields, field, ',');
    values.push_back(std::stod(field));
  }
  REQUIRE(noise_levels.size() == 8);
  const auto rho = spearman_correlation(noise_levels, values);
  REQUIRE(rho.has_value());
  CHECK(*rho >= 0.9);
}
