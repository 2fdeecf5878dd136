#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "plrank/logio.hpp"
#include "plrank/metrics.hpp"
#include "plrank/sim.hpp"

namespace plrank {

// Command implementations live here so tests and the acceptance suite can
// drive exactly what the binary runs. Each cmd_* returns a process exit code:
// 0 on success, nonzero when the command's contract is violated.

// {shuffled, non-shuffled, all} -> the records the estimate runs on
std::vector<BannerRecord> filter_subset(const std::vector<BannerRecord>& records,
                                        const std::string& subset);

struct SimulateOptions {
  std::string config_path;
  std::string out_path;
  std::string truth_path;   // default: <out>.truth.json
  std::string models_dir;   // default: <out>.models
};
int cmd_simulate(const SimulateOptions& opt, std::ostream& out,
                 std::ostream& err);

struct EvaluateOptions {
  std::string log_path;
  std::string model_path;
  std::string metric = "pd";
  std::string subset = "all";
  std::uint64_t seed = 0;
  int resamples = 1;
};
struct EvaluateResult {
  std::string model_name;
  MetricKind kind = MetricKind::kPairwiseDisagreement;
  MetricEstimate estimate;
  IngestReport ingest;
};
EvaluateResult evaluate_log(const EvaluateOptions& opt);
int cmd_evaluate(const EvaluateOptions& opt, std::ostream& out,
                 std::ostream& err);

struct SweepOptions {
  std::string log_path;
  std::string models_dir;
  std::string out_csv;
  std::vector<std::string> metrics = {"pd", "cd"};
  std::vector<std::string> subsets = {"shuffled", "non-shuffled"};
  std::uint64_t seed = 0;
  int resamples = 1;
};
struct SweepRow {
  std::string model;
  std::string metric;
  std::string subset;
  MetricEstimate estimate;
};
// Per-model failures are reported on `err` and skipped; the sweep continues.
std::vector<SweepRow> sweep_log(const SweepOptions& opt, std::ostream& err);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path);
int cmd_sweep(const SweepOptions& opt, std::ostream& out, std::ostream& err);

struct CompareOptions {
  std::string csv_path;
  std::string x_spec;  // "metric:subset", e.g. "cd:non-shuffled"
  std::string y_spec;
};
struct ComparePair {
  std::string model;
  double x = 0.0;
  double y = 0.0;
};
struct CompareResult {
  std::vector<ComparePair> pairs;  // joined on model, sorted by model name
  std::optional<double> pearson;
  std::optional<double> spearman;
};
CompareResult compare_columns(const CompareOptions& opt);
int cmd_compare(const CompareOptions& opt, std::ostream& out, std::ostream& err);

struct OracleOptions {
  int max_n = 8;
  std::int64_t trials = 200;
  std::uint64_t seed = 0;
};
struct OracleReport {
  std::int64_t trials = 0;
  double worst_dp_vs_enumeration = 0.0;  // gate 1e-10
  double worst_rank_prob_sum = 0.0;      // deviation of prob sums from 1
  double worst_prefix_set_sum = 0.0;     // first-k subset masses vs 1
  double worst_banner_prob_sum = 0.0;    // ordered-tuple masses vs 1
  double elapsed_seconds = 0.0;
  bool passed = false;
};
OracleReport run_oracle(const OracleOptions& opt);
int cmd_oracle(const OracleOptions& opt, std::ostream& out, std::ostream& err);

struct CtrOptions {
  std::string log_path;
  std::string out_csv;  // empty: stdout
};
int cmd_ctr_by_rank(const CtrOptions& opt, std::ostream& out, std::ostream& err);

}  // namespace plrank
