#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "plrank/cli_commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"plrank: position-bias-robust ranking metrics for stochastic "
               "slate logs"};
  app.require_subcommand(1);

  plrank::SimulateOptions sim_opt;
  auto* sim = app.add_subcommand("simulate",
                                 "generate a synthetic log, its ground truth "
                                 "and a scoring-model zoo");
  sim->add_option("--config", sim_opt.config_path, "simulation config (JSON)")
      ->required();
  sim->add_option("--out", sim_opt.out_path, "output log path")->required();
  sim->add_option("--truth", sim_opt.truth_path,
                  "ground-truth path (default: <out>.truth.json)");
  sim->add_option("--models-dir", sim_opt.models_dir,
                  "model zoo directory (default: <out>.models)");

  plrank::EvaluateOptions eval_opt;
  auto* eval = app.add_subcommand("evaluate", "estimate one metric for one model");
  eval->add_option("--log", eval_opt.log_path, "log file")->required();
  eval->add_option("--model", eval_opt.model_path, "scoring-model file")
      ->required();
  eval->add_option("--metric", eval_opt.metric, "pd | cd | cd-exact");
  eval->add_option("--subset", eval_opt.subset, "shuffled | non-shuffled | all");
  eval->add_option("--seed", eval_opt.seed, "master seed for the draws");
  eval->add_option("--resamples", eval_opt.resamples, "draws per banner (>= 1)");

  plrank::SweepOptions sweep_opt;
  auto* sweep = app.add_subcommand(
      "sweep", "evaluate every model in a directory over metrics and subsets");
  sweep->add_option("--log", sweep_opt.log_path, "log file")->required();
  sweep->add_option("--models-dir", sweep_opt.models_dir, "directory of .model files")
      ->required();
  sweep->add_option("--out", sweep_opt.out_csv, "output CSV path")->required();
  sweep->add_option("--metrics", sweep_opt.metrics, "metric kinds")
      ->delimiter(',');
  sweep->add_option("--subsets", sweep_opt.subsets, "log subsets")
      ->delimiter(',');
  sweep->add_option("--seed", sweep_opt.seed, "master seed for the draws");
  sweep->add_option("--resamples", sweep_opt.resamples, "draws per banner (>= 1)");

  plrank::CompareOptions cmp_opt;
  auto* cmp = app.add_subcommand(
      "compare", "correlate two sweep columns (Pearson and Spearman)");
  cmp->add_option("--csv", cmp_opt.csv_path, "sweep CSV")->required();
  cmp->add_option("--x", cmp_opt.x_spec, "x column as metric:subset")->required();
  cmp->add_option("--y", cmp_opt.y_spec, "y column as metric:subset")->required();

  plrank::OracleOptions oracle_opt;
  auto* oracle = app.add_subcommand(
      "oracle", "randomized self-checks of the conditional rank computation");
  oracle->add_option("--max-n", oracle_opt.max_n, "largest banner size (<= 8)");
  oracle->add_option("--trials", oracle_opt.trials, "number of random instances");
  oracle->add_option("--seed", oracle_opt.seed, "seed for the instances");

  plrank::CtrOptions ctr_opt;
  auto* ctr = app.add_subcommand("ctr-by-rank",
                                 "click-through rate per rank, by banner size");
  ctr->add_option("--log", ctr_opt.log_path, "log file")->required();
  ctr->add_option("--out", ctr_opt.out_csv, "output CSV (default: stdout)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return plrank::cmd_simulate(sim_opt, std::cout, std::cerr);
    if (eval->parsed()) return plrank::cmd_evaluate(eval_opt, std::cout, std::cerr);
    if (sweep->parsed()) return plrank::cmd_sweep(sweep_opt, std::cout, std::cerr);
    if (cmp->parsed()) return plrank::cmd_compare(cmp_opt, std::cout, std::cerr);
    if (oracle->parsed()) return plrank::cmd_oracle(oracle_opt, std::cout, std::cerr);
    if (ctr->parsed()) return plrank::cmd_ctr_by_rank(ctr_opt, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
