// Command-line front end: dataset analysis, Monte Carlo simulation, and
// super-population calibration. All estimation lives in the headers; this
// file only parses flags and routes I/O.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "psinfer/psinfer.hpp"

namespace {

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PSINFER_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed > 0) return parsed;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

int run_analyze(const psinfer::AnalyzeRequest& req, const std::string& out_prefix) {
  const auto rows = psinfer::analyze_command(req);
  psinfer::write_report_csv(rows, std::cout);
  if (!out_prefix.empty()) {
    std::ofstream csv(out_prefix + ".csv");
    if (!csv) throw psinfer::Error("cannot open " + out_prefix + ".csv");
    psinfer::write_report_csv(rows, csv);
    std::ofstream json(out_prefix + ".json");
    if (!json) throw psinfer::Error("cannot open " + out_prefix + ".json");
    psinfer::write_report_json(rows, json);
  }
  for (const auto& r : rows) {
    if (!r.error.empty()) return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Propensity-score weighted treatment effects with sandwich and "
               "bootstrap variance estimators"};
  app.require_subcommand(1);

  // --- analyze ---
  psinfer::AnalyzeRequest req;
  std::string estimand_label = "ate";
  std::string variance_label = "ns";
  std::string ci_label = "wald";
  std::string subgroup;
  std::string out_prefix;
  int analyze_threads = 0;
  auto* analyze = app.add_subcommand("analyze", "Estimate a treatment effect from a CSV dataset");
  analyze->add_option("--data", req.data_path, "input CSV file")->required();
  analyze->add_option("--outcome", req.outcome, "binary outcome column")->required();
  analyze->add_option("--treatment", req.treatment, "binary treatment column")->required();
  analyze->add_option("--covariates", req.covariates, "PS model covariate columns")
      ->required()
      ->delimiter(',');
  analyze->add_option("--estimand", estimand_label, "ate|ato");
  analyze->add_option("--variance", variance_label,
                      "fs|ms|pes|ns|boot-std-fixed|boot-strat-fixed|boot-std-est|boot-strat-est");
  analyze->add_option("--ci", ci_label, "wald|pct|basic|bca");
  analyze->add_option("-B,--boot-replicates", req.B, "bootstrap replicates");
  analyze->add_option("--seed", req.seed, "RNG seed for bootstrap streams");
  analyze->add_option("--subgroup", subgroup, "covariate column for subgroup analysis");
  analyze->add_option("--augment", req.augment_covariates,
                      "outcome-model covariates (enables augmentation)")
      ->delimiter(',');
  analyze->add_flag("--per-arm-outcome", req.per_arm_outcome,
                    "fit separate outcome models within each arm");
  analyze->add_option("--level", req.level, "confidence level (default 0.95)");
  analyze->add_option("--out", out_prefix, "output prefix; writes <prefix>.csv and <prefix>.json");
  analyze->add_option("--threads", analyze_threads, "bootstrap worker threads");

  // --- simulate ---
  std::string config_path;
  uint64_t sim_seed = 0;
  int sim_threads = 0;
  auto* simulate = app.add_subcommand("simulate", "Run the Monte Carlo benchmark grid");
  simulate->add_option("--config", config_path, "JSON simulation config")->required();
  simulate->add_option("--seed", sim_seed, "master seed")->required();
  simulate->add_option("--threads", sim_threads, "worker threads (default: PSINFER_THREADS or all cores)");

  // --- calibrate ---
  double cal_pz = 0.3, cal_py0 = 0.3, cal_ate = -0.02;
  psinfer::Index cal_n = 1'000'000;
  uint64_t cal_seed = 0;
  std::string cal_out, cal_csv;
  auto* calibrate =
      app.add_subcommand("calibrate", "Calibrate and realize one super-population cell");
  calibrate->add_option("--pz", cal_pz, "target treatment prevalence")->required();
  calibrate->add_option("--py0", cal_py0, "target control-arm outcome prevalence")->required();
  calibrate->add_option("--target-ate", cal_ate, "target risk difference (default -0.02)");
  calibrate->add_option("--n-super", cal_n, "super-population size (default 1e6)");
  calibrate->add_option("--seed", cal_seed, "master seed")->required();
  calibrate->add_option("--out", cal_out, "write population binary (+ .json sidecar)");
  calibrate->add_option("--export-csv", cal_csv, "also dump the population as CSV");

  auto* methods = app.add_subcommand("methods", "List method labels");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*analyze) {
      req.estimand = psinfer::estimand_from_label(estimand_label);
      req.variance = psinfer::variance_from_label(variance_label);
      req.ci = psinfer::ci_from_label(ci_label);
      req.augmented = !req.augment_covariates.empty();
      if (!subgroup.empty()) req.subgroup = subgroup;
      req.threads = worker_count(analyze_threads);
      return run_analyze(req, out_prefix);
    }
    if (*simulate) {
      const auto cfg = psinfer::parse_simulation_config(config_path);
      psinfer::run_simulation(cfg, sim_seed, worker_count(sim_threads), std::cout);
      return 0;
    }
    if (*calibrate) {
      const uint64_t cov_seed = psinfer::derive_seed(cal_seed, 1);
      const uint64_t realize_seed = psinfer::derive_seed(cal_seed, 2);
      psinfer::Matrix x = psinfer::generate_covariates(cal_n, cov_seed);
      const auto calib = psinfer::calibrate_cell(x, cal_pz, cal_py0, cal_ate);
      const auto sp = psinfer::realize_population(std::move(x), calib, realize_seed, cov_seed);
      const auto [true_ate, true_ato] = psinfer::true_estimands(sp);
      nlohmann::json j;
      j["alpha0_treat"] = calib.alpha0_treat;
      j["alpha0_outcome"] = calib.alpha0_outcome;
      j["alpha_treat"] = calib.alpha_treat;
      j["achieved_pz"] = calib.achieved_pz;
      j["achieved_py0"] = calib.achieved_py0;
      j["achieved_ate"] = calib.achieved_ate;
      j["true_ate"] = true_ate;
      j["true_ato"] = true_ato;
      std::cout << j.dump(2) << '\n';
      if (!cal_out.empty()) psinfer::save_population(sp, cal_out);
      if (!cal_csv.empty()) psinfer::export_population_csv(sp, cal_csv);
      return 0;
    }
    if (*methods) {
      std::cout << "variance: fs ms pes ns boot-std-fixed boot-strat-fixed boot-std-est "
                   "boot-strat-est\n";
      std::cout << "ci:       wald pct basic bca\n";
      std::cout << "estimand: ate ato\n";
      return 0;
    }
  } catch (const psinfer::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const psinfer::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
