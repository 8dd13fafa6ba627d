#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "psinfer/dgp.hpp"
#include "psinfer/errors.hpp"
#include "psinfer/harness.hpp"
#include "psinfer/math.hpp"

namespace psinfer {

/// Everything a `simulate` run needs, parsed from the JSON config. The master
/// seed is supplied separately (mandatory on the command line; a config
/// "seed" key serves as a default).
struct SimulationConfig {
  Index n_super = 1'000'000;
  GridConfig grid;
  int reps = 1000;
  int B = 500;
  std::vector<MethodSpec> methods;
  double target_ate = -0.02;
  bool write_reps = false;
  std::string output_dir = ".";
  std::string population_cache;  // directory; empty = no caching
  std::optional<uint64_t> seed;
};

namespace simulate_detail {

template <typename T>
T get_or_throw(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key)) throw ConfigError("missing config key: " + key);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

template <typename T>
T get_or_default(const nlohmann::json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config key '" + key + "': " + e.what());
  }
}

}  // namespace simulate_detail

inline MethodSpec method_from_json(const nlohmann::json& j) {
  using simulate_detail::get_or_default;
  using simulate_detail::get_or_throw;
  MethodSpec m;
  m.estimand = estimand_from_label(get_or_throw<std::string>(j, "estimand"));
  m.variance = variance_from_label(get_or_throw<std::string>(j, "variance"));
  m.ci = ci_from_label(get_or_default<std::string>(j, "ci", "wald"));
  if (j.contains("augment")) {
    m.augmented = true;
    m.outcome_covariates = get_or_throw<std::vector<std::string>>(j, "augment");
  }
  m.per_arm_outcome = get_or_default<bool>(j, "per_arm_outcome", false);
  validate_method(m);
  return m;
}

inline SimulationConfig parse_simulation_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }

  using simulate_detail::get_or_default;
  using simulate_detail::get_or_throw;
  SimulationConfig cfg;
  cfg.n_super = get_or_default<Index>(j, "n_super", 1'000'000);
  cfg.grid.n_grid = get_or_throw<std::vector<int>>(j, "n");
  cfg.grid.pz_grid = get_or_throw<std::vector<double>>(j, "pz");
  cfg.grid.py0_grid = get_or_throw<std::vector<double>>(j, "py0");
  if (j.contains("exclude")) {
    for (const auto& pair : j.at("exclude")) {
      if (!pair.is_array() || pair.size() != 2) {
        throw ConfigError("exclude entries must be [n, pz] pairs");
      }
      cfg.grid.exclusions.emplace_back(pair[0].get<int>(), pair[1].get<double>());
    }
  }
  cfg.reps = get_or_throw<int>(j, "reps");
  cfg.B = get_or_default<int>(j, "B", 500);
  cfg.target_ate = get_or_default<double>(j, "target_ate", -0.02);
  cfg.write_reps = get_or_default<bool>(j, "write_reps", false);
  cfg.output_dir = get_or_default<std::string>(j, "output_dir", ".");
  cfg.population_cache = get_or_default<std::string>(j, "population_cache", "");
  if (j.contains("seed")) cfg.seed = get_or_throw<uint64_t>(j, "seed");
  if (!j.contains("methods") || !j.at("methods").is_array() || j.at("methods").empty()) {
    throw ConfigError("config needs a non-empty 'methods' array");
  }
  for (const auto& mj : j.at("methods")) cfg.methods.push_back(method_from_json(mj));
  if (cfg.reps < 1) throw ConfigError("reps must be >= 1");
  if (cfg.B < 2) throw ConfigError("B must be >= 2");
  return cfg;
}

namespace simulate_detail {

inline std::string opt_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string{};
}

inline std::string cache_file_name(double pz, double py0, Index n_super, double target_ate,
                                   uint64_t seed) {
  std::ostringstream name;
  name << "pop_pz" << format_double(pz) << "_py0" << format_double(py0) << "_N" << n_super
       << "_ate" << format_double(target_ate) << "_seed" << seed << ".bin";
  return name.str();
}

}  // namespace simulate_detail

/// Builds (or loads from the cache directory) the calibrated super-population
/// for one (pz, py0) cell. cell_id indexes the pz x py0 cross and pins the
/// derivation of the generation seeds.
inline SuperPopulation population_for_cell(double pz, double py0, Index n_super, double target_ate,
                                           uint64_t master_seed, int cell_id,
                                           const std::string& cache_dir = "") {
  std::string cache_path;
  if (!cache_dir.empty()) {
    std::filesystem::create_directories(cache_dir);
    cache_path = (std::filesystem::path(cache_dir) /
                  simulate_detail::cache_file_name(pz, py0, n_super, target_ate, master_seed))
                     .string();
    if (std::filesystem::exists(cache_path)) return load_population(cache_path);
  }
  const uint64_t cell_seed =
      derive_seed(master_seed, {stream::population, static_cast<uint64_t>(cell_id)});
  const uint64_t cov_seed = derive_seed(cell_seed, 1);
  const uint64_t realize_seed = derive_seed(cell_seed, 2);
  Matrix x = generate_covariates(n_super, cov_seed);
  const CalibrationValues calib = calibrate_cell(x, pz, py0, target_ate);
  SuperPopulation sp = realize_population(std::move(x), calib, realize_seed, cov_seed);
  if (!cache_path.empty()) save_population(sp, cache_path);
  return sp;
}

/// Runs the whole configured grid and writes metrics.csv (one row per
/// scenario x method) plus, optionally, reps.csv with one row per surviving
/// (rep, method) and per-rep unaugmented benchmark points (method "raw").
/// Output bytes depend only on (config, master_seed).
inline void run_simulation(const SimulationConfig& cfg, uint64_t master_seed, int num_threads,
                           std::ostream& log) {
  const auto scenarios = scenario_grid(cfg.grid, cfg.reps, cfg.B, cfg.methods);
  std::filesystem::create_directories(cfg.output_dir);
  const auto out_dir = std::filesystem::path(cfg.output_dir);

  std::ofstream metrics(out_dir / "metrics.csv");
  if (!metrics) throw Error("cannot open metrics.csv for writing");
  metrics << "scenario_id,n,pz,py0,estimand,method,mean_se,empirical_sd,se_ratio,coverage,"
             "mean_width,sd_se,mcse_mean_se,rep_failures,boot_failure_rate\n";

  std::ofstream reps_out;
  if (cfg.write_reps) {
    reps_out.open(out_dir / "reps.csv");
    if (!reps_out) throw Error("cannot open reps.csv for writing");
    reps_out << "scenario_id,rep,estimand,method,point,se,ci_lo,ci_hi,covered\n";
  }

  auto cell_index = [&](double pz, double py0) {
    int pz_idx = -1, py0_idx = -1;
    for (std::size_t i = 0; i < cfg.grid.pz_grid.size(); ++i) {
      if (cfg.grid.pz_grid[i] == pz) pz_idx = static_cast<int>(i);
    }
    for (std::size_t i = 0; i < cfg.grid.py0_grid.size(); ++i) {
      if (cfg.grid.py0_grid[i] == py0) py0_idx = static_cast<int>(i);
    }
    return pz_idx * static_cast<int>(cfg.grid.py0_grid.size()) + py0_idx;
  };

  SuperPopulation sp;
  std::optional<PopulationStrata> strata;
  int loaded_cell = -1;
  for (const auto& sc : scenarios) {
    const int cell = cell_index(sc.pz, sc.py0);
    if (cell != loaded_cell) {
      sp = population_for_cell(sc.pz, sc.py0, cfg.n_super, cfg.target_ate, master_seed, cell,
                               cfg.population_cache);
      strata.emplace(sp);
      loaded_cell = cell;
    }

    const ScenarioResult res =
        run_scenario(sp, *strata, sc, master_seed, num_threads, cfg.write_reps);

    for (std::size_t mi = 0; mi < sc.methods.size(); ++mi) {
      const auto& m = sc.methods[mi];
      const auto& a = res.per_method[mi];
      using simulate_detail::opt_field;
      metrics << sc.id << ',' << sc.n << ',' << format_double(sc.pz) << ','
              << format_double(sc.py0) << ',' << to_label(m.estimand) << ',' << method_label(m)
              << ',' << opt_field(a.mean_se) << ',' << opt_field(a.empirical_sd) << ','
              << opt_field(a.se_ratio) << ',' << opt_field(a.coverage) << ','
              << opt_field(a.mean_width) << ',' << opt_field(a.sd_se) << ','
              << opt_field(a.mcse_mean_se) << ',' << a.rep_failures << ','
              << format_double(a.boot_failure_rate) << '\n';
    }

    if (cfg.write_reps) {
      for (std::size_t ri = 0; ri < res.row_rep_index.size(); ++ri) {
        const int rep = res.row_rep_index[ri];
        for (const auto& [est_label, series] : res.raw_points) {
          reps_out << sc.id << ',' << rep << ',' << est_label << ",raw,"
                   << format_double(series[ri]) << ",,,,\n";
        }
        for (std::size_t mi = 0; mi < sc.methods.size(); ++mi) {
          const auto& m = sc.methods[mi];
          const auto& row = res.rows[mi][ri];
          const double truth = m.estimand == Estimand::ate ? res.truth_ate : res.truth_ato;
          const bool covered = row.ci_lo <= truth && truth <= row.ci_hi;
          reps_out << sc.id << ',' << rep << ',' << to_label(m.estimand) << ','
                   << method_label(m) << ',' << format_double(row.point) << ','
                   << format_double(row.se) << ',' << format_double(row.ci_lo) << ','
                   << format_double(row.ci_hi) << ',' << (covered ? 1 : 0) << '\n';
        }
      }
    }

    log << "scenario " << sc.id << " (n=" << sc.n << ", pz=" << format_double(sc.pz)
        << ", py0=" << format_double(sc.py0) << "): " << sc.methods.size() << " methods, "
        << res.rep_failures << " rep failures\n";
  }
}

}  // namespace psinfer
