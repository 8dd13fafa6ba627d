#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "psinfer/harness.hpp"
#include "psinfer/simulate.hpp"
#include "test_support.hpp"

using namespace psinfer;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<MethodSpec> wald_methods() {
  MethodSpec fs;
  fs.variance = VarianceKind::fs;
  MethodSpec ns;
  ns.variance = VarianceKind::ns;
  return {fs, ns};
}

SuperPopulation small_population(Index n, double pz, double py0, uint64_t seed) {
  Matrix x = generate_covariates(n, seed);
  const CalibrationValues calib = calibrate_cell(x, pz, py0);
  return realize_population(std::move(x), calib, derive_seed(seed, 1), seed);
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("the paper grid yields 160 scenarios") {
  GridConfig grid;
  grid.n_grid = {100, 150, 200, 300, 500, 750, 1000};
  grid.pz_grid = {0.1, 0.2, 0.3, 0.4, 0.5};
  grid.py0_grid = {0.1, 0.2, 0.3, 0.4, 0.5};
  grid.exclusions = default_exclusions();
  const auto scenarios = scenario_grid(grid, 10, 10, wald_methods());
  CHECK(scenarios.size() == 160);

  // ids are dense and unique
  std::set<int> ids;
  for (const auto& s : scenarios) ids.insert(s.id);
  CHECK(ids.size() == 160);
}

TEST_CASE("the augmented-study grid yields 120 scenarios") {
  GridConfig grid;
  grid.n_grid = {150, 200, 300, 500, 750, 1000};
  grid.pz_grid = {0.2, 0.3, 0.4, 0.5};
  grid.py0_grid = {0.1, 0.2, 0.3, 0.4, 0.5};
  const auto scenarios = scenario_grid(grid, 10, 10, wald_methods());
  CHECK(scenarios.size() == 120);
}

TEST_CASE("single-cell config yields one scenario; empty grids are rejected") {
  GridConfig grid;
  grid.n_grid = {200};
  grid.pz_grid = {0.5};
  grid.py0_grid = {0.5};
  CHECK(scenario_grid(grid, 10, 10, wald_methods()).size() == 1);
  grid.py0_grid.clear();
  CHECK_THROWS_AS(scenario_grid(grid, 10, 10, wald_methods()), InvalidGrid);
}

TEST_CASE("invalid method combinations are rejected") {
  MethodSpec m;
  m.estimand = Estimand::ato;
  m.variance = VarianceKind::pes;
  CHECK_THROWS_AS(validate_method(m), ConfigError);
  m = MethodSpec{};
  m.variance = VarianceKind::ns;
  m.ci = CiMethod::percentile;  // percentile CI without a bootstrap
  CHECK_THROWS_AS(validate_method(m), ConfigError);
}

TEST_CASE("stratified subsample fixes the treated count") {
  const SuperPopulation sp = small_population(30000, 0.3, 0.3, 303);
  const PopulationStrata strata(sp);

  Rng rng(1);
  Dataset d = stratified_subsample(sp, strata, 100, 0.3, rng);
  CHECK(d.n() == 100);
  CHECK(d.treated_count() == 30);

  d = stratified_subsample(sp, strata, 150, 0.1, rng);
  CHECK(d.n() == 150);
  CHECK(d.treated_count() == 15);

  for (int draw = 0; draw < 1000; ++draw) {
    const Dataset s = stratified_subsample(sp, strata, 60, 0.2, rng);
    CHECK(s.treated_count() == 12);
    // without replacement within the draw: continuous covariates are distinct
    std::set<double> x1;
    for (Index i = 0; i < s.n(); ++i) x1.insert(s.x(i, 0));
    CHECK(x1.size() == static_cast<std::size_t>(s.n()));
  }
}

TEST_CASE("subsampling an exhausted stratum fails loudly") {
  const SuperPopulation sp = small_population(2000, 0.3, 0.3, 9);
  const PopulationStrata strata(sp);
  Rng rng(2);
  CHECK_THROWS_AS(stratified_subsample(sp, strata, 1999, 0.9, rng), StratumExhausted);
}

TEST_CASE("aggregate_metrics equals spreadsheet arithmetic on a 3-rep table") {
  std::vector<RepMethodRow> rows = {
      {0.10, 0.05, 0.00, 0.20},
      {-0.02, 0.04, -0.10, 0.04},
      {0.04, 0.06, -0.08, 0.16},
  };
  const std::vector<double> bench = {0.10, -0.02, 0.04};
  const double truth = 0.05;
  const MethodAggregate agg = aggregate_metrics(rows, bench, truth);

  CHECK(*agg.mean_se == doctest::Approx(0.05).epsilon(1e-15));
  // SD of {0.10, -0.02, 0.04}: mean 0.04, devs {0.06, -0.06, 0.0}
  CHECK(*agg.empirical_sd == doctest::Approx(std::sqrt(0.0072 / 2.0)).epsilon(1e-12));
  CHECK(*agg.se_ratio == doctest::Approx(0.05 / std::sqrt(0.0036)).epsilon(1e-12));
  CHECK(*agg.coverage == doctest::Approx(2.0 / 3.0).epsilon(1e-15));  // truth in reps 1 and 3
  CHECK(*agg.mean_width == doctest::Approx((0.20 + 0.14 + 0.24) / 3.0).epsilon(1e-12));
  const double sd_se = sample_sd(std::vector<double>{0.05, 0.04, 0.06});
  CHECK(*agg.sd_se == doctest::Approx(sd_se).epsilon(1e-12));
  CHECK(*agg.mcse_mean_se == doctest::Approx(sd_se / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("coverage counts intervals containing the truth") {
  std::vector<RepMethodRow> rows = {
      {0, 1, -1.0, 1.0}, {0, 1, 0.2, 0.4}, {0, 1, -0.5, 0.1}, {0, 1, 0.6, 0.9}};
  const MethodAggregate agg = aggregate_metrics(rows, {0.0, 0.1}, 0.0);
  CHECK(*agg.coverage == 0.5);

  // an always (-1, 1) interval covers every binary-outcome effect
  std::vector<RepMethodRow> wide(10, RepMethodRow{0, 1, -1.0, 1.0});
  CHECK(*aggregate_metrics(wide, {0.0, 0.1}, -0.02).coverage == 1.0);

  CHECK_THROWS_AS(aggregate_metrics({}, {}, 0.0), TooFewReps);
}

TEST_CASE("a single replication reports absent spread statistics") {
  const SuperPopulation sp = small_population(20000, 0.5, 0.5, 55);
  Scenario sc;
  sc.id = 0;
  sc.n = 150;
  sc.pz = 0.5;
  sc.py0 = 0.5;
  sc.reps = 1;
  sc.B = 50;
  sc.methods = wald_methods();
  const ScenarioResult res = run_scenario(sp, sc, 7);
  REQUIRE(res.per_method.size() == 2);
  CHECK(res.per_method[0].mean_se.has_value());
  CHECK_FALSE(res.per_method[0].empirical_sd.has_value());
  CHECK_FALSE(res.per_method[0].se_ratio.has_value());
}

TEST_CASE("wald mean width is exactly 2 z mean_se") {
  const SuperPopulation sp = small_population(20000, 0.5, 0.5, 56);
  Scenario sc;
  sc.id = 0;
  sc.n = 200;
  sc.pz = 0.5;
  sc.py0 = 0.5;
  sc.reps = 25;
  sc.B = 50;
  sc.methods = wald_methods();
  const ScenarioResult res = run_scenario(sp, sc, 11);
  const double z = normal_quantile(0.975);
  for (const auto& agg : res.per_method) {
    CHECK(std::fabs(*agg.mean_width - 2.0 * z * *agg.mean_se) < 1e-12);
  }
}

TEST_CASE("run_scenario is worker-count independent") {
  const SuperPopulation sp = small_population(20000, 0.4, 0.4, 57);
  Scenario sc;
  sc.id = 3;
  sc.n = 120;
  sc.pz = 0.4;
  sc.py0 = 0.4;
  sc.reps = 20;
  sc.B = 60;
  MethodSpec boot;
  boot.variance = VarianceKind::boot_strat_est;
  boot.ci = CiMethod::percentile;
  sc.methods = {wald_methods()[0], boot};
  const ScenarioResult a = run_scenario(sp, sc, 99, 1, true);
  const ScenarioResult b = run_scenario(sp, sc, 99, 3, true);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t mi = 0; mi < a.rows.size(); ++mi) {
    REQUIRE(a.rows[mi].size() == b.rows[mi].size());
    for (std::size_t r = 0; r < a.rows[mi].size(); ++r) {
      CHECK(a.rows[mi][r].point == b.rows[mi][r].point);
      CHECK(a.rows[mi][r].se == b.rows[mi][r].se);
      CHECK(a.rows[mi][r].ci_lo == b.rows[mi][r].ci_lo);
      CHECK(a.rows[mi][r].ci_hi == b.rows[mi][r].ci_hi);
    }
  }
}

TEST_CASE("cached populations reproduce the uncached run") {
  testsupport::TempDir dir("cache");
  SimulationConfig cfg;
  cfg.n_super = 20000;
  cfg.grid.n_grid = {150};
  cfg.grid.pz_grid = {0.3};
  cfg.grid.py0_grid = {0.3};
  cfg.reps = 10;
  cfg.B = 50;
  MethodSpec fs;
  fs.variance = VarianceKind::fs;
  cfg.methods = {fs};
  std::ostringstream log;

  cfg.output_dir = dir.str() + "/fresh";
  run_simulation(cfg, 555, 1, log);
  cfg.population_cache = dir.str() + "/popcache";
  cfg.output_dir = dir.str() + "/warm";
  run_simulation(cfg, 555, 1, log);  // generates and saves
  cfg.output_dir = dir.str() + "/cached";
  run_simulation(cfg, 555, 1, log);  // loads from cache

  CHECK(read_file(dir.str() + "/fresh/metrics.csv") ==
        read_file(dir.str() + "/warm/metrics.csv"));
  CHECK(read_file(dir.str() + "/warm/metrics.csv") ==
        read_file(dir.str() + "/cached/metrics.csv"));
}

TEST_CASE("the paper grid emits 160 metrics rows per method") {
  testsupport::TempDir dir("grid");
  SimulationConfig cfg;
  cfg.n_super = 20000;  // desk-scale population; reps scaled down
  cfg.grid.n_grid = {100, 150, 200, 300, 500, 750, 1000};
  cfg.grid.pz_grid = {0.1, 0.2, 0.3, 0.4, 0.5};
  cfg.grid.py0_grid = {0.1, 0.2, 0.3, 0.4, 0.5};
  cfg.grid.exclusions = default_exclusions();
  cfg.reps = 2;
  cfg.B = 50;
  MethodSpec fs;
  fs.variance = VarianceKind::fs;
  MethodSpec ato_fs;
  ato_fs.estimand = Estimand::ato;
  ato_fs.variance = VarianceKind::fs;
  cfg.methods = {fs, ato_fs};
  cfg.output_dir = dir.str() + "/out";
  std::ostringstream log;
  run_simulation(cfg, 31337, 2, log);

  std::ifstream metrics(dir.str() + "/out/metrics.csv");
  std::string line;
  int ate_rows = 0, ato_rows = 0;
  std::getline(metrics, line);  // header
  while (std::getline(metrics, line)) {
    if (line.find(",ate,") != std::string::npos) ++ate_rows;
    if (line.find(",ato,") != std::string::npos) ++ato_rows;
  }
  CHECK(ate_rows == 160);
  CHECK(ato_rows == 160);
}

TEST_CASE("simulation output bytes are reproducible across worker counts") {
  testsupport::TempDir dir("sim");
  const std::string cfg_path = dir.file("config.json");
  {
    std::ofstream cfg(cfg_path);
    cfg << R"({
      "n_super": 20000,
      "n": [120],
      "pz": [0.4],
      "py0": [0.4],
      "reps": 15,
      "B": 50,
      "write_reps": true,
      "output_dir": ")" << dir.str() << R"(/run1",
      "methods": [
        {"estimand": "ate", "variance": "fs", "ci": "wald"},
        {"estimand": "ate", "variance": "boot-std-est", "ci": "pct"},
        {"estimand": "ato", "variance": "ns", "ci": "wald"}
      ]
    })";
  }
  SimulationConfig cfg = parse_simulation_config(cfg_path);
  std::ostringstream log;
  run_simulation(cfg, 4242, 1, log);
  cfg.output_dir = dir.str() + "/run2";
  run_simulation(cfg, 4242, 2, log);

  const std::string m1 = read_file(dir.str() + "/run1/metrics.csv");
  const std::string m2 = read_file(dir.str() + "/run2/metrics.csv");
  REQUIRE(!m1.empty());
  CHECK(m1 == m2);
  CHECK(read_file(dir.str() + "/run1/reps.csv") == read_file(dir.str() + "/run2/reps.csv"));

  // one metrics row per method
  int lines = 0;
  for (char c : m1) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 4);  // header + 3 methods
}

}  // TEST_SUITE
