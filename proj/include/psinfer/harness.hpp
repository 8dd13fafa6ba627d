#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "psinfer/bootstrap.hpp"
#include "psinfer/ci.hpp"
#include "psinfer/dataset.hpp"
#include "psinfer/dgp.hpp"
#include "psinfer/errors.hpp"
#include "psinfer/estimators.hpp"
#include "psinfer/glm.hpp"
#include "psinfer/rng.hpp"
#include "psinfer/sandwich.hpp"

namespace psinfer {

// ---------------------------------------------------------------------------
// Method vocabulary
// ---------------------------------------------------------------------------

enum class VarianceKind {
  fs,
  ms,
  pes,
  ns,
  boot_std_fixed,
  boot_strat_fixed,
  boot_std_est,
  boot_strat_est,
};

inline bool is_bootstrap(VarianceKind v) {
  return v == VarianceKind::boot_std_fixed || v == VarianceKind::boot_strat_fixed ||
         v == VarianceKind::boot_std_est || v == VarianceKind::boot_strat_est;
}

inline std::string to_label(Estimand e) { return e == Estimand::ate ? "ate" : "ato"; }

inline std::string to_label(VarianceKind v) {
  switch (v) {
    case VarianceKind::fs: return "fs";
    case VarianceKind::ms: return "ms";
    case VarianceKind::pes: return "pes";
    case VarianceKind::ns: return "ns";
    case VarianceKind::boot_std_fixed: return "boot-std-fixed";
    case VarianceKind::boot_strat_fixed: return "boot-strat-fixed";
    case VarianceKind::boot_std_est: return "boot-std-est";
    case VarianceKind::boot_strat_est: return "boot-strat-est";
  }
  return "?";
}

inline std::string to_label(CiMethod c) {
  switch (c) {
    case CiMethod::wald: return "wald";
    case CiMethod::percentile: return "pct";
    case CiMethod::basic: return "basic";
    case CiMethod::bca: return "bca";
  }
  return "?";
}

inline Estimand estimand_from_label(const std::string& s) {
  if (s == "ate") return Estimand::ate;
  if (s == "ato") return Estimand::ato;
  throw ConfigError("unknown estimand: " + s);
}

inline VarianceKind variance_from_label(const std::string& s) {
  for (VarianceKind v : {VarianceKind::fs, VarianceKind::ms, VarianceKind::pes, VarianceKind::ns,
                         VarianceKind::boot_std_fixed, VarianceKind::boot_strat_fixed,
                         VarianceKind::boot_std_est, VarianceKind::boot_strat_est}) {
    if (to_label(v) == s) return v;
  }
  throw ConfigError("unknown variance method: " + s);
}

inline CiMethod ci_from_label(const std::string& s) {
  for (CiMethod c : {CiMethod::wald, CiMethod::percentile, CiMethod::basic, CiMethod::bca}) {
    if (to_label(c) == s) return c;
  }
  throw ConfigError("unknown CI method: " + s);
}

/// One analysis configuration: estimand, optional outcome-model augmentation,
/// SE method, CI construction.
struct MethodSpec {
  Estimand estimand = Estimand::ate;
  bool augmented = false;
  std::vector<std::string> outcome_covariates;  // used when augmented
  bool per_arm_outcome = false;
  VarianceKind variance = VarianceKind::fs;
  CiMethod ci = CiMethod::wald;
};

inline std::string method_label(const MethodSpec& m) {
  std::string label = to_label(m.variance) + "/" + to_label(m.ci);
  if (m.augmented) label = "aug:" + label;
  return label;
}

inline void validate_method(const MethodSpec& m) {
  if ((m.variance == VarianceKind::ms || m.variance == VarianceKind::pes)) {
    if (m.estimand != Estimand::ate || m.augmented) {
      throw ConfigError("ms/pes are analytic ATE-only estimators; use ns or a bootstrap");
    }
  }
  if (m.ci != CiMethod::wald && !is_bootstrap(m.variance)) {
    throw ConfigError("CI method " + to_label(m.ci) + " needs a bootstrap variance method");
  }
}

inline BootstrapPlan make_plan(VarianceKind v, int B, uint64_t seed, bool augmented) {
  BootstrapPlan plan;
  plan.B = B;
  plan.seed = seed;
  plan.strategy = (v == VarianceKind::boot_std_fixed || v == VarianceKind::boot_std_est)
                      ? ResampleStrategy::standard
                      : ResampleStrategy::stratified;
  plan.ps_mode = (v == VarianceKind::boot_std_fixed || v == VarianceKind::boot_strat_fixed)
                     ? PsMode::fixed
                     : PsMode::reestimated;
  plan.outcome_mode = augmented ? OutcomeModelMode::refit : OutcomeModelMode::none;
  return plan;
}

// ---------------------------------------------------------------------------
// Scenario grid and subsampling
// ---------------------------------------------------------------------------

struct Scenario {
  int id = 0;
  int n = 0;
  double pz = 0.0;
  double py0 = 0.0;
  int reps = 0;
  int B = 0;
  std::vector<MethodSpec> methods;
};

struct GridConfig {
  std::vector<int> n_grid;
  std::vector<double> pz_grid;
  std::vector<double> py0_grid;
  std::vector<std::pair<int, double>> exclusions;  // (n, pz) pairs removed from the cross
};

/// Paper exclusion set: cells that frequently quasi-separate.
inline std::vector<std::pair<int, double>> default_exclusions() {
  return {{100, 0.1}, {150, 0.1}, {100, 0.2}};
}

/// Full cross of pz x py0 x n minus the exclusions, enumerated pz-major so
/// scenarios sharing one calibrated population are contiguous.
inline std::vector<Scenario> scenario_grid(const GridConfig& grid, int reps, int B,
                                           const std::vector<MethodSpec>& methods) {
  if (grid.n_grid.empty() || grid.pz_grid.empty() || grid.py0_grid.empty()) {
    throw InvalidGrid("empty scenario grid");
  }
  for (int n : grid.n_grid) {
    if (n < 2) throw InvalidGrid("sample size below 2");
  }
  for (double v : grid.pz_grid) {
    if (!(v > 0.0 && v < 1.0)) throw InvalidGrid("pz outside (0, 1)");
  }
  for (double v : grid.py0_grid) {
    if (!(v > 0.0 && v < 1.0)) throw InvalidGrid("py0 outside (0, 1)");
  }
  auto excluded = [&](int n, double pz) {
    for (const auto& [xn, xpz] : grid.exclusions) {
      if (xn == n && std::fabs(xpz - pz) < 1e-9) return true;
    }
    return false;
  };
  std::vector<Scenario> out;
  int id = 0;
  for (double pz : grid.pz_grid) {
    for (double py0 : grid.py0_grid) {
      for (int n : grid.n_grid) {
        if (excluded(n, pz)) continue;
        Scenario sc;
        sc.id = id++;
        sc.n = n;
        sc.pz = pz;
        sc.py0 = py0;
        sc.reps = reps;
        sc.B = B;
        sc.methods = methods;
        out.push_back(std::move(sc));
      }
    }
  }
  if (out.empty()) throw InvalidGrid("all scenarios excluded");
  return out;
}

/// Treated/control row indices of a population; built once per population.
struct PopulationStrata {
  std::vector<Index> treated;
  std::vector<Index> control;

  explicit PopulationStrata(const SuperPopulation& sp) {
    treated.reserve(sp.z.size() / 2);
    control.reserve(sp.z.size() / 2);
    for (Index i = 0; i < sp.size(); ++i) {
      (sp.z[static_cast<std::size_t>(i)] ? treated : control).push_back(i);
    }
  }
};

namespace harness_detail {

/// Uniform k-subset of the stratum without replacement (Floyd's algorithm);
/// emitted in ascending population order.
inline void sample_stratum(const std::vector<Index>& stratum, Index k, Rng& rng,
                           std::vector<Index>& out) {
  const auto m = static_cast<Index>(stratum.size());
  if (k > m) {
    throw StratumExhausted("stratum of size " + std::to_string(m) + " cannot supply " +
                           std::to_string(k) + " draws");
  }
  std::set<Index> chosen;
  for (Index j = m - k; j < m; ++j) {
    const auto t = static_cast<Index>(rng.below(static_cast<uint64_t>(j) + 1));
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  for (Index i : chosen) out.push_back(stratum[static_cast<std::size_t>(i)]);
}

inline Index treated_draw_count(int n, double pz) {
  // round-half-to-even, the IEEE default rounding mode
  return static_cast<Index>(std::nearbyint(static_cast<double>(n) * pz));
}

}  // namespace harness_detail

/// Draws exactly round(n * pz) treated and the rest control, without
/// replacement within each stratum; the observed outcome is the realized
/// potential outcome of the subject's own arm.
inline Dataset stratified_subsample(const SuperPopulation& sp, const PopulationStrata& strata,
                                    int n, double pz, Rng& rng) {
  const Index n_treated = harness_detail::treated_draw_count(n, pz);
  const Index n_control = static_cast<Index>(n) - n_treated;
  if (n_treated < 1 || n_control < 1) {
    throw InvalidArgument("subsample would have an empty arm (n=" + std::to_string(n) +
                          ", pz=" + format_double(pz) + ")");
  }
  std::vector<Index> rows;
  rows.reserve(static_cast<std::size_t>(n));
  harness_detail::sample_stratum(strata.treated, n_treated, rng, rows);
  harness_detail::sample_stratum(strata.control, n_control, rng, rows);

  Dataset d;
  d.y.resize(n);
  d.z.resize(n);
  d.x.resize(n, sp.x.cols());
  for (Index i = 0; i < static_cast<Index>(n); ++i) {
    const Index r = rows[static_cast<std::size_t>(i)];
    const bool treated = sp.z[static_cast<std::size_t>(r)] != 0;
    d.z[i] = treated ? 1.0 : 0.0;
    d.y[i] = treated ? static_cast<double>(sp.y1[static_cast<std::size_t>(r)])
                     : static_cast<double>(sp.y0[static_cast<std::size_t>(r)]);
    d.x.row(i) = sp.x.row(r);
  }
  d.covariate_names.resize(static_cast<std::size_t>(sp.x.cols()));
  for (std::size_t j = 0; j < d.covariate_names.size(); ++j) {
    d.covariate_names[j] = "x" + std::to_string(j + 1);
  }
  return d;
}

inline Dataset stratified_subsample(const SuperPopulation& sp, int n, double pz, Rng& rng) {
  const PopulationStrata strata(sp);
  return stratified_subsample(sp, strata, n, pz, rng);
}

// ---------------------------------------------------------------------------
// Per-replication results and aggregation
// ---------------------------------------------------------------------------

struct RepMethodRow {
  double point = 0.0;
  double se = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;
};

struct MethodAggregate {
  std::optional<double> mean_se;
  std::optional<double> empirical_sd;
  std::optional<double> se_ratio;
  std::optional<double> coverage;
  std::optional<double> mean_width;
  std::optional<double> sd_se;
  std::optional<double> mcse_mean_se;
  int rep_failures = 0;
  double boot_failure_rate = 0.0;
};

/// Aggregates one method's per-rep rows. bench_points is the point-estimate
/// series whose spread defines the empirical SD (for augmented methods, the
/// unaugmented estimator's points). Undefined quantities are reported absent,
/// never as NaN.
inline MethodAggregate aggregate_metrics(const std::vector<RepMethodRow>& rows,
                                         const std::vector<double>& bench_points, double truth) {
  if (rows.empty()) throw TooFewReps("no successful replications to aggregate");
  MethodAggregate agg;
  std::vector<double> ses, widths;
  ses.reserve(rows.size());
  widths.reserve(rows.size());
  double covered = 0.0;
  for (const auto& r : rows) {
    ses.push_back(r.se);
    widths.push_back(r.ci_hi - r.ci_lo);
    if (r.ci_lo <= truth && truth <= r.ci_hi) covered += 1.0;
  }
  agg.mean_se = mean_of(ses);
  agg.coverage = covered / static_cast<double>(rows.size());
  agg.mean_width = mean_of(widths);
  if (bench_points.size() >= 2) {
    const double sd = sample_sd(bench_points);
    agg.empirical_sd = sd;
    if (sd > 0.0) agg.se_ratio = *agg.mean_se / sd;
  }
  if (ses.size() >= 2) {
    agg.sd_se = sample_sd(ses);
    agg.mcse_mean_se = *agg.sd_se / std::sqrt(static_cast<double>(ses.size()));
  }
  return agg;
}

struct ScenarioResult {
  Scenario scenario;
  double truth_ate = 0.0;
  double truth_ato = 0.0;
  std::vector<MethodAggregate> per_method;  // parallel to scenario.methods
  int rep_failures = 0;
  // successful reps only; outer index = method, inner = surviving rep order
  std::vector<std::vector<RepMethodRow>> rows;
  std::vector<int> row_rep_index;                       // rep id per surviving row
  std::map<std::string, std::vector<double>> raw_points;  // per estimand label
};

namespace harness_detail {

struct DistKey {
  EstimatorConfig cfg;
  ResampleStrategy strategy = ResampleStrategy::standard;
  PsMode ps_mode = PsMode::fixed;

  std::string key() const {
    std::string s = to_label(cfg.estimand);
    s += cfg.augmented ? "|aug" : "|raw";
    for (const auto& c : cfg.outcome_covariates) s += "," + c;
    s += cfg.per_arm_outcome ? "|perarm" : "|single";
    s += strategy == ResampleStrategy::standard ? "|std" : "|strat";
    s += ps_mode == PsMode::fixed ? "|fixed" : "|est";
    return s;
  }
};

inline EstimatorConfig config_of(const MethodSpec& m) {
  EstimatorConfig cfg;
  cfg.estimand = m.estimand;
  cfg.augmented = m.augmented;
  cfg.outcome_covariates = m.outcome_covariates;
  cfg.per_arm_outcome = m.per_arm_outcome;
  return cfg;
}

struct RepData {
  bool failed = false;
  std::vector<RepMethodRow> methods;
  std::vector<double> raw_point;      // per used estimand
  std::vector<long> boot_failures;    // per method
};

}  // namespace harness_detail

/// Runs all Monte Carlo replications of one scenario: subsample, fit the PS
/// model, compute every configured point estimate, SE, and CI, then aggregate.
/// A model-fit failure anywhere in a replication drops that replication for
/// all methods (counted and reported). Results are a pure function of
/// (population, scenario, master_seed), independent of num_threads.
inline ScenarioResult run_scenario(const SuperPopulation& sp, const PopulationStrata& strata,
                                   const Scenario& sc, uint64_t master_seed, int num_threads = 1,
                                   bool keep_rows = false) {
  for (const auto& m : sc.methods) validate_method(m);
  if (sc.reps < 1) throw InvalidArgument("reps must be >= 1");

  const auto [truth_ate, truth_ato] = true_estimands(sp);
  const auto n_methods = sc.methods.size();

  // Deduplicate the bootstrap plans and jackknife configurations the methods
  // need; indices into these tables are stable across worker counts.
  std::vector<harness_detail::DistKey> plans;
  std::vector<int> method_plan(n_methods, -1);
  std::vector<harness_detail::DistKey> jack_keys;
  std::vector<int> method_jack(n_methods, -1);
  std::vector<Estimand> estimands;
  std::vector<int> method_estimand(n_methods, -1);
  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    const auto& m = sc.methods[mi];
    for (std::size_t k = 0; k < estimands.size(); ++k) {
      if (estimands[k] == m.estimand) method_estimand[mi] = static_cast<int>(k);
    }
    if (method_estimand[mi] < 0) {
      estimands.push_back(m.estimand);
      method_estimand[mi] = static_cast<int>(estimands.size()) - 1;
    }
    if (is_bootstrap(m.variance)) {
      harness_detail::DistKey key;
      key.cfg = harness_detail::config_of(m);
      const BootstrapPlan proto = make_plan(m.variance, 2, 0, m.augmented);
      key.strategy = proto.strategy;
      key.ps_mode = proto.ps_mode;
      for (std::size_t k = 0; k < plans.size(); ++k) {
        if (plans[k].key() == key.key()) method_plan[mi] = static_cast<int>(k);
      }
      if (method_plan[mi] < 0) {
        plans.push_back(key);
        method_plan[mi] = static_cast<int>(plans.size()) - 1;
      }
      if (m.ci == CiMethod::bca) {
        for (std::size_t k = 0; k < jack_keys.size(); ++k) {
          if (jack_keys[k].key() == key.key()) method_jack[mi] = static_cast<int>(k);
        }
        if (method_jack[mi] < 0) {
          jack_keys.push_back(key);
          method_jack[mi] = static_cast<int>(jack_keys.size()) - 1;
        }
      }
    }
  }

  std::vector<harness_detail::RepData> reps(static_cast<std::size_t>(sc.reps));

  auto run_rep = [&](int rep) {
    auto& out = reps[static_cast<std::size_t>(rep)];
    out.methods.assign(n_methods, RepMethodRow{});
    out.boot_failures.assign(n_methods, 0);
    Rng sub_rng(derive_seed(master_seed, {stream::subsample, static_cast<uint64_t>(sc.id),
                                          static_cast<uint64_t>(rep)}));
    try {
      const Dataset d = stratified_subsample(sp, strata, sc.n, sc.pz, sub_rng);
      const Matrix dm = design_matrix(d);
      const LogisticFit ps_fit = fit_logistic(dm, d.z);
      const Vector& e_hat = ps_fit.fitted;

      std::vector<Vector> weights(estimands.size());
      std::vector<std::pair<double, double>> means(estimands.size());
      out.raw_point.resize(estimands.size());
      for (std::size_t k = 0; k < estimands.size(); ++k) {
        weights[k] = compute_weights(e_hat, d.z, scheme_for(estimands[k]));
        means[k] = hajek_means(d.y, d.z, weights[k]);
        out.raw_point[k] = means[k].first - means[k].second;
      }

      std::map<std::string, OutcomePair> outcome_models;
      auto outcome_for = [&](const EstimatorConfig& cfg) -> const OutcomePair& {
        std::string key = cfg.per_arm_outcome ? "perarm" : "single";
        for (const auto& c : cfg.outcome_covariates) key += "," + c;
        auto it = outcome_models.find(key);
        if (it == outcome_models.end()) {
          it = outcome_models
                   .emplace(key, fit_outcome_models(d, cfg.outcome_covariates, cfg.per_arm_outcome))
                   .first;
        }
        return it->second;
      };

      std::vector<BootstrapDistribution> dists(plans.size());
      for (std::size_t pi = 0; pi < plans.size(); ++pi) {
        const uint64_t seed =
            derive_seed(master_seed, {stream::bootstrap, static_cast<uint64_t>(sc.id),
                                      static_cast<uint64_t>(rep), static_cast<uint64_t>(pi)});
        BootstrapPlan plan;
        plan.B = sc.B;
        plan.seed = seed;
        plan.strategy = plans[pi].strategy;
        plan.ps_mode = plans[pi].ps_mode;
        plan.outcome_mode =
            plans[pi].cfg.augmented ? OutcomeModelMode::refit : OutcomeModelMode::none;
        dists[pi] = bootstrap_distribution(d, plan, plans[pi].cfg);
      }
      std::vector<std::vector<double>> jacks(jack_keys.size());
      for (std::size_t ji = 0; ji < jack_keys.size(); ++ji) {
        jacks[ji] = jackknife_estimates(d, jack_keys[ji].cfg, jack_keys[ji].ps_mode);
      }

      for (std::size_t mi = 0; mi < n_methods; ++mi) {
        const auto& m = sc.methods[mi];
        const auto est_idx = static_cast<std::size_t>(method_estimand[mi]);
        const WeightScheme scheme = scheme_for(m.estimand);
        double point = out.raw_point[est_idx];
        if (m.augmented) {
          point = augmented_point(d, e_hat, scheme, outcome_for(harness_detail::config_of(m)));
        }

        double se = 0.0;
        switch (m.variance) {
          case VarianceKind::fs:
            if (!m.augmented) {
              se = variance_fixed(d, e_hat, weights[est_idx], scheme).se;
            } else {
              const auto spc = build_stack(m.estimand, true, true, d, ps_fit,
                                           &outcome_for(harness_detail::config_of(m)));
              se = variance_numeric(spc).se;
            }
            break;
          case VarianceKind::ms:
            se = variance_ms_ate(d, e_hat, dm, means[est_idx].first, means[est_idx].second).se;
            break;
          case VarianceKind::pes:
            se = variance_pes_ate(d, e_hat, dm, means[est_idx].first, means[est_idx].second).se;
            break;
          case VarianceKind::ns: {
            const OutcomePair* om =
                m.augmented ? &outcome_for(harness_detail::config_of(m)) : nullptr;
            const auto spc = build_stack(m.estimand, m.augmented, false, d, ps_fit, om);
            se = variance_numeric(spc).se;
            break;
          }
          default: {
            const auto& dist = dists[static_cast<std::size_t>(method_plan[mi])];
            se = bootstrap_se(dist);
            out.boot_failures[mi] = dist.failures.total();
            break;
          }
        }

        ConfidenceInterval ci;
        switch (m.ci) {
          case CiMethod::wald:
            ci = ci_wald(point, se);
            break;
          case CiMethod::percentile:
            ci = ci_percentile(dists[static_cast<std::size_t>(method_plan[mi])]);
            break;
          case CiMethod::basic:
            ci = ci_basic(point, dists[static_cast<std::size_t>(method_plan[mi])]);
            break;
          case CiMethod::bca:
            ci = ci_bca(point, dists[static_cast<std::size_t>(method_plan[mi])],
                        jacks[static_cast<std::size_t>(method_jack[mi])]);
            break;
        }
        out.methods[mi] = RepMethodRow{point, se, ci.lower, ci.upper};
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const InvalidArgument&) {
      throw;
    } catch (const InvalidGrid&) {
      throw;
    } catch (const StratumExhausted&) {
      throw;  // the population cannot supply this scenario at all
    } catch (const Error&) {
      out.failed = true;
    }
  };

  if (num_threads <= 1) {
    for (int rep = 0; rep < sc.reps; ++rep) run_rep(rep);
  } else {
    std::atomic<int> next{0};
    auto worker = [&] {
      for (;;) {
        const int rep = next.fetch_add(1, std::memory_order_relaxed);
        if (rep >= sc.reps) return;
        run_rep(rep);
      }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < num_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ScenarioResult result;
  result.scenario = sc;
  result.truth_ate = truth_ate;
  result.truth_ato = truth_ato;
  for (const auto& rd : reps) result.rep_failures += rd.failed ? 1 : 0;
  if (result.rep_failures * 20 > sc.reps) {
    throw ExcessiveRepFailures(std::to_string(result.rep_failures) + " of " +
                               std::to_string(sc.reps) + " replications failed");
  }

  for (std::size_t k = 0; k < estimands.size(); ++k) {
    auto& series = result.raw_points[to_label(estimands[k])];
    for (const auto& rd : reps) {
      if (!rd.failed) series.push_back(rd.raw_point[k]);
    }
  }
  for (int rep = 0; rep < sc.reps; ++rep) {
    if (!reps[static_cast<std::size_t>(rep)].failed) result.row_rep_index.push_back(rep);
  }

  result.per_method.resize(n_methods);
  result.rows.resize(n_methods);
  for (std::size_t mi = 0; mi < n_methods; ++mi) {
    std::vector<RepMethodRow>& rows = result.rows[mi];
    long boot_failures = 0;
    for (const auto& rd : reps) {
      if (rd.failed) continue;
      rows.push_back(rd.methods[mi]);
      boot_failures += rd.boot_failures[mi];
    }
    const double truth = sc.methods[mi].estimand == Estimand::ate ? truth_ate : truth_ato;
    const auto& bench = result.raw_points[to_label(sc.methods[mi].estimand)];
    MethodAggregate agg = aggregate_metrics(rows, bench, truth);
    agg.rep_failures = result.rep_failures;
    if (is_bootstrap(sc.methods[mi].variance) && !rows.empty()) {
      agg.boot_failure_rate = static_cast<double>(boot_failures) /
                              (static_cast<double>(sc.B) * static_cast<double>(rows.size()));
    }
    result.per_method[mi] = agg;
  }
  if (!keep_rows) {
    result.rows.clear();
    result.row_rep_index.clear();
  }
  return result;
}

inline ScenarioResult run_scenario(const SuperPopulation& sp, const Scenario& sc,
                                   uint64_t master_seed, int num_threads = 1,
                                   bool keep_rows = false) {
  const PopulationStrata strata(sp);
  return run_scenario(sp, strata, sc, master_seed, num_threads, keep_rows);
}

}  // namespace psinfer
