#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "psinfer/bootstrap.hpp"
#include "psinfer/ci.hpp"
#include "psinfer/dataset.hpp"
#include "psinfer/errors.hpp"
#include "psinfer/harness.hpp"
#include "psinfer/sandwich.hpp"

namespace psinfer {

/// One dataset-analysis request: where the data is, which columns to use,
/// and which (estimand, variance, CI) combination to run, optionally per
/// subgroup.
struct AnalyzeRequest {
  std::string data_path;
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
  Estimand estimand = Estimand::ate;
  bool augmented = false;
  std::vector<std::string> augment_covariates;  // empty = same as covariates
  bool per_arm_outcome = false;
  VarianceKind variance = VarianceKind::ns;
  CiMethod ci = CiMethod::wald;
  int B = 1000;
  uint64_t seed = 0;
  std::optional<std::string> subgroup;
  double level = 0.95;
  int threads = 1;
};

struct EstimateReport {
  std::string group;
  Index n_treated = 0;
  Index n_control = 0;
  std::optional<double> point;
  std::optional<double> se;
  std::optional<double> ci_lo;
  std::optional<double> ci_hi;
  std::optional<double> p_value;  // Wald only
  int fit_iterations = 0;
  int boot_failures = 0;
  std::string error;  // empty on success
};

namespace analyze_detail {

inline bool contains(const std::vector<std::string>& names, const std::string& name) {
  for (const auto& n : names) {
    if (n == name) return true;
  }
  return false;
}

/// The PS covariates for one (sub)group: the requested list restricted to
/// columns the group still carries (a subgroup drops its split column); an
/// empty request means all of the group's covariates.
inline std::vector<std::string> ps_covariates(const AnalyzeRequest& req, const Dataset& d) {
  if (req.covariates.empty()) return d.covariate_names;
  std::vector<std::string> out;
  for (const auto& c : req.covariates) {
    if (contains(d.covariate_names, c)) out.push_back(c);
  }
  return out;
}

inline MethodSpec method_of(const AnalyzeRequest& req, const std::vector<std::string>& ps_covs) {
  MethodSpec m;
  m.estimand = req.estimand;
  m.augmented = req.augmented;
  if (req.augmented) {
    if (req.augment_covariates.empty()) {
      m.outcome_covariates = ps_covs;
    } else {
      for (const auto& c : req.augment_covariates) {
        if (!contains(ps_covs, c)) {
          // a split column disappears from its subgroups; anything else is a typo
          if (req.subgroup && c == *req.subgroup) continue;
          throw ConfigError("outcome-model covariate '" + c + "' is not a PS covariate");
        }
        m.outcome_covariates.push_back(c);
      }
    }
  }
  m.per_arm_outcome = req.per_arm_outcome;
  m.variance = req.variance;
  m.ci = req.ci;
  return m;
}

}  // namespace analyze_detail

/// Runs the configured estimate on one (sub)group. group_seed_id keeps the
/// bootstrap streams of different subgroups independent.
inline EstimateReport analyze_group(const Dataset& d_full, const AnalyzeRequest& req,
                                    const std::string& group_label, uint64_t group_seed_id) {
  EstimateReport report;
  report.group = group_label;
  report.n_treated = d_full.treated_count();
  report.n_control = d_full.control_count();
  try {
    const auto ps_covs = analyze_detail::ps_covariates(req, d_full);
    const Dataset d = select_covariates(d_full, ps_covs);
    const MethodSpec m = analyze_detail::method_of(req, ps_covs);
    validate_method(m);
    const WeightScheme scheme = scheme_for(m.estimand);

    const Matrix dm = design_matrix(d);
    const LogisticFit ps_fit = fit_logistic(dm, d.z);
    report.fit_iterations = ps_fit.iterations;
    const Vector& e_hat = ps_fit.fitted;
    const Vector w = compute_weights(e_hat, d.z, scheme);
    const auto [mu1, mu0] = hajek_means(d.y, d.z, w);

    OutcomePair om;
    if (m.augmented) om = fit_outcome_models(d, m.outcome_covariates, m.per_arm_outcome);
    const double point =
        m.augmented ? augmented_point(d, e_hat, scheme, om) : mu1 - mu0;
    report.point = point;

    EstimatorConfig cfg = harness_detail::config_of(m);
    std::optional<BootstrapDistribution> dist;
    double se = 0.0;
    if (is_bootstrap(m.variance)) {
      BootstrapPlan plan =
          make_plan(m.variance, req.B, derive_seed(req.seed, {stream::bootstrap, group_seed_id}),
                    m.augmented);
      dist = bootstrap_distribution(d, plan, cfg, req.threads);
      report.boot_failures = dist->failures.total();
      se = bootstrap_se(*dist);
    } else {
      switch (m.variance) {
        case VarianceKind::fs:
          if (!m.augmented) {
            se = variance_fixed(d, e_hat, w, scheme).se;
          } else {
            se = variance_numeric(build_stack(m.estimand, true, true, d, ps_fit, &om)).se;
          }
          break;
        case VarianceKind::ms:
          se = variance_ms_ate(d, e_hat, dm, mu1, mu0).se;
          break;
        case VarianceKind::pes:
          se = variance_pes_ate(d, e_hat, dm, mu1, mu0).se;
          break;
        default: {
          const OutcomePair* omp = m.augmented ? &om : nullptr;
          se = variance_numeric(build_stack(m.estimand, m.augmented, false, d, ps_fit, omp)).se;
          break;
        }
      }
    }
    report.se = se;

    ConfidenceInterval ci;
    switch (m.ci) {
      case CiMethod::wald:
        ci = ci_wald(point, se, req.level);
        report.p_value = ci.p_value;
        break;
      case CiMethod::percentile:
        ci = ci_percentile(*dist, req.level);
        break;
      case CiMethod::basic:
        ci = ci_basic(point, *dist, req.level);
        break;
      case CiMethod::bca: {
        const BootstrapPlan proto = make_plan(m.variance, req.B, 0, m.augmented);
        const auto jack = jackknife_estimates(d, cfg, proto.ps_mode, proto.outcome_mode);
        ci = ci_bca(point, *dist, jack, req.level);
        break;
      }
    }
    report.ci_lo = ci.lower;
    report.ci_hi = ci.upper;
  } catch (const Error& e) {
    report.error = e.what();
  }
  return report;
}

/// The analyze command body: loads the dataset, produces the overall row and,
/// when a subgroup column is given, one row per level. The subgroup column is
/// loaded even when it is not a PS covariate; every fit uses the requested
/// covariates only. A failing subgroup reports its error in its own row
/// without disturbing the others.
inline std::vector<EstimateReport> analyze_command(const AnalyzeRequest& req) {
  std::vector<std::string> load_cols = req.covariates;
  if (req.subgroup && !analyze_detail::contains(load_cols, *req.subgroup)) {
    load_cols.push_back(*req.subgroup);
  }
  const Dataset d = load_csv(req.data_path, req.outcome, req.treatment, load_cols);
  std::vector<EstimateReport> rows;
  rows.push_back(analyze_group(d, req, "all", 0));
  if (req.subgroup) {
    const auto groups = subgroup_split(d, *req.subgroup);
    uint64_t seed_id = 1;
    for (const auto& [label, sub] : groups) {
      rows.push_back(analyze_group(sub, req, label, seed_id++));
    }
  }
  return rows;
}

namespace analyze_detail {

inline std::string opt_field(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string{};
}

}  // namespace analyze_detail

inline void write_report_csv(const std::vector<EstimateReport>& rows, std::ostream& out) {
  out << "group,n_treated,n_control,point,se,ci_lo,ci_hi,p_value,fit_iterations,boot_failures,"
         "error\n";
  for (const auto& r : rows) {
    using analyze_detail::opt_field;
    out << r.group << ',' << r.n_treated << ',' << r.n_control << ',' << opt_field(r.point) << ','
        << opt_field(r.se) << ',' << opt_field(r.ci_lo) << ',' << opt_field(r.ci_hi) << ','
        << opt_field(r.p_value) << ',' << r.fit_iterations << ',' << r.boot_failures << ','
        << r.error << '\n';
  }
}

/// Same fields as the CSV, one JSON object per row.
inline void write_report_json(const std::vector<EstimateReport>& rows, std::ostream& out) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j;
    j["group"] = r.group;
    j["n_treated"] = r.n_treated;
    j["n_control"] = r.n_control;
    auto put = [&](const char* key, const std::optional<double>& v) {
      if (v) {
        j[key] = *v;
      } else {
        j[key] = nullptr;
      }
    };
    put("point", r.point);
    put("se", r.se);
    put("ci_lo", r.ci_lo);
    put("ci_hi", r.ci_hi);
    put("p_value", r.p_value);
    j["fit_iterations"] = r.fit_iterations;
    j["boot_failures"] = r.boot_failures;
    j["error"] = r.error;
    arr.push_back(std::move(j));
  }
  out << arr.dump(2) << '\n';
}

}  // namespace psinfer
