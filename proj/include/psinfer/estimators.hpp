#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "psinfer/dataset.hpp"
#include "psinfer/errors.hpp"
#include "psinfer/glm.hpp"

namespace psinfer {

enum class Estimand { ate, ato };

/// Balancing-weight family: the tilting function omega(e) selects the target
/// population. IPTW (omega = 1) targets the whole population; overlap weights
/// (omega = e(1-e)) target the population with greatest equipoise.
enum class WeightScheme { iptw, overlap };

inline WeightScheme scheme_for(Estimand estimand) {
  return estimand == Estimand::ate ? WeightScheme::iptw : WeightScheme::overlap;
}

inline double tilt(WeightScheme scheme, double e) {
  return scheme == WeightScheme::iptw ? 1.0 : e * (1.0 - e);
}

/// W_i = omega(e_i) / (Z_i e_i + (1 - Z_i)(1 - e_i)). Under overlap weights
/// this reduces to 1 - e_i for treated and e_i for controls.
inline Vector compute_weights(const Vector& e_hat, const Vector& z, WeightScheme scheme) {
  if (e_hat.size() != z.size()) throw DimensionMismatch("e_hat length != z length");
  Vector w(e_hat.size());
  for (Index i = 0; i < e_hat.size(); ++i) {
    const double e = e_hat[i];
    if (!(e > 0.0 && e < 1.0)) {
      throw DegeneratePropensity("propensity " + format_double(e) + " outside (0, 1) at row " +
                                 std::to_string(i));
    }
    const double denom = z[i] == 1.0 ? e : 1.0 - e;
    w[i] = tilt(scheme, e) / denom;
  }
  return w;
}

/// Hajek weighted means of y within each arm: (mu1, mu0).
inline std::pair<double, double> hajek_means(const Vector& y, const Vector& z, const Vector& w) {
  double s1 = 0.0, s0 = 0.0, t1 = 0.0, t0 = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    if (z[i] == 1.0) {
      s1 += w[i];
      t1 += w[i] * y[i];
    } else {
      s0 += w[i];
      t0 += w[i] * y[i];
    }
  }
  if (s1 <= 0.0 || s0 <= 0.0) throw EmptyArm("an arm has no weight");
  return {t1 / s1, t0 / s0};
}

/// Weighted average treatment effect (risk difference): the ratio-of-sums
/// estimator, treated mean minus control mean.
inline double wate_point(const Vector& y, const Vector& z, const Vector& w) {
  const auto [mu1, mu0] = hajek_means(y, z, w);
  return mu1 - mu0;
}

/// Predicted event probabilities under treatment (m1) and control (m0) for
/// every subject, from a logistic outcome model.
struct OutcomePair {
  Vector m1;
  Vector m0;
  std::vector<std::string> covariates;
  bool per_arm = false;
  LogisticFit fit;                       // Y on (1, Z, X); valid when !per_arm
  std::optional<LogisticFit> fit_treated;  // per-arm variant
  std::optional<LogisticFit> fit_control;
};

/// Fits the outcome model. Default is one logistic regression of Y on
/// (Z, covariates) with Z as a main effect; m1/m0 come from predicting with Z
/// forced to 1/0. Per-arm fitting (separate models within each arm) is
/// available behind the flag.
inline OutcomePair fit_outcome_models(const Dataset& d, const std::vector<std::string>& covariates,
                                      bool per_arm = false) {
  OutcomePair om;
  om.covariates = covariates;
  om.per_arm = per_arm;
  if (!per_arm) {
    Matrix dm(d.n(), static_cast<Index>(covariates.size()) + 2);
    dm.col(0).setOnes();
    dm.col(1) = d.z;
    for (std::size_t j = 0; j < covariates.size(); ++j) {
      dm.col(static_cast<Index>(j) + 2) = d.x.col(d.covariate_index(covariates[j]));
    }
    om.fit = fit_logistic(dm, d.y);
    Matrix dm1 = dm;
    dm1.col(1).setOnes();
    Matrix dm0 = dm;
    dm0.col(1).setZero();
    om.m1 = predict_probs(om.fit, dm1);
    om.m0 = predict_probs(om.fit, dm0);
    return om;
  }

  const Index n1 = d.treated_count();
  const Index n0 = d.n() - n1;
  if (n1 == 0 || n0 == 0) throw EmptyArm("per-arm outcome model needs both arms");
  Matrix full = design_matrix(d, covariates);
  Matrix dm1(n1, full.cols()), dm0(n0, full.cols());
  Vector y1(n1), y0(n0);
  Index i1 = 0, i0 = 0;
  for (Index i = 0; i < d.n(); ++i) {
    if (d.z[i] == 1.0) {
      dm1.row(i1) = full.row(i);
      y1[i1++] = d.y[i];
    } else {
      dm0.row(i0) = full.row(i);
      y0[i0++] = d.y[i];
    }
  }
  om.fit_treated = fit_logistic(dm1, y1);
  om.fit_control = fit_logistic(dm0, y0);
  om.m1 = predict_probs(*om.fit_treated, full);
  om.m0 = predict_probs(*om.fit_control, full);
  return om;
}

/// Outcome-model-augmented weighted estimator: the omega-weighted mean of
/// (m1 - m0) plus Hajek-weighted residual terms for each arm.
inline double augmented_point(const Vector& y, const Vector& z, const Vector& e_hat,
                              WeightScheme scheme, const Vector& m1, const Vector& m0) {
  const Vector w = compute_weights(e_hat, z, scheme);
  double omega_sum = 0.0, omega_diff = 0.0;
  double s1 = 0.0, s0 = 0.0, r1 = 0.0, r0 = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double omega = tilt(scheme, e_hat[i]);
    omega_sum += omega;
    omega_diff += omega * (m1[i] - m0[i]);
    if (z[i] == 1.0) {
      s1 += w[i];
      r1 += w[i] * (y[i] - m1[i]);
    } else {
      s0 += w[i];
      r0 += w[i] * (y[i] - m0[i]);
    }
  }
  if (s1 <= 0.0 || s0 <= 0.0) throw EmptyArm("an arm has no weight");
  return omega_diff / omega_sum + r1 / s1 - r0 / s0;
}

inline double augmented_point(const Dataset& d, const Vector& e_hat, WeightScheme scheme,
                              const OutcomePair& om) {
  return augmented_point(d.y, d.z, e_hat, scheme, om.m1, om.m0);
}

}  // namespace psinfer
