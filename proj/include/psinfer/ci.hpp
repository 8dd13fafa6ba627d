#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "psinfer/bootstrap.hpp"
#include "psinfer/errors.hpp"
#include "psinfer/math.hpp"

namespace psinfer {

enum class CiMethod { wald, percentile, basic, bca };

struct ConfidenceInterval {
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
  CiMethod method = CiMethod::wald;
  std::optional<double> p_value;  // Wald only
};

namespace ci_detail {

/// Fewest bootstrap replicates for which the outer quantiles are estimable:
/// 40 at the default 0.95 level.
inline std::size_t min_replicates(double level) {
  return static_cast<std::size_t>(std::ceil(2.0 / (1.0 - level)));
}

inline std::vector<double> sorted_estimates(const BootstrapDistribution& dist, double level) {
  if (dist.estimates.size() < min_replicates(level)) {
    throw TooFewReplicates("need at least " + std::to_string(min_replicates(level)) +
                           " replicates for level " + format_double(level));
  }
  std::vector<double> sorted = dist.estimates;
  std::sort(sorted.begin(), sorted.end());
  return sorted;
}

inline void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidArgument("confidence level outside (0, 1)");
}

}  // namespace ci_detail

/// point +/- z * se, with a two-sided normal p-value against delta = 0.
inline ConfidenceInterval ci_wald(double point, double se, double level = 0.95) {
  ci_detail::check_level(level);
  if (se < 0.0) throw NegativeSE("negative standard error");
  const double zq = normal_quantile(0.5 * (1.0 + level));
  ConfidenceInterval ci;
  ci.lower = point - zq * se;
  ci.upper = point + zq * se;
  ci.level = level;
  ci.method = CiMethod::wald;
  ci.p_value = se > 0.0 ? normal_two_sided_p(point / se) : (point == 0.0 ? 1.0 : 0.0);
  return ci;
}

/// Empirical quantiles of the bootstrap estimates under the library quantile
/// rule (linear interpolation at 1 + (B - 1) p).
inline ConfidenceInterval ci_percentile(const BootstrapDistribution& dist, double level = 0.95) {
  ci_detail::check_level(level);
  const auto sorted = ci_detail::sorted_estimates(dist, level);
  ConfidenceInterval ci;
  ci.lower = quantile_sorted(sorted, 0.5 * (1.0 - level));
  ci.upper = quantile_sorted(sorted, 0.5 * (1.0 + level));
  ci.level = level;
  ci.method = CiMethod::percentile;
  return ci;
}

/// Point reflection of the percentile interval: (2p - Q_hi, 2p - Q_lo).
inline ConfidenceInterval ci_basic(double point, const BootstrapDistribution& dist,
                                   double level = 0.95) {
  const ConfidenceInterval pct = ci_percentile(dist, level);
  ConfidenceInterval ci;
  ci.lower = 2.0 * point - pct.upper;
  ci.upper = 2.0 * point - pct.lower;
  ci.level = level;
  ci.method = CiMethod::basic;
  return ci;
}

/// The BCa quantile-level map: alpha_adj = Phi(z0 + (z0 + z_alpha)/(1 - a (z0 + z_alpha))).
inline std::pair<double, double> bca_adjusted_levels(double z0, double accel, double level) {
  ci_detail::check_level(level);
  const double zlo = normal_quantile(0.5 * (1.0 - level));
  const double zhi = normal_quantile(0.5 * (1.0 + level));
  const double qlo = z0 + zlo;
  const double qhi = z0 + zhi;
  return {normal_cdf(z0 + qlo / (1.0 - accel * qlo)), normal_cdf(z0 + qhi / (1.0 - accel * qhi))};
}

/// Bias-corrected and accelerated interval. z0 comes from the proportion of
/// replicates below the point estimate (ties count half, proportion clamped
/// to [1/(B+1), B/(B+1)]); the acceleration from the jackknife skewness. A
/// constant jackknife vector degenerates to a = 0.
inline ConfidenceInterval ci_bca(double point, const BootstrapDistribution& dist,
                                 const std::vector<double>& jackknife, double level = 0.95) {
  ci_detail::check_level(level);
  const auto sorted = ci_detail::sorted_estimates(dist, level);
  const auto m = static_cast<double>(sorted.size());

  double below = 0.0;
  for (double est : sorted) {
    if (est < point) {
      below += 1.0;
    } else if (est == point) {
      below += 0.5;
    }
  }
  const double prop = std::clamp(below / m, 1.0 / (m + 1.0), m / (m + 1.0));
  const double z0 = normal_quantile(prop);

  double accel = 0.0;
  if (jackknife.size() >= 2) {
    const double jbar = mean_of(jackknife);
    double sum2 = 0.0, sum3 = 0.0;
    for (double t : jackknife) {
      const double dlt = jbar - t;
      sum2 += dlt * dlt;
      sum3 += dlt * dlt * dlt;
    }
    if (sum2 > 0.0) accel = sum3 / (6.0 * std::pow(sum2, 1.5));
  }

  const auto [alpha1, alpha2] = bca_adjusted_levels(z0, accel, level);
  ConfidenceInterval ci;
  ci.lower = quantile_sorted(sorted, alpha1);
  ci.upper = quantile_sorted(sorted, alpha2);
  ci.level = level;
  ci.method = CiMethod::bca;
  return ci;
}

}  // namespace psinfer
