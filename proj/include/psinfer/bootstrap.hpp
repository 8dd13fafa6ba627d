#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "psinfer/dataset.hpp"
#include "psinfer/errors.hpp"
#include "psinfer/estimators.hpp"
#include "psinfer/glm.hpp"
#include "psinfer/math.hpp"
#include "psinfer/rng.hpp"

namespace psinfer {

enum class ResampleStrategy { standard, stratified };
enum class PsMode { fixed, reestimated };
enum class OutcomeModelMode { none, refit };

/// One of the four bootstrap procedures: {standard, stratified} resampling
/// crossed with {fixed, re-estimated} PS. The outcome-model mode only matters
/// for augmented estimators.
struct BootstrapPlan {
  int B = 1000;
  ResampleStrategy strategy = ResampleStrategy::standard;
  PsMode ps_mode = PsMode::reestimated;
  OutcomeModelMode outcome_mode = OutcomeModelMode::refit;
  uint64_t seed = 0;
};

/// Which point estimator the bootstrap (or jackknife) replicates.
struct EstimatorConfig {
  Estimand estimand = Estimand::ate;
  bool augmented = false;
  std::vector<std::string> outcome_covariates;
  bool per_arm_outcome = false;
};

struct FailureTally {
  int quasi_separation = 0;
  int empty_arm = 0;
  int singular_information = 0;
  int no_variation = 0;
  int degenerate_propensity = 0;

  int total() const {
    return quasi_separation + empty_arm + singular_information + no_variation +
           degenerate_propensity;
  }
};

/// Successful replicate estimates in replicate-index order, plus a tally of
/// dropped replicates by failure reason.
struct BootstrapDistribution {
  std::vector<double> estimates;
  FailureTally failures;
  int B_requested = 0;
  long ps_fit_count = 0;  // fits of the PS model performed, initial fit included
};

/// Standard: n draws with replacement from all rows. Stratified: the original
/// treated and control counts are each redrawn within their own stratum, so
/// every replicate preserves the arm sizes exactly.
inline std::vector<Index> resample_indices(Index n, const Vector& z, ResampleStrategy strategy,
                                           Rng& rng) {
  std::vector<Index> idx;
  idx.reserve(static_cast<std::size_t>(n));
  if (strategy == ResampleStrategy::standard) {
    for (Index i = 0; i < n; ++i) {
      idx.push_back(static_cast<Index>(rng.below(static_cast<uint64_t>(n))));
    }
    return idx;
  }
  std::vector<Index> treated, control;
  for (Index i = 0; i < n; ++i) {
    (z[i] == 1.0 ? treated : control).push_back(i);
  }
  if (treated.empty() || control.empty()) {
    throw EmptyArm("stratified resampling needs both arms");
  }
  for (std::size_t k = 0; k < treated.size(); ++k) {
    idx.push_back(treated[rng.below(treated.size())]);
  }
  for (std::size_t k = 0; k < control.size(); ++k) {
    idx.push_back(control[rng.below(control.size())]);
  }
  return idx;
}

namespace boot_detail {

enum class FitFailure { quasi_separation, empty_arm, singular, no_variation, degenerate };

inline void record(FailureTally& tally, FitFailure f) {
  switch (f) {
    case FitFailure::quasi_separation: ++tally.quasi_separation; break;
    case FitFailure::empty_arm: ++tally.empty_arm; break;
    case FitFailure::singular: ++tally.singular_information; break;
    case FitFailure::no_variation: ++tally.no_variation; break;
    case FitFailure::degenerate: ++tally.degenerate_propensity; break;
  }
}

/// Runs one replicate; on a recognized fit failure returns the reason instead.
template <typename Fn>
std::optional<FitFailure> guarded(Fn&& fn) {
  try {
    fn();
    return std::nullopt;
  } catch (const QuasiSeparation&) {
    return FitFailure::quasi_separation;
  } catch (const EmptyArm&) {
    return FitFailure::empty_arm;
  } catch (const SingularInformation&) {
    return FitFailure::singular;
  } catch (const NoVariation&) {
    return FitFailure::no_variation;
  } catch (const DegeneratePropensity&) {
    return FitFailure::degenerate;
  }
}

}  // namespace boot_detail

/// Runs the bootstrap: per replicate, resample; re-estimate the PS (and
/// outcome model, when configured) or carry each subject's original fitted
/// propensity; compute the point estimate. Replicates whose model fits fail
/// are dropped and tallied; more than 10% failures is an error.
///
/// The estimates vector is fully determined by (data, plan) and independent
/// of num_threads: replicate b always uses the stream derived from
/// (plan.seed, stream::replicate, b).
inline BootstrapDistribution bootstrap_distribution(const Dataset& d, const BootstrapPlan& plan,
                                                    const EstimatorConfig& cfg,
                                                    int num_threads = 1) {
  if (plan.B < 2) throw InvalidArgument("bootstrap needs B >= 2");
  const Index n = d.n();
  const WeightScheme scheme = scheme_for(cfg.estimand);

  std::atomic<long> ps_fits{0};
  Vector e_original;
  if (plan.ps_mode == PsMode::fixed) {
    const LogisticFit fit = fit_logistic(design_matrix(d), d.z);
    ps_fits.fetch_add(1, std::memory_order_relaxed);
    e_original = fit.fitted;
  }
  OutcomePair om_original;
  const bool carry_outcome = cfg.augmented && plan.outcome_mode == OutcomeModelMode::none;
  if (carry_outcome) {
    om_original = fit_outcome_models(d, cfg.outcome_covariates, cfg.per_arm_outcome);
  }

  std::vector<std::optional<double>> results(static_cast<std::size_t>(plan.B));
  std::vector<boot_detail::FitFailure> reasons(static_cast<std::size_t>(plan.B),
                                               boot_detail::FitFailure::quasi_separation);

  auto run_replicate = [&](int b) {
    Rng rng(derive_seed(plan.seed, {stream::replicate, static_cast<uint64_t>(b)}));
    const auto idx = resample_indices(n, d.z, plan.strategy, rng);
    double estimate = 0.0;
    const Dataset db = select_rows(d, idx);
    Vector e_b;
    if (plan.ps_mode == PsMode::fixed) {
      e_b.resize(n);
      for (Index i = 0; i < n; ++i) e_b[i] = e_original[idx[static_cast<std::size_t>(i)]];
    } else {
      const LogisticFit fit = fit_logistic(design_matrix(db), db.z);
      ps_fits.fetch_add(1, std::memory_order_relaxed);
      e_b = fit.fitted;
    }
    if (!cfg.augmented) {
      estimate = wate_point(db.y, db.z, compute_weights(e_b, db.z, scheme));
    } else if (carry_outcome) {
      Vector m1(n), m0(n);
      for (Index i = 0; i < n; ++i) {
        m1[i] = om_original.m1[idx[static_cast<std::size_t>(i)]];
        m0[i] = om_original.m0[idx[static_cast<std::size_t>(i)]];
      }
      estimate = augmented_point(db.y, db.z, e_b, scheme, m1, m0);
    } else {
      const OutcomePair om_b = fit_outcome_models(db, cfg.outcome_covariates, cfg.per_arm_outcome);
      estimate = augmented_point(db, e_b, scheme, om_b);
    }
    results[static_cast<std::size_t>(b)] = estimate;
  };

  auto worker_body = [&](std::atomic<int>& next) {
    for (;;) {
      const int b = next.fetch_add(1, std::memory_order_relaxed);
      if (b >= plan.B) return;
      const auto failure = boot_detail::guarded([&] { run_replicate(b); });
      if (failure) reasons[static_cast<std::size_t>(b)] = *failure;
    }
  };

  if (num_threads <= 1) {
    std::atomic<int> next{0};
    worker_body(next);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(num_threads));
    for (int t = 0; t < num_threads; ++t) pool.emplace_back([&] { worker_body(next); });
    for (auto& th : pool) th.join();
  }

  BootstrapDistribution dist;
  dist.B_requested = plan.B;
  dist.ps_fit_count = ps_fits.load();
  dist.estimates.reserve(static_cast<std::size_t>(plan.B));
  for (int b = 0; b < plan.B; ++b) {
    if (results[static_cast<std::size_t>(b)]) {
      dist.estimates.push_back(*results[static_cast<std::size_t>(b)]);
    } else {
      boot_detail::record(dist.failures, reasons[static_cast<std::size_t>(b)]);
    }
  }
  if (dist.failures.total() > plan.B / 10) {
    throw ExcessiveFailures(std::to_string(dist.failures.total()) + " of " +
                            std::to_string(plan.B) + " bootstrap replicates failed");
  }
  return dist;
}

/// Sample standard deviation of the replicate estimates (denominator B - 1).
inline double bootstrap_se(const BootstrapDistribution& dist) {
  if (dist.estimates.size() < 2) {
    throw TooFewReplicates("bootstrap SE needs at least 2 successful replicates");
  }
  return sample_sd(dist.estimates);
}

/// Leave-one-out point estimates on the original sample, with the same PS and
/// outcome-model handling as the bootstrap they accompany. Fit failures
/// propagate.
inline std::vector<double> jackknife_estimates(const Dataset& d, const EstimatorConfig& cfg,
                                               PsMode ps_mode,
                                               OutcomeModelMode outcome_mode = OutcomeModelMode::refit) {
  const Index n = d.n();
  const WeightScheme scheme = scheme_for(cfg.estimand);
  Vector e_original;
  OutcomePair om_original;
  const bool carry_outcome = cfg.augmented && outcome_mode == OutcomeModelMode::none;
  if (ps_mode == PsMode::fixed) {
    e_original = fit_logistic(design_matrix(d), d.z).fitted;
  }
  if (carry_outcome) {
    om_original = fit_outcome_models(d, cfg.outcome_covariates, cfg.per_arm_outcome);
  }

  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  std::vector<Index> rows(static_cast<std::size_t>(n) - 1);
  for (Index drop = 0; drop < n; ++drop) {
    std::size_t k = 0;
    for (Index i = 0; i < n; ++i) {
      if (i != drop) rows[k++] = i;
    }
    const Dataset loo = select_rows(d, rows);
    Vector e_loo;
    if (ps_mode == PsMode::fixed) {
      e_loo.resize(n - 1);
      for (Index i = 0; i < n - 1; ++i) e_loo[i] = e_original[rows[static_cast<std::size_t>(i)]];
    } else {
      e_loo = fit_logistic(design_matrix(loo), loo.z).fitted;
    }
    if (!cfg.augmented) {
      out.push_back(wate_point(loo.y, loo.z, compute_weights(e_loo, loo.z, scheme)));
    } else if (carry_outcome) {
      Vector m1(n - 1), m0(n - 1);
      for (Index i = 0; i < n - 1; ++i) {
        m1[i] = om_original.m1[rows[static_cast<std::size_t>(i)]];
        m0[i] = om_original.m0[rows[static_cast<std::size_t>(i)]];
      }
      out.push_back(augmented_point(loo.y, loo.z, e_loo, scheme, m1, m0));
    } else {
      const OutcomePair om = fit_outcome_models(loo, cfg.outcome_covariates, cfg.per_arm_outcome);
      out.push_back(augmented_point(loo, e_loo, scheme, om));
    }
  }
  return out;
}

}  // namespace psinfer
