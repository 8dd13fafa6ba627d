#include <doctest.h>

#include <numeric>
#include <vector>

#include "psinfer/sandwich.hpp"
#include "test_support.hpp"

using namespace psinfer;

namespace {

struct Fitted {
  Dataset d;
  Matrix dm;
  LogisticFit fit;
  double mu1 = 0.0, mu0 = 0.0;
};

Fitted fitted_dataset(uint64_t seed, int n, int p) {
  Fitted f;
  f.d = testsupport::random_estimable_dataset(seed, n, p);
  f.dm = design_matrix(f.d);
  f.fit = fit_logistic(f.dm, f.d.z);
  const Vector w = compute_weights(f.fit.fitted, f.d.z, WeightScheme::iptw);
  const auto means = hajek_means(f.d.y, f.d.z, w);
  f.mu1 = means.first;
  f.mu0 = means.second;
  return f;
}

}  // namespace

TEST_SUITE("sandwich") {

TEST_CASE("constant outcome gives zero variance everywhere") {
  Fitted f = fitted_dataset(3, 60, 2);
  f.d.y.setConstant(1.0);
  f.mu1 = f.mu0 = 1.0;
  CHECK(variance_ms_ate(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0).sigma == doctest::Approx(0.0));
  CHECK(variance_pes_ate(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0).sigma == doctest::Approx(0.0));
  const Vector w = compute_weights(f.fit.fitted, f.d.z, WeightScheme::iptw);
  CHECK(variance_fixed(f.d, f.fit.fitted, w, WeightScheme::iptw).sigma == doctest::Approx(0.0));
  CHECK(appendix_oracle_pes(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0).sigma == doctest::Approx(0.0));
}

TEST_CASE("PES equals the block-matrix oracle; MS equals the identity-block oracle") {
  for (uint64_t seed = 1; seed <= 20; ++seed) {
    const Fitted f = fitted_dataset(seed, 50 + static_cast<int>(seed * 7) % 150, 5);
    const auto pes = variance_pes_ate(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0);
    const auto oracle = appendix_oracle_pes(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0);
    CHECK(testsupport::relative_diff(pes.sigma, oracle.sigma) < 1e-10);

    const auto ms = variance_ms_ate(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0);
    const auto oracle_id =
        appendix_oracle_pes(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0, BreadMuBlock::identity);
    CHECK(testsupport::relative_diff(ms.sigma, oracle_id.sigma) < 1e-10);
    CHECK(pes.sigma >= 0.0);
    CHECK(ms.sigma >= 0.0);
    CHECK(pes.se == doctest::Approx(std::sqrt(pes.variance)).epsilon(1e-15));
  }
}

TEST_CASE("fixed-PS variance: two-point hand example") {
  // intercept-only PS, treated outcomes (1,0), control outcomes (1,0)
  Dataset d;
  d.y.resize(4);
  d.z.resize(4);
  d.y << 1, 0, 1, 0;
  d.z << 1, 1, 0, 0;
  d.x.resize(4, 0);
  const Matrix dm = design_matrix(d);
  const LogisticFit fit = fit_logistic(dm, d.z);
  const Vector w = compute_weights(fit.fitted, d.z, WeightScheme::iptw);
  const auto v = variance_fixed(d, fit.fitted, w, WeightScheme::iptw);
  CHECK(v.sigma == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(v.se == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("fixed-PS variance reduces to the two-sample binomial variance") {
  Rng rng(2024);
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 20 + static_cast<int>(rng.below(80));
    Dataset d;
    d.y.resize(n);
    d.z.resize(n);
    d.x.resize(n, 0);
    int n1 = 0;
    double s1 = 0.0, s0 = 0.0;
    do {
      n1 = 0;
      s1 = s0 = 0.0;
      for (int i = 0; i < n; ++i) {
        d.z[i] = rng.bernoulli(0.4) ? 1.0 : 0.0;
        d.y[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;
        if (d.z[i] == 1.0) {
          ++n1;
          s1 += d.y[i];
        } else {
          s0 += d.y[i];
        }
      }
    } while (n1 < 2 || n1 > n - 2);
    const int n0 = n - n1;
    const double p1 = s1 / n1, p0 = s0 / n0;

    const LogisticFit fit = fit_logistic(design_matrix(d), d.z);
    const Vector w = compute_weights(fit.fitted, d.z, WeightScheme::iptw);
    const auto v = variance_fixed(d, fit.fitted, w, WeightScheme::iptw);
    const double expected = p1 * (1.0 - p1) / n1 + p0 * (1.0 - p0) / n0;
    CHECK(testsupport::relative_diff(v.variance, expected) < 1e-12);
  }
}

TEST_CASE("stacked estimating equations are solved at theta_hat") {
  const Fitted f = fitted_dataset(11, 80, 3);

  SUBCASE("plain ATE stack") {
    const StackSpec spec = build_stack(Estimand::ate, false, false, f.d, f.fit);
    const Vector g = spec.mean_psi(spec.theta) * static_cast<double>(spec.n);
    CHECK(g.cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("ATO stack at the overlap point estimate") {
    const StackSpec spec = build_stack(Estimand::ato, false, false, f.d, f.fit);
    // delta solved independently through the estimator path
    const Vector w = compute_weights(f.fit.fitted, f.d.z, WeightScheme::overlap);
    const double delta = wate_point(f.d.y, f.d.z, w);
    CHECK(spec.theta[spec.delta_index] == doctest::Approx(delta).epsilon(1e-12));
    const Vector g = spec.mean_psi(spec.theta) * static_cast<double>(spec.n);
    CHECK(g.cwiseAbs().maxCoeff() < 1e-6);
  }
  SUBCASE("augmented stack includes the outcome-model score rows") {
    const OutcomePair om = fit_outcome_models(f.d, f.d.covariate_names);
    const StackSpec spec = build_stack(Estimand::ate, true, false, f.d, f.fit, &om);
    const Vector g = spec.mean_psi(spec.theta) * static_cast<double>(spec.n);
    CHECK(g.cwiseAbs().maxCoeff() < 1e-6);
    CHECK(spec.theta[spec.delta_index] ==
          doctest::Approx(augmented_point(f.d, f.fit.fitted, WeightScheme::iptw, om))
              .epsilon(1e-12));
  }
}

TEST_CASE("numeric sandwich agrees with the analytic estimators") {
  for (uint64_t seed : {5u, 6u, 7u, 8u, 9u, 10u}) {
    const Fitted f = fitted_dataset(seed, 100, 3);

    const StackSpec spec = build_stack(Estimand::ate, false, false, f.d, f.fit);
    const auto ns = variance_numeric(spec);
    const auto pes = variance_pes_ate(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0);
    CHECK(testsupport::relative_diff(ns.sigma, pes.sigma) < 1e-4);

    const StackSpec masked = build_stack(Estimand::ate, false, true, f.d, f.fit);
    const auto ns_fixed = variance_numeric(masked);
    const Vector w = compute_weights(f.fit.fitted, f.d.z, WeightScheme::iptw);
    const auto fs = variance_fixed(f.d, f.fit.fitted, w, WeightScheme::iptw);
    CHECK(testsupport::relative_diff(ns_fixed.sigma, fs.sigma) < 1e-8);
  }
}

TEST_CASE("masked ATO stack matches the overlap fixed-PS form") {
  const Fitted f = fitted_dataset(13, 90, 3);
  const StackSpec masked = build_stack(Estimand::ato, false, true, f.d, f.fit);
  const auto ns_fixed = variance_numeric(masked);
  const Vector w = compute_weights(f.fit.fitted, f.d.z, WeightScheme::overlap);
  const auto fs = variance_fixed(f.d, f.fit.fitted, w, WeightScheme::overlap);
  CHECK(testsupport::relative_diff(ns_fixed.sigma, fs.sigma) < 1e-8);
}

TEST_CASE("augmented stack with constant predictions matches the plain stack") {
  // outcome model with Z only: predictions constant across subjects
  const Fitted f = fitted_dataset(21, 120, 3);
  const OutcomePair om = fit_outcome_models(f.d, {});
  for (Index i = 1; i < f.d.n(); ++i) {
    CHECK(om.m1[i] == doctest::Approx(om.m1[0]).epsilon(1e-14));
    CHECK(om.m0[i] == doctest::Approx(om.m0[0]).epsilon(1e-14));
  }
  const auto plain = variance_numeric(build_stack(Estimand::ate, false, false, f.d, f.fit));
  const auto aug = variance_numeric(build_stack(Estimand::ate, true, false, f.d, f.fit, &om));
  CHECK(testsupport::relative_diff(plain.sigma, aug.sigma) < 1e-6);
}

TEST_CASE("row permutation leaves every variance estimator unchanged") {
  const Fitted f = fitted_dataset(31, 70, 2);
  std::vector<Index> perm(static_cast<std::size_t>(f.d.n()));
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(6);
  for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  Fitted g;
  g.d = select_rows(f.d, perm);
  g.dm = design_matrix(g.d);
  g.fit = fit_logistic(g.dm, g.d.z);
  const Vector wg = compute_weights(g.fit.fitted, g.d.z, WeightScheme::iptw);
  const auto mg = hajek_means(g.d.y, g.d.z, wg);
  g.mu1 = mg.first;
  g.mu0 = mg.second;

  CHECK(testsupport::relative_diff(variance_ms_ate(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0).sigma,
                                   variance_ms_ate(g.d, g.fit.fitted, g.dm, g.mu1, g.mu0).sigma) <
        1e-10);
  CHECK(testsupport::relative_diff(variance_pes_ate(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0).sigma,
                                   variance_pes_ate(g.d, g.fit.fitted, g.dm, g.mu1, g.mu0).sigma) <
        1e-10);
  const Vector wf = compute_weights(f.fit.fitted, f.d.z, WeightScheme::iptw);
  CHECK(testsupport::relative_diff(
            variance_fixed(f.d, f.fit.fitted, wf, WeightScheme::iptw).sigma,
            variance_fixed(g.d, g.fit.fitted, wg, WeightScheme::iptw).sigma) < 1e-10);
  CHECK(testsupport::relative_diff(
            variance_numeric(build_stack(Estimand::ate, false, false, f.d, f.fit)).sigma,
            variance_numeric(build_stack(Estimand::ate, false, false, g.d, g.fit)).sigma) < 1e-8);
  CHECK(testsupport::relative_diff(
            appendix_oracle_pes(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0).sigma,
            appendix_oracle_pes(g.d, g.fit.fitted, g.dm, g.mu1, g.mu0).sigma) < 1e-10);
}

TEST_CASE("MS and PES agree asymptotically under a correct PS model") {
  const Fitted f = fitted_dataset(41, 20000, 2);
  const auto ms = variance_ms_ate(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0);
  const auto pes = variance_pes_ate(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0);
  CHECK(testsupport::relative_diff(ms.sigma, pes.sigma) < 0.02);
}

TEST_CASE("PES standard errors are calibrated at large n") {
  // 500 replications of n = 20000: mean estimated SE over the replication SD
  const int reps = 500;
  std::vector<double> points, ses;
  points.reserve(reps);
  ses.reserve(reps);
  for (int r = 0; r < reps; ++r) {
    const Fitted f = fitted_dataset(9000 + static_cast<uint64_t>(r), 20000, 2);
    points.push_back(f.mu1 - f.mu0);
    ses.push_back(variance_pes_ate(f.d, f.fit.fitted, f.dm, f.mu1, f.mu0).se);
  }
  const double ratio = mean_of(ses) / sample_sd(points);
  CHECK(ratio > 0.97);
  CHECK(ratio < 1.03);
}

TEST_CASE("degenerate inputs raise typed errors") {
  const Fitted f = fitted_dataset(51, 40, 2);
  Vector bad = f.fit.fitted;
  bad[0] = 0.0;
  CHECK_THROWS_AS(variance_pes_ate(f.d, bad, f.dm, f.mu1, f.mu0), DegeneratePropensity);

  StackSpec spec = build_stack(Estimand::ate, false, false, f.d, f.fit);
  Vector off = spec.theta;
  off[spec.delta_index] += 0.5;  // no longer a solution
  CHECK_THROWS_AS(variance_numeric(spec, off), InvalidArgument);
}

}  // TEST_SUITE
