#include <doctest.h>

#include <cmath>

#include "psinfer/dgp.hpp"
#include "test_support.hpp"

using namespace psinfer;

namespace {

double column_correlation(const Matrix& x, Index a, Index b) {
  const Index n = x.rows();
  const double ma = x.col(a).mean();
  const double mb = x.col(b).mean();
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double da = x(i, a) - ma;
    const double db = x(i, b) - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace

TEST_SUITE("dgp") {

TEST_CASE("covariate generator hits the equicorrelation and dichotomization targets") {
  const Index n = 100000;
  const Matrix x = generate_covariates(n, 1234);

  // continuous block: pairwise correlation 0.2 (MC tolerance 0.01)
  CHECK(std::fabs(column_correlation(x, 0, 1) - 0.2) < 0.01);
  CHECK(std::fabs(column_correlation(x, 2, 4) - 0.2) < 0.01);
  for (Index a = 0; a < 5; ++a) {
    CHECK(std::fabs(x.col(a).mean()) < 0.02);
  }

  // binary block: prevalences 0.9, 0.8, 0.7, 0.6, 0.5 from the percentile cuts
  const double expected[5] = {0.9, 0.8, 0.7, 0.6, 0.5};
  for (Index j = 0; j < 5; ++j) {
    CHECK(std::fabs(x.col(5 + j).mean() - expected[j]) < 0.005);
    for (Index i = 0; i < 100; ++i) {
      const double v = x(i, 5 + j);
      CHECK((v == 0.0 || v == 1.0));
    }
  }

  // the flipped cut direction mirrors the prevalences
  const Matrix xb = generate_covariates(20000, 1234, DichotomizeDirection::below);
  for (Index j = 0; j < 5; ++j) {
    CHECK(std::fabs(xb.col(5 + j).mean() - (1.0 - expected[j])) < 0.012);
  }
}

TEST_CASE("sample covariance of the continuous block is near the target") {
  const Index n = 100000;
  const Matrix x = generate_covariates(n, 77);
  for (Index a = 0; a < 5; ++a) {
    for (Index b = 0; b < 5; ++b) {
      double cov = 0.0;
      const double ma = x.col(a).mean(), mb = x.col(b).mean();
      for (Index i = 0; i < n; ++i) cov += (x(i, a) - ma) * (x(i, b) - mb);
      cov /= static_cast<double>(n - 1);
      CHECK(std::fabs(cov - (a == b ? 1.0 : 0.2)) < 0.01);
    }
  }
}

TEST_CASE("covariate generation is deterministic in the seed") {
  const Matrix a = generate_covariates(5000, 42);
  const Matrix b = generate_covariates(5000, 42);
  CHECK((a - b).cwiseAbs().maxCoeff() == 0.0);
  const Matrix c = generate_covariates(5000, 43);
  CHECK((a - c).cwiseAbs().maxCoeff() > 0.0);

  const CalibrationValues calib = calibrate_cell(a, 0.3, 0.3);
  const SuperPopulation s1 = realize_population(a, calib, 7, 42);
  const SuperPopulation s2 = realize_population(b, calib, 7, 42);
  CHECK(s1.z == s2.z);
  CHECK(s1.y1 == s2.y1);
  CHECK(s1.y0 == s2.y0);
  CHECK((s1.p_treat - s2.p_treat).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("treatment intercept calibration") {
  // zero covariates: closed form alpha0 = logit(target)
  const Matrix zero = Matrix::Zero(1000, 10);
  const double a0 = calibrate_treatment_intercept(zero, 0.3);
  CHECK(std::fabs(a0 - logit(0.3)) < 1e-6);

  // paper coefficients: achieved prevalence within tolerance of the target
  const Matrix x = generate_covariates(20000, 5);
  const Vector lp = x * Eigen::Map<const Vector>(treatment_log_or().data(), 10);
  for (double target : {0.1, 0.3, 0.5}) {
    const double alpha = calibrate_treatment_intercept(x, target);
    double achieved = 0.0;
    for (Index i = 0; i < x.rows(); ++i) achieved += expit(alpha + lp[i]);
    achieved /= static_cast<double>(x.rows());
    CHECK(std::fabs(achieved - target) < 1e-6);
  }

  // monotone in the target
  CHECK(calibrate_treatment_intercept(x, 0.3) < calibrate_treatment_intercept(x, 0.4));
}

TEST_CASE("outcome calibration hits prevalence and risk difference") {
  const Matrix x = generate_covariates(20000, 6);
  const auto [a0, at] = calibrate_outcome(x, 0.3, -0.02);
  const Vector lp = x * Eigen::Map<const Vector>(outcome_log_or().data(), 10);
  double py0 = 0.0, ate = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    const double p0 = expit(a0 + lp[i]);
    const double p1 = expit(a0 + at + lp[i]);
    py0 += p0;
    ate += p1 - p0;
  }
  py0 /= static_cast<double>(x.rows());
  ate /= static_cast<double>(x.rows());
  CHECK(std::fabs(py0 - 0.3) < 1e-6);
  CHECK(std::fabs(ate - (-0.02)) < 1e-8);
  CHECK(at < 0.0);  // negative target effect -> negative coefficient

  // zero treatment coefficient leaves the arms identical
  double null_effect = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    null_effect += expit(a0 + 0.0 + lp[i]) - expit(a0 + lp[i]);
  }
  CHECK(null_effect == 0.0);
}

TEST_CASE("realized population matches its calibration targets") {
  const Index n = 100000;
  Matrix x = generate_covariates(n, 9);
  const CalibrationValues calib = calibrate_cell(x, 0.3, 0.3);
  const SuperPopulation sp = realize_population(std::move(x), calib, 10, 9);

  double zbar = 0.0, y0bar = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < sp.z.size(); ++i) {
    zbar += sp.z[i];
    y0bar += sp.y0[i];
    diff += static_cast<double>(sp.y1[i]) - static_cast<double>(sp.y0[i]);
  }
  zbar /= static_cast<double>(n);
  y0bar /= static_cast<double>(n);
  diff /= static_cast<double>(n);
  // 4-sigma binomial bounds at n = 1e5
  CHECK(std::fabs(zbar - 0.3) < 0.006);
  CHECK(std::fabs(y0bar - 0.3) < 0.006);
  CHECK(std::fabs(diff - (-0.02)) < 0.009);

  CHECK(std::fabs(sp.calib.achieved_pz - 0.3) < 1e-6);
  CHECK(std::fabs(sp.calib.achieved_py0 - 0.3) < 1e-6);
  CHECK(std::fabs(sp.calib.achieved_ate - (-0.02)) < 1e-8);
}

TEST_CASE("true estimands") {
  SuperPopulation sp;
  const Index n = 1000;
  sp.x = Matrix::Zero(n, 10);
  sp.p_treat.resize(n);
  sp.p1 = Vector::Zero(n);
  sp.p0 = Vector::Zero(n);
  sp.z.assign(static_cast<std::size_t>(n), 0);
  sp.y1.assign(static_cast<std::size_t>(n), 0);
  sp.y0.assign(static_cast<std::size_t>(n), 0);
  Rng rng(12);
  for (Index i = 0; i < n; ++i) {
    sp.p_treat[i] = 0.37;  // constant: overlap weights cancel
    sp.y1[static_cast<std::size_t>(i)] = rng.bernoulli(0.5) ? 1 : 0;
    sp.y0[static_cast<std::size_t>(i)] = rng.bernoulli(0.4) ? 1 : 0;
  }
  auto [ate, ato] = true_estimands(sp);
  CHECK(ato == doctest::Approx(ate).epsilon(1e-14));

  // identical potential outcomes: both estimands vanish
  sp.y1 = sp.y0;
  auto [ate0, ato0] = true_estimands(sp);
  CHECK(ate0 == 0.0);
  CHECK(ato0 == 0.0);

  // hand-rolled weighted mean on varying propensities
  for (Index i = 0; i < n; ++i) {
    sp.p_treat[i] = 0.1 + 0.8 * static_cast<double>(i) / static_cast<double>(n);
    sp.y1[static_cast<std::size_t>(i)] = rng.bernoulli(0.6) ? 1 : 0;
    sp.y0[static_cast<std::size_t>(i)] = rng.bernoulli(0.35) ? 1 : 0;
  }
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double w = sp.p_treat[i] * (1.0 - sp.p_treat[i]);
    num += w * (static_cast<double>(sp.y1[static_cast<std::size_t>(i)]) -
                static_cast<double>(sp.y0[static_cast<std::size_t>(i)]));
    den += w;
  }
  auto [ate2, ato2] = true_estimands(sp);
  CHECK(ato2 == doctest::Approx(num / den).epsilon(1e-14));
  // expected-probability variant exists behind the flag
  auto [ate3, ato3] = true_estimands(sp, true);
  CHECK(ate3 == 0.0);
  CHECK(ato3 == 0.0);
}

TEST_CASE("population save/load round-trips bitwise") {
  testsupport::TempDir dir("pop");
  Matrix x = generate_covariates(4000, 21);
  const CalibrationValues calib = calibrate_cell(x, 0.4, 0.2);
  const SuperPopulation sp = realize_population(std::move(x), calib, 22, 21);
  save_population(sp, dir.file("pop.bin"));
  const SuperPopulation sp2 = load_population(dir.file("pop.bin"));
  REQUIRE(sp2.size() == sp.size());
  CHECK((sp.x - sp2.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK((sp.p_treat - sp2.p_treat).cwiseAbs().maxCoeff() == 0.0);
  CHECK(sp.z == sp2.z);
  CHECK(sp.y1 == sp2.y1);
  CHECK(sp.y0 == sp2.y0);
  CHECK(sp2.calib.alpha_treat == sp.calib.alpha_treat);
  CHECK(sp2.realize_seed == 22);
}

TEST_CASE("bracket failure is reported") {
  const Matrix zero = Matrix::Zero(100, 10);
  CHECK_THROWS_AS(calibrate_outcome(zero, 0.5, 0.9999), BracketFailure);
}

}  // TEST_SUITE
