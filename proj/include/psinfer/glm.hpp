#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "psinfer/dataset.hpp"
#include "psinfer/errors.hpp"
#include "psinfer/math.hpp"

namespace psinfer {

/// Converged maximum-likelihood logistic fit. fitted is recomputable as
/// expit(design * beta) row by row.
struct LogisticFit {
  Vector beta;
  Vector fitted;
  int iterations = 0;
  bool converged = false;
  bool separation_flag = false;
};

namespace glm_detail {

inline constexpr double kScoreTol = 1e-8;
inline constexpr double kStepTol = 1e-10;
inline constexpr int kMaxIter = 100;
inline constexpr double kFittedExtreme = 1e-8;
inline constexpr double kBetaExtreme = 50.0;
inline constexpr double kPerfectFitLoglik = -1e-6;
inline constexpr double kPivotRatio = 1e-12;

/// Solves the SPD system via pivoted Cholesky (LDLT); a pivot below
/// kPivotRatio times the largest pivot is treated as rank deficiency.
inline Vector solve_information(const Matrix& info, const Vector& rhs) {
  Eigen::LDLT<Matrix> ldlt(info);
  const Vector d = ldlt.vectorD();
  const double max_pivot = d.maxCoeff();
  if (!(max_pivot > 0.0) || d.minCoeff() < kPivotRatio * max_pivot) {
    throw SingularInformation("Fisher information is not invertible");
  }
  return ldlt.solve(rhs);
}

inline double bernoulli_loglik(const Vector& eta, const Vector& target) {
  double ll = 0.0;
  for (Index i = 0; i < eta.size(); ++i) ll += target[i] * eta[i] - log1pexp(eta[i]);
  return ll;
}

inline bool fitted_extreme(const Vector& probs) {
  for (Index i = 0; i < probs.size(); ++i) {
    if (probs[i] <= kFittedExtreme || probs[i] >= 1.0 - kFittedExtreme) return true;
  }
  return false;
}

}  // namespace glm_detail

/// Fits logistic regression of target on the design matrix by Newton-Raphson
/// with step-halving, starting at beta = 0. Deterministic for fixed input.
///
/// Quasi-separation is flagged when the stopped fit predicts every subject
/// perfectly (log-likelihood at zero), any |beta_j| exceeds 30, or the fit
/// fails to converge in 100 iterations. Partially saturated fits with bounded
/// coefficients are returned as converged; their extreme fitted probabilities
/// surface downstream as degenerate-propensity errors if they matter.
inline LogisticFit fit_logistic(const Matrix& design, const Vector& target) {
  using namespace glm_detail;
  if (design.rows() != target.size()) {
    throw DimensionMismatch("design rows != target length");
  }
  const double tsum = target.sum();
  if (tsum == 0.0 || tsum == static_cast<double>(target.size())) {
    throw NoVariation("target is constant");
  }

  const Index p = design.cols();
  Vector beta = Vector::Zero(p);
  Vector eta = Vector::Zero(design.rows());
  Vector probs = eta.unaryExpr([](double v) { return expit(v); });
  double ll = bernoulli_loglik(eta, target);
  int iterations = 0;

  // The separation heuristic judges the stopped fit, not the optimizer path:
  // Newton steps may overshoot transiently on data that still has a clean MLE.
  auto separated = [&](const Vector& b, double loglik) {
    return b.cwiseAbs().maxCoeff() > kBetaExtreme || loglik > kPerfectFitLoglik;
  };

  bool converged = false;
  for (int iter = 1; iter <= kMaxIter; ++iter) {
    const Vector score = design.transpose() * (target - probs);
    if (score.cwiseAbs().maxCoeff() <= kScoreTol) {
      converged = true;
      break;
    }
    const Vector w = probs.array() * (1.0 - probs.array());
    Matrix info(p, p);
    info.noalias() = design.transpose() * w.asDiagonal() * design;
    Vector delta;
    try {
      delta = solve_information(info, score);
    } catch (const SingularInformation&) {
      if (separated(beta, ll) || fitted_extreme(probs)) {
        throw QuasiSeparation("quasi-separation detected while fitting logistic model");
      }
      throw;
    }

    double step = 1.0;
    Vector beta_new;
    Vector eta_new;
    double ll_new = 0.0;
    bool improved = false;
    for (int halving = 0; halving < 40; ++halving) {
      beta_new = beta + step * delta;
      eta_new = design * beta_new;
      ll_new = bernoulli_loglik(eta_new, target);
      if (ll_new >= ll - 1e-12) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;

    const double max_change = (step * delta).cwiseAbs().maxCoeff();
    beta = beta_new;
    eta = eta_new;
    probs = eta.unaryExpr([](double v) { return expit(v); });
    ll = ll_new;
    iterations = iter;
    if (max_change < kStepTol) {
      converged = true;
      break;
    }
  }

  if (!converged || separated(beta, ll)) {
    throw QuasiSeparation(converged ? "quasi-separation detected while fitting logistic model"
                                    : "logistic fit did not converge in 100 iterations");
  }

  LogisticFit fit;
  fit.beta = std::move(beta);
  fit.fitted = std::move(probs);
  fit.iterations = iterations;
  fit.converged = true;
  fit.separation_flag = false;
  return fit;
}

/// expit(row . beta) for each row of the design matrix.
inline Vector predict_probs(const LogisticFit& fit, const Matrix& design) {
  if (design.cols() != fit.beta.size()) {
    throw DimensionMismatch("design columns != coefficient length");
  }
  return (design * fit.beta).unaryExpr([](double v) { return expit(v); });
}

}  // namespace psinfer
