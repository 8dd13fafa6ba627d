#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <utility>
#include <vector>

#include "psinfer/dataset.hpp"
#include "psinfer/errors.hpp"
#include "psinfer/estimators.hpp"
#include "psinfer/glm.hpp"

namespace psinfer {

/// sigma is the per-observation asymptotic variance; variance = sigma / n is
/// what confidence intervals use; se = sqrt(variance).
struct VarianceResult {
  double sigma = 0.0;
  double variance = 0.0;
  double se = 0.0;
};

namespace sandwich_detail {

inline VarianceResult from_sigma(double sigma, Index n) {
  // Mean-of-squares and PSD quadratic forms are nonnegative; clip roundoff.
  if (sigma < 0.0) sigma = 0.0;
  VarianceResult r;
  r.sigma = sigma;
  r.variance = sigma / static_cast<double>(n);
  r.se = std::sqrt(r.variance);
  return r;
}

inline void check_propensities(const Vector& e_hat) {
  for (Index i = 0; i < e_hat.size(); ++i) {
    if (!(e_hat[i] > 0.0 && e_hat[i] < 1.0)) {
      throw DegeneratePropensity("propensity outside (0, 1) at row " + std::to_string(i));
    }
  }
}

}  // namespace sandwich_detail

/// Model-based sandwich for the IPTW ATE. The derivative block for the
/// outcome means is replaced by its expectation under a correctly specified
/// PS model, leaving the un-normalized residual terms.
inline VarianceResult variance_ms_ate(const Dataset& d, const Vector& e_hat, const Matrix& dm,
                                      double mu1, double mu0) {
  sandwich_detail::check_propensities(e_hat);
  const Index n = d.n();
  const Vector ew = e_hat.array() * (1.0 - e_hat.array());
  Matrix ebb(dm.cols(), dm.cols());
  ebb.noalias() = dm.transpose() * ew.asDiagonal() * dm;
  ebb /= static_cast<double>(n);

  Vector h = Vector::Zero(dm.cols());
  for (Index i = 0; i < n; ++i) {
    const double e = e_hat[i];
    const double term = d.z[i] == 1.0 ? (d.y[i] - mu1) * (1.0 - e) / e
                                      : (d.y[i] - mu0) * e / (1.0 - e);
    h.noalias() += term * dm.row(i).transpose();
  }
  h /= static_cast<double>(n);
  const Vector g = glm_detail::solve_information(ebb, h);

  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double e = e_hat[i];
    const double resid = d.z[i] == 1.0 ? (d.y[i] - mu1) / e : -(d.y[i] - mu0) / (1.0 - e);
    const double phi = resid - (d.z[i] - e) * dm.row(i).dot(g);
    acc += phi * phi;
  }
  return sandwich_detail::from_sigma(acc / static_cast<double>(n), n);
}

/// Purely empirical sandwich for the IPTW ATE: every component, including the
/// correction term, carries the inverse-sum-of-weights normalization, so no
/// model-based expectation is substituted anywhere.
inline VarianceResult variance_pes_ate(const Dataset& d, const Vector& e_hat, const Matrix& dm,
                                       double mu1, double mu0) {
  sandwich_detail::check_propensities(e_hat);
  const Index n = d.n();
  double s1 = 0.0, s0 = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (d.z[i] == 1.0) {
      s1 += 1.0 / e_hat[i];
    } else {
      s0 += 1.0 / (1.0 - e_hat[i]);
    }
  }
  s1 /= static_cast<double>(n);
  s0 /= static_cast<double>(n);
  if (s1 <= 0.0 || s0 <= 0.0) throw EmptyArm("an arm has no weight");

  const Vector ew = e_hat.array() * (1.0 - e_hat.array());
  Matrix ebb(dm.cols(), dm.cols());
  ebb.noalias() = dm.transpose() * ew.asDiagonal() * dm;
  ebb /= static_cast<double>(n);

  Vector h = Vector::Zero(dm.cols());
  for (Index i = 0; i < n; ++i) {
    const double e = e_hat[i];
    const double term = d.z[i] == 1.0 ? (d.y[i] - mu1) * (1.0 - e) / (e * s1)
                                      : (d.y[i] - mu0) * e / ((1.0 - e) * s0);
    h.noalias() += term * dm.row(i).transpose();
  }
  h /= static_cast<double>(n);
  const Vector g = glm_detail::solve_information(ebb, h);

  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double e = e_hat[i];
    const double resid = d.z[i] == 1.0 ? (d.y[i] - mu1) / (e * s1)
                                       : -(d.y[i] - mu0) / ((1.0 - e) * s0);
    const double phi = resid - (d.z[i] - e) * dm.row(i).dot(g);
    acc += phi * phi;
  }
  return sandwich_detail::from_sigma(acc / static_cast<double>(n), n);
}

/// Fixed-PS sandwich: the Hajek influence form with the supplied weights and
/// no correction for PS estimation. Works for any weight scheme.
inline VarianceResult variance_fixed(const Dataset& d, const Vector& e_hat, const Vector& w,
                                     WeightScheme /*scheme*/) {
  sandwich_detail::check_propensities(e_hat);
  const Index n = d.n();
  const auto [mu1, mu0] = hajek_means(d.y, d.z, w);
  double s1 = 0.0, s0 = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (d.z[i] == 1.0) {
      s1 += w[i];
    } else {
      s0 += w[i];
    }
  }
  s1 /= static_cast<double>(n);
  s0 /= static_cast<double>(n);

  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double phi = d.z[i] == 1.0 ? w[i] * (d.y[i] - mu1) / s1 : -w[i] * (d.y[i] - mu0) / s0;
    acc += phi * phi;
  }
  return sandwich_detail::from_sigma(acc / static_cast<double>(n), n);
}

enum class BreadMuBlock { empirical, identity };

/// Independent oracle for the ATE sandwich, built from the explicit block
/// decomposition of the stacked estimating equations: A11, H, A22, C = [1, -1]
/// and the per-subject estimating functions. With the empirical mu-block this
/// reproduces the purely empirical sandwich; replacing the mu-block with the
/// identity reproduces the model-based sandwich.
inline VarianceResult appendix_oracle_pes(const Dataset& d, const Vector& e_hat, const Matrix& dm,
                                          double mu1, double mu0,
                                          BreadMuBlock mu_block = BreadMuBlock::empirical) {
  sandwich_detail::check_propensities(e_hat);
  const Index n = d.n();
  const Index p1 = dm.cols();

  Matrix a11 = Matrix::Zero(p1, p1);
  Matrix h = Matrix::Zero(2, p1);
  double a22_1 = 0.0, a22_0 = 0.0;
  Matrix psi_beta(p1, n);
  Matrix psi_mu(2, n);
  for (Index i = 0; i < n; ++i) {
    const double e = e_hat[i];
    const double zi = d.z[i];
    const double yi = d.y[i];
    a11.noalias() += e * (1.0 - e) * dm.row(i).transpose() * dm.row(i);
    h.row(0).noalias() += (zi * (yi - mu1) * (1.0 - e) / e) * dm.row(i);
    h.row(1).noalias() -= ((1.0 - zi) * (yi - mu0) * e / (1.0 - e)) * dm.row(i);
    a22_1 += zi / e;
    a22_0 += (1.0 - zi) / (1.0 - e);
    psi_beta.col(i) = (zi - e) * dm.row(i).transpose();
    psi_mu(0, i) = zi * (yi - mu1) / e;
    psi_mu(1, i) = (1.0 - zi) * (yi - mu0) / (1.0 - e);
  }
  a11 /= static_cast<double>(n);
  h /= static_cast<double>(n);
  a22_1 /= static_cast<double>(n);
  a22_0 /= static_cast<double>(n);

  Eigen::FullPivLU<Matrix> lu(a11);
  if (!lu.isInvertible()) throw SingularBread("A11 block is singular");
  const Matrix u = lu.solve(psi_beta);  // p1 x n

  double c1 = 1.0, c0 = -1.0;  // C A22^-1
  if (mu_block == BreadMuBlock::empirical) {
    if (a22_1 <= 0.0 || a22_0 <= 0.0) throw SingularBread("A22 block is singular");
    c1 = 1.0 / a22_1;
    c0 = -1.0 / a22_0;
  }

  double acc = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Eigen::Vector2d v = psi_mu.col(i) - h * u.col(i);
    const double phi = c1 * v[0] + c0 * v[1];
    acc += phi * phi;
  }
  return sandwich_detail::from_sigma(acc / static_cast<double>(n), n);
}

// ---------------------------------------------------------------------------
// Numeric stacked-M-estimation engine
// ---------------------------------------------------------------------------

/// A stacked estimating-equation system: theta holds the PS coefficients
/// first, then any outcome-model nuisances, then the scalar tail parameters
/// with the effect estimate last. psi evaluates the per-subject estimating
/// function; parameters with fixed_mask set are treated as known constants
/// (their rows and columns are removed before the sandwich inversion).
struct StackSpec {
  Vector theta;
  std::function<void(Index i, const Vector& theta, Vector& out)> psi;
  std::vector<bool> fixed_mask;
  Index n = 0;
  Index dim = 0;
  Index delta_index = 0;

  Vector mean_psi(const Vector& at) const {
    Vector acc = Vector::Zero(dim);
    Vector tmp(dim);
    for (Index i = 0; i < n; ++i) {
      psi(i, at, tmp);
      acc += tmp;
    }
    return acc / static_cast<double>(n);
  }
};

/// Numeric sandwich: bread from central finite differences of the mean
/// estimating function, meat from empirical outer products. Returns the
/// effect-coordinate variance.
inline VarianceResult variance_numeric(const StackSpec& spec, const Vector& theta_hat) {
  std::vector<Index> free_idx;
  for (Index k = 0; k < spec.dim; ++k) {
    if (!spec.fixed_mask[static_cast<std::size_t>(k)]) free_idx.push_back(k);
  }
  const auto nf = static_cast<Index>(free_idx.size());
  Index delta_pos = -1;
  for (Index k = 0; k < nf; ++k) {
    if (free_idx[static_cast<std::size_t>(k)] == spec.delta_index) delta_pos = k;
  }
  if (delta_pos < 0) throw InvalidArgument("effect parameter must not be masked");

  const Vector g0 = spec.mean_psi(theta_hat);
  for (Index k : free_idx) {
    if (std::fabs(g0[k]) * static_cast<double>(spec.n) > 1e-6) {
      throw InvalidArgument("estimating equations not solved at theta_hat (component " +
                            std::to_string(k) + ")");
    }
  }

  // Bread via central differences, h scaled to the parameter magnitude.
  Matrix bread(nf, nf);
  Vector theta = theta_hat;
  for (Index jj = 0; jj < nf; ++jj) {
    const Index j = free_idx[static_cast<std::size_t>(jj)];
    const double h = 1e-5 * std::max(1.0, std::fabs(theta_hat[j]));
    theta[j] = theta_hat[j] + h;
    const Vector gp = spec.mean_psi(theta);
    theta[j] = theta_hat[j] - h;
    const Vector gm = spec.mean_psi(theta);
    theta[j] = theta_hat[j];
    for (Index kk = 0; kk < nf; ++kk) {
      const Index k = free_idx[static_cast<std::size_t>(kk)];
      const double deriv = (gp[k] - gm[k]) / (2.0 * h);
      if (!std::isfinite(deriv)) throw JacobianNonFinite("non-finite bread entry");
      bread(kk, jj) = -deriv;
    }
  }

  Matrix meat = Matrix::Zero(nf, nf);
  Vector tmp(spec.dim);
  Vector tmpf(nf);
  for (Index i = 0; i < spec.n; ++i) {
    spec.psi(i, theta_hat, tmp);
    for (Index kk = 0; kk < nf; ++kk) tmpf[kk] = tmp[free_idx[static_cast<std::size_t>(kk)]];
    meat.noalias() += tmpf * tmpf.transpose();
  }
  meat /= static_cast<double>(spec.n);

  Eigen::FullPivLU<Matrix> lu(bread);
  if (!lu.isInvertible()) throw SingularBread("bread matrix is singular");
  const Matrix m = lu.solve(meat);           // A^-1 B
  const Matrix s = lu.solve(m.transpose());  // A^-1 B A^-T
  return sandwich_detail::from_sigma(s(delta_pos, delta_pos), spec.n);
}

inline VarianceResult variance_numeric(const StackSpec& spec) {
  return variance_numeric(spec, spec.theta);
}

namespace sandwich_detail {

struct StackContext {
  Matrix ps_design;
  Vector y;
  Vector z;
  WeightScheme scheme = WeightScheme::iptw;
  bool augmented = false;
  Matrix om_design;  // outcome design with the observed Z in column 1
  Index p_ps = 0;
  Index p_om = 0;
};

}  // namespace sandwich_detail

/// Assembles the stacked estimating system whose solution reproduces the
/// plain weighted point estimate (theta = (beta, mu1, mu0, delta)) or the
/// augmented one (theta = (beta, alpha, a, r1, r0, delta)). ps_fixed masks the
/// PS coefficient block, which yields fixed-PS behavior in variance_numeric.
inline StackSpec build_stack(Estimand estimand, bool augmented, bool ps_fixed, const Dataset& d,
                             const LogisticFit& ps_fit, const OutcomePair* om = nullptr) {
  auto ctx = std::make_shared<sandwich_detail::StackContext>();
  ctx->ps_design = design_matrix(d);
  ctx->y = d.y;
  ctx->z = d.z;
  ctx->scheme = scheme_for(estimand);
  ctx->augmented = augmented;
  ctx->p_ps = ctx->ps_design.cols();
  if (ps_fit.beta.size() != ctx->p_ps) throw DimensionMismatch("PS fit does not match design");

  const Vector e_hat = predict_probs(ps_fit, ctx->ps_design);
  const Vector w = compute_weights(e_hat, d.z, ctx->scheme);

  StackSpec spec;
  spec.n = d.n();

  if (!augmented) {
    spec.dim = ctx->p_ps + 3;
    spec.delta_index = spec.dim - 1;
    const auto [mu1, mu0] = hajek_means(d.y, d.z, w);
    spec.theta.resize(spec.dim);
    spec.theta.head(ctx->p_ps) = ps_fit.beta;
    spec.theta[ctx->p_ps] = mu1;
    spec.theta[ctx->p_ps + 1] = mu0;
    spec.theta[ctx->p_ps + 2] = mu1 - mu0;
    spec.psi = [ctx](Index i, const Vector& theta, Vector& out) {
      const Index p = ctx->p_ps;
      const double eta = ctx->ps_design.row(i).dot(theta.head(p));
      const double e = expit(eta);
      const double zi = ctx->z[i];
      const double yi = ctx->y[i];
      const double omega = tilt(ctx->scheme, e);
      out.head(p) = (zi - e) * ctx->ps_design.row(i).transpose();
      out[p] = zi * (yi - theta[p]) * omega / e;
      out[p + 1] = (1.0 - zi) * (yi - theta[p + 1]) * omega / (1.0 - e);
      out[p + 2] = theta[p] - theta[p + 1] - theta[p + 2];
    };
  } else {
    if (om == nullptr) throw InvalidArgument("augmented stack needs an outcome model");
    if (om->per_arm) throw InvalidArgument("stack supports the single outcome model only");
    ctx->om_design.resize(d.n(), static_cast<Index>(om->covariates.size()) + 2);
    ctx->om_design.col(0).setOnes();
    ctx->om_design.col(1) = d.z;
    for (std::size_t j = 0; j < om->covariates.size(); ++j) {
      ctx->om_design.col(static_cast<Index>(j) + 2) = d.x.col(d.covariate_index(om->covariates[j]));
    }
    ctx->p_om = ctx->om_design.cols();
    if (om->fit.beta.size() != ctx->p_om) throw DimensionMismatch("outcome fit does not match design");

    spec.dim = ctx->p_ps + ctx->p_om + 4;
    spec.delta_index = spec.dim - 1;
    double omega_sum = 0.0, omega_diff = 0.0, s1 = 0.0, s0 = 0.0, r1 = 0.0, r0 = 0.0;
    for (Index i = 0; i < d.n(); ++i) {
      const double omega = tilt(ctx->scheme, e_hat[i]);
      omega_sum += omega;
      omega_diff += omega * (om->m1[i] - om->m0[i]);
      if (d.z[i] == 1.0) {
        s1 += w[i];
        r1 += w[i] * (d.y[i] - om->m1[i]);
      } else {
        s0 += w[i];
        r0 += w[i] * (d.y[i] - om->m0[i]);
      }
    }
    const double a_hat = omega_diff / omega_sum;
    const double r1_hat = r1 / s1;
    const double r0_hat = r0 / s0;
    spec.theta.resize(spec.dim);
    spec.theta.head(ctx->p_ps) = ps_fit.beta;
    spec.theta.segment(ctx->p_ps, ctx->p_om) = om->fit.beta;
    spec.theta[ctx->p_ps + ctx->p_om] = a_hat;
    spec.theta[ctx->p_ps + ctx->p_om + 1] = r1_hat;
    spec.theta[ctx->p_ps + ctx->p_om + 2] = r0_hat;
    spec.theta[ctx->p_ps + ctx->p_om + 3] = a_hat + r1_hat - r0_hat;
    spec.psi = [ctx](Index i, const Vector& theta, Vector& out) {
      const Index p = ctx->p_ps;
      const Index q = ctx->p_om;
      const double e = expit(ctx->ps_design.row(i).dot(theta.head(p)));
      const double zi = ctx->z[i];
      const double yi = ctx->y[i];
      const auto alpha = theta.segment(p, q);
      const double eta_obs = ctx->om_design.row(i).dot(alpha);
      const double alpha_z = alpha[1];
      const double m_obs = expit(eta_obs);
      const double m1 = expit(eta_obs + (1.0 - zi) * alpha_z);
      const double m0 = expit(eta_obs - zi * alpha_z);
      const double omega = tilt(ctx->scheme, e);
      const double wi = omega / (zi == 1.0 ? e : 1.0 - e);
      out.head(p) = (zi - e) * ctx->ps_design.row(i).transpose();
      out.segment(p, q) = (yi - m_obs) * ctx->om_design.row(i).transpose();
      out[p + q] = omega * (m1 - m0 - theta[p + q]);
      out[p + q + 1] = zi * wi * (yi - m1 - theta[p + q + 1]);
      out[p + q + 2] = (1.0 - zi) * wi * (yi - m0 - theta[p + q + 2]);
      out[p + q + 3] = theta[p + q] + theta[p + q + 1] - theta[p + q + 2] - theta[p + q + 3];
    };
  }

  spec.fixed_mask.assign(static_cast<std::size_t>(spec.dim), false);
  if (ps_fixed) {
    for (Index k = 0; k < ctx->p_ps; ++k) spec.fixed_mask[static_cast<std::size_t>(k)] = true;
  }
  return spec;
}

}  // namespace psinfer
