#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "psinfer/errors.hpp"
#include "psinfer/dataset.hpp"
#include "psinfer/math.hpp"
#include "psinfer/rng.hpp"

namespace psinfer {

// Benchmark data-generating process: ten equicorrelated standard normals, the
// last five dichotomized, logistic treatment and outcome models with fixed
// odds-ratio coefficients, and intercepts calibrated by bisection to hit the
// target treatment prevalence, control-arm outcome prevalence, and risk
// difference.

inline const std::array<double, 10>& treatment_log_or() {
  static const std::array<double, 10> coefs = {
      std::log(1.1), std::log(1.2),  std::log(1.5), std::log(1.75), std::log(2.0),
      std::log(1.25), std::log(1.5), std::log(2.0), std::log(0.8),  std::log(0.5)};
  return coefs;
}

inline const std::array<double, 10>& outcome_log_or() {
  static const std::array<double, 10> coefs = {
      std::log(2.0), std::log(1.75), std::log(1.1),  std::log(1.5), std::log(1.2),
      std::log(2.0), std::log(1.5),  std::log(1.1), std::log(1.25), std::log(2.0)};
  return coefs;
}

inline constexpr double kPairwiseCorrelation = 0.2;
inline constexpr std::array<double, 5> kDichotomizeQuantiles = {0.1, 0.2, 0.3, 0.4, 0.5};
inline constexpr Index kGenerationChunk = 4096;

/// Direction of the binary-covariate cut: `above` marks values over the
/// percentile threshold (prevalences 0.9..0.5, the default), `below` marks
/// values under it (prevalences 0.1..0.5). Kept as a switch so the two
/// readings of the cut can be compared.
enum class DichotomizeDirection { above, below };

struct CalibrationValues {
  double alpha0_treat = 0.0;
  double alpha0_outcome = 0.0;
  double alpha_treat = 0.0;
  double target_pz = 0.0;
  double target_py0 = 0.0;
  double target_ate = -0.02;
  double achieved_pz = 0.0;
  double achieved_py0 = 0.0;
  double achieved_ate = 0.0;
};

struct SuperPopulation {
  Matrix x;        // N x 10
  Vector p_treat;  // true propensity
  Vector p1, p0;   // true event probabilities under Z = 1 / Z = 0
  std::vector<uint8_t> z, y1, y0;
  CalibrationValues calib;
  uint64_t covariate_seed = 0;
  uint64_t realize_seed = 0;

  Index size() const { return p_treat.size(); }
};

/// Draws N rows of (V1..V10) ~ N(0, 1) with constant pairwise correlation 0.2,
/// keeps V1..V5 as continuous covariates, and dichotomizes V6..V10 at their
/// empirical 10th/20th/30th/40th/50th percentiles.
///
/// Generation is chunked with one derived stream per fixed-size chunk, so the
/// output depends only on the seed.
inline Matrix generate_covariates(Index n, uint64_t seed,
                                  DichotomizeDirection direction = DichotomizeDirection::above) {
  if (n < 2) throw InvalidArgument("population size too small");
  Matrix sigma = Matrix::Constant(10, 10, kPairwiseCorrelation);
  sigma.diagonal().setOnes();
  const Matrix chol = Eigen::LLT<Matrix>(sigma).matrixL();

  Matrix x(n, 10);
  Eigen::VectorXd eps(10);
  for (Index start = 0; start < n; start += kGenerationChunk) {
    Rng rng(derive_seed(seed, {stream::covariates, static_cast<uint64_t>(start / kGenerationChunk)}));
    const Index end = std::min(n, start + kGenerationChunk);
    for (Index i = start; i < end; ++i) {
      for (Index j = 0; j < 10; ++j) eps[j] = rng.normal();
      x.row(i) = (chol * eps).transpose();
    }
  }

  for (std::size_t k = 0; k < kDichotomizeQuantiles.size(); ++k) {
    const Index j = static_cast<Index>(5 + k);
    std::vector<double> col(x.col(j).data(), x.col(j).data() + n);
    std::sort(col.begin(), col.end());
    const double threshold = quantile_sorted(col, kDichotomizeQuantiles[k]);
    for (Index i = 0; i < n; ++i) {
      const bool above = x(i, j) > threshold;
      x(i, j) = (direction == DichotomizeDirection::above ? above : !above) ? 1.0 : 0.0;
    }
  }
  return x;
}

namespace dgp_detail {

inline Vector linear_predictor(const Matrix& x, const std::array<double, 10>& coefs) {
  const Eigen::Map<const Vector> beta(coefs.data(), 10);
  return x * beta;
}

inline double mean_expit(const Vector& lp, double shift) {
  double acc = 0.0;
  for (Index i = 0; i < lp.size(); ++i) acc += expit(shift + lp[i]);
  return acc / static_cast<double>(lp.size());
}

}  // namespace dgp_detail

/// Intercept of the treatment model such that the super-population mean of
/// expit(alpha0 + fixed coefficients . X) equals the target prevalence.
inline double calibrate_treatment_intercept(const Matrix& x, double target_prevalence) {
  if (!(target_prevalence > 0.01 && target_prevalence < 0.99)) {
    throw InvalidArgument("target treatment prevalence outside (0.01, 0.99)");
  }
  const Vector lp = dgp_detail::linear_predictor(x, treatment_log_or());
  return bisect([&](double a0) { return dgp_detail::mean_expit(lp, a0) - target_prevalence; },
                -10.0, 10.0, 1e-9, 1e-13);
}

/// Two-stage outcome calibration: first the intercept so the mean of p0 hits
/// the control-arm prevalence, then the treatment coefficient so the mean of
/// (p1 - p0) hits the target risk difference. Both bisections act on the
/// target functional directly.
inline std::pair<double, double> calibrate_outcome(const Matrix& x, double target_py0,
                                                   double target_ate = -0.02) {
  if (!(target_py0 > 0.01 && target_py0 < 0.99)) {
    throw InvalidArgument("target outcome prevalence outside (0.01, 0.99)");
  }
  const Vector lp = dgp_detail::linear_predictor(x, outcome_log_or());
  const double alpha0 =
      bisect([&](double a0) { return dgp_detail::mean_expit(lp, a0) - target_py0; }, -10.0, 10.0,
             1e-9, 1e-13);
  const auto mean_effect = [&](double at) {
    double acc = 0.0;
    for (Index i = 0; i < lp.size(); ++i) {
      acc += expit(alpha0 + at + lp[i]) - expit(alpha0 + lp[i]);
    }
    return acc / static_cast<double>(lp.size());
  };
  const double alpha_treat =
      bisect([&](double at) { return mean_effect(at) - target_ate; }, -10.0, 10.0, 1e-10, 1e-13);
  return {alpha0, alpha_treat};
}

/// Calibrates all three parameters for one (pz, py0) cell and records the
/// achieved values on the expected-probability scale.
inline CalibrationValues calibrate_cell(const Matrix& x, double target_pz, double target_py0,
                                        double target_ate = -0.02) {
  CalibrationValues calib;
  calib.target_pz = target_pz;
  calib.target_py0 = target_py0;
  calib.target_ate = target_ate;
  calib.alpha0_treat = calibrate_treatment_intercept(x, target_pz);
  const auto [a0o, at] = calibrate_outcome(x, target_py0, target_ate);
  calib.alpha0_outcome = a0o;
  calib.alpha_treat = at;

  const Vector lp_t = dgp_detail::linear_predictor(x, treatment_log_or());
  const Vector lp_o = dgp_detail::linear_predictor(x, outcome_log_or());
  calib.achieved_pz = dgp_detail::mean_expit(lp_t, calib.alpha0_treat);
  calib.achieved_py0 = dgp_detail::mean_expit(lp_o, calib.alpha0_outcome);
  double acc = 0.0;
  for (Index i = 0; i < lp_o.size(); ++i) {
    acc += expit(calib.alpha0_outcome + calib.alpha_treat + lp_o[i]) -
           expit(calib.alpha0_outcome + lp_o[i]);
  }
  calib.achieved_ate = acc / static_cast<double>(lp_o.size());
  return calib;
}

/// Bernoulli draws of treatment and both potential outcomes. Per subject the
/// draw order is fixed (Z, then Y(1), then Y(0)); one derived stream per
/// fixed-size chunk keeps the result seed-determined.
inline SuperPopulation realize_population(Matrix x, const CalibrationValues& calib, uint64_t seed,
                                          uint64_t covariate_seed = 0) {
  SuperPopulation sp;
  const Index n = x.rows();
  sp.p_treat.resize(n);
  sp.p1.resize(n);
  sp.p0.resize(n);
  const Vector lp_t = dgp_detail::linear_predictor(x, treatment_log_or());
  const Vector lp_o = dgp_detail::linear_predictor(x, outcome_log_or());
  for (Index i = 0; i < n; ++i) {
    sp.p_treat[i] = expit(calib.alpha0_treat + lp_t[i]);
    sp.p1[i] = expit(calib.alpha0_outcome + calib.alpha_treat + lp_o[i]);
    sp.p0[i] = expit(calib.alpha0_outcome + lp_o[i]);
  }
  sp.x = std::move(x);
  sp.z.resize(static_cast<std::size_t>(n));
  sp.y1.resize(static_cast<std::size_t>(n));
  sp.y0.resize(static_cast<std::size_t>(n));
  for (Index start = 0; start < n; start += kGenerationChunk) {
    Rng rng(derive_seed(seed, {stream::realize, static_cast<uint64_t>(start / kGenerationChunk)}));
    const Index end = std::min(n, start + kGenerationChunk);
    for (Index i = start; i < end; ++i) {
      sp.z[static_cast<std::size_t>(i)] = rng.bernoulli(sp.p_treat[i]) ? 1 : 0;
      sp.y1[static_cast<std::size_t>(i)] = rng.bernoulli(sp.p1[i]) ? 1 : 0;
      sp.y0[static_cast<std::size_t>(i)] = rng.bernoulli(sp.p0[i]) ? 1 : 0;
    }
  }
  sp.calib = calib;
  sp.covariate_seed = covariate_seed;
  sp.realize_seed = seed;
  return sp;
}

/// True (ATE, ATO) of the population. The default uses the realized potential
/// outcomes; use_expected switches to the noise-free probabilities. The ATO
/// is the overlap-tilted mean with the true propensities as weights.
inline std::pair<double, double> true_estimands(const SuperPopulation& sp,
                                                bool use_expected = false) {
  double diff_sum = 0.0, omega_sum = 0.0, omega_diff_sum = 0.0;
  const Index n = sp.size();
  for (Index i = 0; i < n; ++i) {
    const double diff =
        use_expected ? sp.p1[i] - sp.p0[i]
                     : static_cast<double>(sp.y1[static_cast<std::size_t>(i)]) -
                           static_cast<double>(sp.y0[static_cast<std::size_t>(i)]);
    const double omega = sp.p_treat[i] * (1.0 - sp.p_treat[i]);
    diff_sum += diff;
    omega_sum += omega;
    omega_diff_sum += omega * diff;
  }
  return {diff_sum / static_cast<double>(n), omega_diff_sum / omega_sum};
}

// --- persistence: binary columnar file + JSON sidecar ---

namespace dgp_detail {

inline constexpr char kMagic[8] = {'P', 'S', 'P', 'O', 'P', 'v', '1', '\n'};

template <typename T>
void write_block(std::ofstream& out, const T* data, std::size_t count) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
}

template <typename T>
void read_block(std::ifstream& in, T* data, std::size_t count) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(count * sizeof(T)));
  if (!in) throw Error("truncated population file");
}

}  // namespace dgp_detail

/// Writes the population to `path` (little-endian columnar binary) and a JSON
/// sidecar at `path + ".json"` recording seeds, calibration, achieved targets
/// and true estimands.
inline void save_population(const SuperPopulation& sp, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  const auto n = static_cast<uint64_t>(sp.size());
  out.write(dgp_detail::kMagic, sizeof(dgp_detail::kMagic));
  dgp_detail::write_block(out, &n, 1);
  dgp_detail::write_block(out, sp.x.data(), static_cast<std::size_t>(sp.x.size()));
  dgp_detail::write_block(out, sp.p_treat.data(), n);
  dgp_detail::write_block(out, sp.p1.data(), n);
  dgp_detail::write_block(out, sp.p0.data(), n);
  dgp_detail::write_block(out, sp.z.data(), n);
  dgp_detail::write_block(out, sp.y1.data(), n);
  dgp_detail::write_block(out, sp.y0.data(), n);
  if (!out) throw Error("failed writing " + path);

  const auto [true_ate, true_ato] = true_estimands(sp, false);
  const auto [exp_ate, exp_ato] = true_estimands(sp, true);
  nlohmann::json meta;
  meta["format"] = "PSPOPv1";
  meta["n"] = n;
  meta["seeds"] = {{"covariates", sp.covariate_seed}, {"realize", sp.realize_seed}};
  meta["calibration"] = {{"alpha0_treat", sp.calib.alpha0_treat},
                         {"alpha0_outcome", sp.calib.alpha0_outcome},
                         {"alpha_treat", sp.calib.alpha_treat},
                         {"target_pz", sp.calib.target_pz},
                         {"target_py0", sp.calib.target_py0},
                         {"target_ate", sp.calib.target_ate},
                         {"achieved_pz", sp.calib.achieved_pz},
                         {"achieved_py0", sp.calib.achieved_py0},
                         {"achieved_ate", sp.calib.achieved_ate}};
  meta["true_estimands"] = {{"ate_realized", true_ate},
                            {"ato_realized", true_ato},
                            {"ate_expected", exp_ate},
                            {"ato_expected", exp_ato}};
  std::ofstream side(path + ".json");
  if (!side) throw Error("cannot open " + path + ".json for writing");
  side << meta.dump(2) << '\n';
}

inline SuperPopulation load_population(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, dgp_detail::kMagic, 8) != 0) {
    throw Error(path + " is not a population file");
  }
  uint64_t n = 0;
  dgp_detail::read_block(in, &n, 1);
  SuperPopulation sp;
  sp.x.resize(static_cast<Index>(n), 10);
  sp.p_treat.resize(static_cast<Index>(n));
  sp.p1.resize(static_cast<Index>(n));
  sp.p0.resize(static_cast<Index>(n));
  sp.z.resize(n);
  sp.y1.resize(n);
  sp.y0.resize(n);
  dgp_detail::read_block(in, sp.x.data(), static_cast<std::size_t>(sp.x.size()));
  dgp_detail::read_block(in, sp.p_treat.data(), n);
  dgp_detail::read_block(in, sp.p1.data(), n);
  dgp_detail::read_block(in, sp.p0.data(), n);
  dgp_detail::read_block(in, sp.z.data(), n);
  dgp_detail::read_block(in, sp.y1.data(), n);
  dgp_detail::read_block(in, sp.y0.data(), n);

  std::ifstream side(path + ".json");
  if (side) {
    nlohmann::json meta = nlohmann::json::parse(side);
    sp.covariate_seed = meta["seeds"]["covariates"].get<uint64_t>();
    sp.realize_seed = meta["seeds"]["realize"].get<uint64_t>();
    const auto& c = meta["calibration"];
    sp.calib.alpha0_treat = c["alpha0_treat"].get<double>();
    sp.calib.alpha0_outcome = c["alpha0_outcome"].get<double>();
    sp.calib.alpha_treat = c["alpha_treat"].get<double>();
    sp.calib.target_pz = c["target_pz"].get<double>();
    sp.calib.target_py0 = c["target_py0"].get<double>();
    sp.calib.target_ate = c["target_ate"].get<double>();
    sp.calib.achieved_pz = c["achieved_pz"].get<double>();
    sp.calib.achieved_py0 = c["achieved_py0"].get<double>();
    sp.calib.achieved_ate = c["achieved_ate"].get<double>();
  }
  return sp;
}

/// Dumps the population as CSV (x1..x10, p_treat, z, y1, y0, p1, p0).
inline void export_population_csv(const SuperPopulation& sp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path + " for writing");
  for (int j = 1; j <= 10; ++j) out << 'x' << j << ',';
  out << "p_treat,z,y1,y0,p1,p0\n";
  for (Index i = 0; i < sp.size(); ++i) {
    for (Index j = 0; j < 10; ++j) out << format_double(sp.x(i, j)) << ',';
    out << format_double(sp.p_treat[i]) << ',' << int(sp.z[static_cast<std::size_t>(i)]) << ','
        << int(sp.y1[static_cast<std::size_t>(i)]) << ',' << int(sp.y0[static_cast<std::size_t>(i)])
        << ',' << format_double(sp.p1[i]) << ',' << format_double(sp.p0[i]) << '\n';
  }
}

}  // namespace psinfer
