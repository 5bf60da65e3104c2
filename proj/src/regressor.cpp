#include "ace/regressor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/SVD>

namespace ace {

namespace {

constexpr double kMaxCondition = 1e15;
constexpr double kPriorPrecisionMax = 1e10;
constexpr double kPriorPrecisionMin = 1e-10;
constexpr double kNoisePrecisionMax = 1e12;  // in units of 1 / mean(y^2)
constexpr double kNoisePrecisionMin = 1e-6;
constexpr int kMaxHyperIterations = 1000;
// Evidence gap, in nats, below which the lower order is preferred.
constexpr double kEvidenceTieMargin = 1.0;

void check_hyper(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b))
    throw Error(ErrorCode::invalid_argument, "precisions must be positive and finite");
}

/// Thin SVD of the design shared by posterior evaluations with different (a, b).
struct DesignSvd {
  Matrix u;       // N x p
  Vector s;       // p
  Matrix v;       // M x M
  Index n = 0;
  Index m = 0;

  explicit DesignSvd(const Matrix& design) : n(design.rows()), m(design.cols()) {
    Eigen::JacobiSVD<Matrix> svd(design, Eigen::ComputeThinU | Eigen::ComputeFullV);
    u = svd.matrixU();
    s = svd.singularValues();
    v = svd.matrixV();
  }

  /// Eigenvalues of a I + b Phi^T Phi, aligned with the columns of v.
  Vector precision_spectrum(double a, double b) const {
    Vector lam = Vector::Constant(m, a);
    lam.head(s.size()) += b * s.cwiseAbs2();
    return lam;
  }

  Vector posterior_mean(const Vector& y, double a, double b) const {
    const Vector proj = u.transpose() * y;
    Vector coef(s.size());
    for (Index j = 0; j < s.size(); ++j) coef(j) = b * s(j) / (a + b * s(j) * s(j)) * proj(j);
    return v.leftCols(s.size()) * coef;
  }
};

BayesPosterior fit_with_svd(const DesignSvd& svd, const Matrix& design, const Vector& y, double a, double b) {
  check_hyper(a, b);
  const Vector lam = svd.precision_spectrum(a, b);
  if (lam.maxCoeff() / lam.minCoeff() > kMaxCondition)
    throw Error(ErrorCode::ill_conditioned,
                "normal matrix is ill-conditioned (condition " + std::to_string(lam.maxCoeff() / lam.minCoeff()) +
                    "); rescale alpha to [-1, 1] or lower the order");
  BayesPosterior post;
  post.prior_precision = a;
  post.noise_precision = b;
  post.mean = svd.posterior_mean(y, a, b);
  post.covariance = svd.v * lam.cwiseInverse().asDiagonal() * svd.v.transpose();
  const double residual = (y - design * post.mean).squaredNorm();
  const double energy = 0.5 * b * residual + 0.5 * a * post.mean.squaredNorm();
  const double n = static_cast<double>(svd.n);
  const double m = static_cast<double>(svd.m);
  post.log_evidence = 0.5 * m * std::log(a) + 0.5 * n * std::log(b) - energy -
                      0.5 * lam.array().log().sum() - 0.5 * n * std::log(2.0 * std::numbers::pi);
  return post;
}

void check_data(const Vector& alphas, const Vector& y) {
  if (alphas.size() != y.size()) throw Error(ErrorCode::input_shape, "alpha and target lengths differ");
  if (alphas.size() == 0) throw Error(ErrorCode::empty_data, "no points to fit");
  if (!alphas.allFinite() || !y.allFinite()) throw Error(ErrorCode::domain, "non-finite regression data");
}

Vector to_unit(const Vector& alphas, const Domain& d) {
  return ((2.0 * alphas.array() - d.low - d.high) / d.width()).matrix();
}

Domain span_of(const Vector& alphas) {
  const Domain d{alphas.minCoeff(), alphas.maxCoeff()};
  if (!(d.high > d.low)) throw Error(ErrorCode::single_point_domain, "all alpha values coincide");
  return d;
}

/// Targets shifted to zero mean and unit spread; an (almost) constant
/// sweep maps to exact zeros.
struct Standardized {
  Vector y;
  double offset = 0.0;
  double scale = 1.0;
};

Standardized standardize(const Vector& y) {
  Standardized s;
  s.offset = y.mean();
  const double spread = std::sqrt((y.array() - s.offset).square().mean());
  if (spread <= 1e-12 * std::max(1.0, std::abs(s.offset))) {
    s.y = Vector::Zero(y.size());
    s.scale = 1.0;
  } else {
    s.scale = spread;
    s.y = (y.array() - s.offset) / spread;
  }
  return s;
}

struct Candidate {
  int order = 0;
  BayesPosterior posterior;
  double residual = 0.0;
};

int choose(const std::vector<Candidate>& candidates, const Vector& y) {
  // Guard: ignore orders fitting far worse than the richest one considered.
  const double limit = 10.0 * candidates.back().residual + 1e-20 * (y.squaredNorm() + static_cast<double>(y.size()));
  double best_ev = -std::numeric_limits<double>::infinity();
  for (const Candidate& c : candidates)
    if (c.residual <= limit) best_ev = std::max(best_ev, c.posterior.log_evidence);
  // Lowest order whose evidence is within kEvidenceTieMargin of the best.
  for (std::size_t c = 0; c < candidates.size(); ++c) {
    if (candidates[c].residual <= limit && candidates[c].posterior.log_evidence >= best_ev - kEvidenceTieMargin)
      return static_cast<int>(c);
  }
  return static_cast<int>(candidates.size()) - 1;
}

int usable_max_order(Index n, int max_order, Diagnostics* diag) {
  if (max_order < 0) throw Error(ErrorCode::invalid_argument, "max_order must be >= 0");
  const int cap = static_cast<int>(n) - 1;
  if (max_order > cap) {
    warn(diag, "only " + std::to_string(n) + " sweep points for max order " + std::to_string(max_order) +
                   ": orders above " + std::to_string(cap) +
                   " are unidentifiable, more sampling of the interventional expectation may be required");
    return cap;
  }
  return max_order;
}

BayesPosterior optimized_fit(const Matrix& design, const Vector& y, Diagnostics* diag) {
  const Hyperparameters h = optimize_hyperparameters(design, y, diag);
  return bayes_fit(design, y, h.prior_precision, h.noise_precision);
}

}  // namespace

Matrix polynomial_design(const Vector& u, int order) {
  if (order < 0) throw Error(ErrorCode::invalid_argument, "polynomial order must be >= 0");
  Matrix phi(u.size(), order + 1);
  phi.col(0).setOnes();
  for (int j = 1; j <= order; ++j) phi.col(j) = phi.col(j - 1).cwiseProduct(u);
  return phi;
}

BayesPosterior bayes_fit(const Matrix& design, const Vector& y, double a, double b) {
  if (design.rows() != y.size()) throw Error(ErrorCode::input_shape, "design rows do not match targets");
  if (!design.allFinite() || !y.allFinite()) throw Error(ErrorCode::domain, "non-finite regression data");
  return fit_with_svd(DesignSvd(design), design, y, a, b);
}

BayesPosterior bayes_fit(const Vector& alphas, const Vector& y, int order, double a, double b) {
  check_data(alphas, y);
  return bayes_fit(polynomial_design(alphas, order), y, a, b);
}

double log_evidence(const Vector& alphas, const Vector& y, int order, double a, double b) {
  return bayes_fit(alphas, y, order, a, b).log_evidence;
}

Hyperparameters optimize_hyperparameters(const Matrix& design, const Vector& y, Diagnostics* diag) {
  if (design.rows() != y.size()) throw Error(ErrorCode::input_shape, "design rows do not match targets");
  const DesignSvd svd(design);
  const double n = static_cast<double>(design.rows());
  const double mean_sq = y.squaredNorm() / n;
  const double unit = mean_sq > 0.0 ? mean_sq : 1.0;
  const double b_max = kNoisePrecisionMax / unit;
  const double b_min = kNoisePrecisionMin / unit;
  const double s_max2 = svd.s.size() > 0 ? svd.s(0) * svd.s(0) : 0.0;
  const auto a_floor = [&](double b) { return std::max(kPriorPrecisionMin, 1e-13 * b * s_max2); };

  const double var = (y.array() - y.mean()).square().mean();
  double b = std::clamp(var > 0.0 ? 1.0 / var : b_max, b_min, b_max);
  double a = std::clamp(1.0, a_floor(b), kPriorPrecisionMax);
  for (int it = 0; it < kMaxHyperIterations; ++it) {
    const Vector m = svd.posterior_mean(y, a, b);
    double gamma = 0.0;
    for (Index j = 0; j < svd.s.size(); ++j) {
      const double lam = b * svd.s(j) * svd.s(j);
      gamma += lam / (a + lam);
    }
    const double mm = m.squaredNorm();
    const double residual = (y - design * m).squaredNorm();
    double b_new = (n - gamma > 0.0 && residual > 0.0) ? (n - gamma) / residual : b_max;
    b_new = std::clamp(b_new, b_min, b_max);
    double a_new = mm > 0.0 ? gamma / mm : kPriorPrecisionMax;
    a_new = std::clamp(a_new, a_floor(b_new), kPriorPrecisionMax);
    const bool settled = std::abs(std::log(a_new / a)) < 1e-9 && std::abs(std::log(b_new / b)) < 1e-9;
    a = a_new;
    b = b_new;
    if (settled) return {a, b, true};
  }
  warn(diag, "hyperparameter iteration did not settle; using a = 1e-4, b = 1e2");
  return {1e-4, 1e2, false};
}

int select_order(const Vector& alphas, const Vector& y, int max_order, double a, double b, Diagnostics* diag) {
  check_data(alphas, y);
  check_hyper(a, b);
  const Vector u = to_unit(alphas, span_of(alphas));
  const int top = usable_max_order(y.size(), max_order, diag);
  std::vector<Candidate> candidates;
  for (int d = 0; d <= top; ++d) {
    const Matrix phi = polynomial_design(u, d);
    Candidate c{d, bayes_fit(phi, y, a, b), 0.0};
    c.residual = (y - phi * c.posterior.mean).squaredNorm();
    candidates.push_back(std::move(c));
  }
  return candidates[static_cast<std::size_t>(choose(candidates, y))].order;
}

int select_order(const Vector& alphas, const Vector& y, int max_order, Diagnostics* diag) {
  check_data(alphas, y);
  const Vector u = to_unit(alphas, span_of(alphas));
  const Standardized st = standardize(y);
  const int top = usable_max_order(y.size(), max_order, diag);
  std::vector<Candidate> candidates;
  for (int d = 0; d <= top; ++d) {
    const Matrix phi = polynomial_design(u, d);
    Candidate c{d, optimized_fit(phi, st.y, diag), 0.0};
    c.residual = (st.y - phi * c.posterior.mean).squaredNorm();
    candidates.push_back(std::move(c));
  }
  return candidates[static_cast<std::size_t>(choose(candidates, st.y))].order;
}

Vector CausalRegressor::raw_coefficients() const {
  // p(u) with u = s * alpha + t, expanded binomially.
  const double s = 2.0 / domain.width();
  const double t = -(domain.low + domain.high) / domain.width();
  const Vector& c = posterior.mean;
  Vector raw = Vector::Zero(c.size());
  for (Index j = 0; j < c.size(); ++j) {
    double binom = 1.0;
    for (Index m = 0; m <= j; ++m) {
      raw(m) += c(j) * binom * std::pow(s, static_cast<double>(m)) * std::pow(t, static_cast<double>(j - m));
      binom = binom * static_cast<double>(j - m) / static_cast<double>(m + 1);
    }
  }
  raw *= target_scale;
  raw(0) += target_offset;
  return raw;
}

CausalRegressor fit_causal_regressor(const Vector& alphas, const Vector& ie, const Domain& domain,
                                     const RegressorOptions& options, Diagnostics* diag) {
  check_data(alphas, ie);
  if (alphas.size() < 2) throw Error(ErrorCode::invalid_argument, "a causal regressor needs at least two sweep points");
  if (!(domain.high > domain.low)) throw Error(ErrorCode::single_point_domain, "fit domain has zero width");
  const bool fixed = options.prior_precision.has_value() || options.noise_precision.has_value();
  if (fixed && !(options.prior_precision && options.noise_precision))
    throw Error(ErrorCode::invalid_argument, "give both precisions or neither");

  CausalRegressor reg;
  reg.domain = domain;
  const Vector u = to_unit(alphas, domain);
  Vector y = ie;
  if (!fixed) {
    const Standardized st = standardize(ie);
    reg.target_offset = st.offset;
    reg.target_scale = st.scale;
    y = st.y;
  }

  const auto fit_order = [&](int d) {
    const Matrix phi = polynomial_design(u, d);
    return fixed ? bayes_fit(phi, y, *options.prior_precision, *options.noise_precision)
                 : optimized_fit(phi, y, diag);
  };

  if (options.order) {
    reg.order = *options.order;
    reg.posterior = fit_order(reg.order);
  } else {
    const int top = usable_max_order(y.size(), options.max_order, diag);
    std::vector<Candidate> candidates;
    for (int d = 0; d <= top; ++d) {
      Candidate c{d, fit_order(d), 0.0};
      c.residual = (y - polynomial_design(u, d) * c.posterior.mean).squaredNorm();
      candidates.push_back(std::move(c));
    }
    const auto& best = candidates[static_cast<std::size_t>(choose(candidates, y))];
    reg.order = best.order;
    reg.posterior = best.posterior;
  }
  reg.baseline = baseline(reg);

  double max_sd = 0.0;
  for (Index j = 0; j < alphas.size(); ++j) max_sd = std::max(max_sd, std::sqrt(predict(reg, alphas(j)).variance));
  const double range = ie.maxCoeff() - ie.minCoeff();
  if (max_sd > 0.1 * std::max(range, 1e-8 * std::max(1.0, std::abs(ie.mean()))))
    warn(diag, "high predictive variance (sd " + std::to_string(max_sd) + " vs sweep range " + std::to_string(range) +
                   "): more sampling of the interventional expectation may be required");
  return reg;
}

Prediction predict(const CausalRegressor& reg, double alpha, Diagnostics* diag) {
  Prediction p;
  p.extrapolated = !reg.domain.contains(alpha);
  if (p.extrapolated)
    warn(diag, "alpha " + std::to_string(alpha) + " outside the fit domain: extrapolating");
  const Vector phi = polynomial_design(Vector::Constant(1, reg.to_unit(alpha)), reg.order).row(0).transpose();
  p.mean = reg.target_offset + reg.target_scale * phi.dot(reg.posterior.mean);
  p.variance = reg.target_scale * reg.target_scale *
               (1.0 / reg.posterior.noise_precision + phi.dot(reg.posterior.covariance * phi));
  return p;
}

double baseline(const CausalRegressor& reg) {
  return reg.target_offset + reg.target_scale * polynomial_interval_mean(reg.posterior.mean, -1.0, 1.0);
}

double polynomial_value(const Vector& coefficients, double x) {
  double acc = 0.0;
  for (Index j = coefficients.size() - 1; j >= 0; --j) acc = acc * x + coefficients(j);
  return acc;
}

double polynomial_interval_mean(const Vector& coefficients, double low, double high) {
  if (!(high > low)) throw Error(ErrorCode::single_point_domain, "integration interval has zero width");
  // Antiderivative evaluated by Horner: sum_j c_j x^(j+1) / (j+1).
  const auto antiderivative = [&](double x) {
    double acc = 0.0;
    for (Index j = coefficients.size() - 1; j >= 0; --j) acc = acc * x + coefficients(j) / static_cast<double>(j + 1);
    return acc * x;
  };
  return (antiderivative(high) - antiderivative(low)) / (high - low);
}

}  // namespace ace
