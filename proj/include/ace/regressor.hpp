#pragma once

#include <optional>

#include "ace/moments.hpp"
#include "ace/netcore.hpp"

namespace ace {

/// Gaussian weight posterior of a linear-in-parameters model with prior
/// precision a and noise precision b.
struct BayesPosterior {
  Vector mean;        // m_N
  Matrix covariance;  // S_N = (a I + b Phi^T Phi)^-1
  double prior_precision = 0.0;
  double noise_precision = 0.0;
  double log_evidence = 0.0;
};

/// Columns are u^0 .. u^order.
Matrix polynomial_design(const Vector& u, int order);

/// Conjugate posterior and log marginal likelihood for a given design matrix.
BayesPosterior bayes_fit(const Matrix& design, const Vector& y, double a, double b);
/// Same, with raw powers of `alphas` as the basis.
BayesPosterior bayes_fit(const Vector& alphas, const Vector& y, int order, double a, double b);
double log_evidence(const Vector& alphas, const Vector& y, int order, double a, double b);

struct Hyperparameters {
  double prior_precision = 0.0;
  double noise_precision = 0.0;
  bool converged = false;
};

/// Evidence maximisation by the alternating fixed-point updates for a and b.
/// Falls back to a = 1e-4, b = 1e2 if the iteration does not settle.
Hyperparameters optimize_hyperparameters(const Matrix& design, const Vector& y, Diagnostics* diag = nullptr);

/// Highest-evidence order in 0..max_order (ties go to the lower order).
/// Inputs are rescaled to [-1, 1] before the basis expansion.
int select_order(const Vector& alphas, const Vector& y, int max_order, double a, double b,
                 Diagnostics* diag = nullptr);
/// As above with the hyperparameters optimised per order on standardised
/// targets.
int select_order(const Vector& alphas, const Vector& y, int max_order, Diagnostics* diag = nullptr);

struct RegressorOptions {
  int max_order = 10;
  std::optional<int> order;  // skip model selection
  std::optional<double> prior_precision;
  std::optional<double> noise_precision;
};

/// Polynomial fit of an interventional-expectation sweep over `domain`.
/// The posterior lives in unit coordinates u = (2 alpha - low - high) / (high - low)
/// on targets (y - target_offset) / target_scale.
struct CausalRegressor {
  Domain domain;
  int order = 0;
  BayesPosterior posterior;
  double target_offset = 0.0;
  double target_scale = 1.0;
  double baseline = 0.0;

  double to_unit(double alpha) const { return (2.0 * alpha - domain.low - domain.high) / domain.width(); }
  /// Coefficients of the predictive mean as a polynomial in alpha.
  Vector raw_coefficients() const;
};

CausalRegressor fit_causal_regressor(const Vector& alphas, const Vector& ie, const Domain& domain,
                                     const RegressorOptions& options = {}, Diagnostics* diag = nullptr);

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;
  bool extrapolated = false;
};

Prediction predict(const CausalRegressor& reg, double alpha, Diagnostics* diag = nullptr);

/// Uniform-interval mean of the predictive mean over the fit domain.
double baseline(const CausalRegressor& reg);

double polynomial_value(const Vector& coefficients, double x);
/// (1 / (high - low)) * integral of sum_j c_j x^j over [low, high], by the power rule.
double polynomial_interval_mean(const Vector& coefficients, double low, double high);

}  // namespace ace
