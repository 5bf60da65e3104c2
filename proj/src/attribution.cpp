#include "ace/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "ace/oracle.hpp"
#include "parallel.hpp"

namespace ace {

std::string_view to_string(Method method) {
  switch (method) {
    case Method::exact_taylor: return "exact_taylor";
    case Method::approx_directional: return "approx_directional";
    case Method::oracle: return "oracle";
  }
  return "exact_taylor";
}

Method parse_method(std::string_view name) {
  if (name == "exact" || name == "exact_taylor") return Method::exact_taylor;
  if (name == "approx" || name == "approx_directional") return Method::approx_directional;
  if (name == "oracle") return Method::oracle;
  throw Error(ErrorCode::invalid_argument, "unknown method '" + std::string(name) + "'");
}

InterventionGrid make_grid(Index feature, const Domain& domain, Index num, std::optional<Index> step) {
  if (num < 2) throw Error(ErrorCode::invalid_argument, "a sweep needs num >= 2");
  if (!std::isfinite(domain.low) || !std::isfinite(domain.high))
    throw Error(ErrorCode::domain, "non-finite intervention domain");
  if (!(domain.high > domain.low))
    throw Error(ErrorCode::single_point_domain, "intervention domain [" + std::to_string(domain.low) + ", " +
                                                    std::to_string(domain.high) + "] has zero width");
  InterventionGrid grid{feature, step, domain, Vector::LinSpaced(num, domain.low, domain.high)};
  grid.alphas(num - 1) = domain.high;
  return grid;
}

namespace {

double trace_product(const Matrix& hessian, const Matrix& cov) {
  return hessian.cwiseProduct(cov.transpose()).sum();
}

template <typename Model>
double taylor_exact(const Model& model, const Moments& intervened, Index cap, Diagnostics* diag) {
  const Matrix h = model.hessian(intervened.mu, cap, diag);
  return model.value(intervened.mu) + 0.5 * trace_product(h, intervened.cov);
}

template <typename Model>
double taylor_approx(const Model& model, const Vector& mu, const Matrix& directions, double eps, Diagnostics* diag) {
  if (!model.is_smooth()) warn(diag, "non-smooth: relu network, second differences straddle kinks");
  if (directions.cols() == 0) return model.value(mu);
  return model.value(mu) + 0.5 * second_difference_sum(model, mu, directions, eps, diag);
}

void check_feature(Index i, Index k) {
  if (i < 0 || i >= k) throw Error(ErrorCode::input_shape, "feature index " + std::to_string(i) + " out of range");
}

}  // namespace

double ie_exact(const Network& net, const Moments& moments, Index i, double alpha, Index output, Index hessian_cap,
                Diagnostics* diag) {
  if (moments.dimension() != net.input_dim()) throw Error(ErrorCode::input_shape, "moments do not match the network");
  const NetworkOutput model(net, output);
  return taylor_exact(model, intervene(moments, i, alpha), hessian_cap, diag);
}

double ie_approx(const Network& net, const Moments& moments, Index i, double alpha, double eps, Index output,
                 Diagnostics* diag) {
  if (moments.dimension() != net.input_dim()) throw Error(ErrorCode::input_shape, "moments do not match the network");
  const NetworkOutput model(net, output);
  const Moments intervened = intervene(moments, i, alpha);
  return taylor_approx(model, intervened.mu, eigendecompose(intervened).scaled_directions(), eps, diag);
}

InterventionSweep sweep_feedforward(const Network& net, const Dataset& data, Index i, Index output,
                                    const SweepOptions& options, Diagnostics* diag) {
  check_feature(i, data.features());
  if (data.features() != net.input_dim()) throw Error(ErrorCode::input_shape, "dataset width does not match the network");
  const NetworkOutput model(net, output);
  InterventionSweep sweep;
  sweep.grid = make_grid(i, options.domain.value_or(data.domains.at(static_cast<std::size_t>(i))), options.num);
  sweep.method = options.method;
  sweep.output = output;
  const Index num = sweep.grid.alphas.size();
  sweep.ie.resize(num);

  if (sweep.method == Method::exact_taylor && net.input_dim() > options.hessian_cap) {
    warn(diag, "input dimension " + std::to_string(net.input_dim()) +
                   " exceeds the Hessian cap; using the directional approximation");
    sweep.method = Method::approx_directional;
  }

  if (sweep.method == Method::oracle) {
    detail::parallel_for(num, options.threads, [&](Index j) {
      sweep.ie(j) = enumerate_ie(net, data, i, sweep.grid.alphas(j), output);
    });
    return sweep;
  }

  // The intervened covariance does not depend on alpha; only mu[i] moves.
  const Moments observed = empirical_moments(data);
  const Moments intervened = intervene(observed, i, sweep.grid.alphas(0));
  Matrix directions;
  if (sweep.method == Method::approx_directional) directions = eigendecompose(intervened).scaled_directions();

  detail::parallel_for(num, options.threads, [&](Index j) {
    Moments at = intervened;
    at.mu(i) = sweep.grid.alphas(j);
    at.intervened_on = Intervention{i, sweep.grid.alphas(j)};
    sweep.ie(j) = sweep.method == Method::exact_taylor
                      ? taylor_exact(model, at, options.hessian_cap, diag)
                      : taylor_approx(model, at.mu, directions, options.eps, diag);
  });
  return sweep;
}

namespace {

/// Flattened input windows (one row per replayed sequence) under the override.
Matrix replay_windows(const GruNetwork& rnn, const SequenceDataset& data, Index i, Index step, Index t_out,
                      double alpha) {
  const bool feedback = rnn.outputs_feed_inputs();
  const Index needed = feedback ? step + 1 : t_out + 1;
  const Index width = (t_out + 1) * rnn.input_dim();
  const Override ov{step, i, alpha};
  std::vector<Vector> rows;
  for (const Matrix& seq : data.sequences) {
    if (seq.rows() < needed) continue;
    rows.push_back(flatten_window(unroll(rnn, seq.topRows(needed), t_out + 1, std::span<const Override>(&ov, 1)).inputs));
  }
  if (rows.empty()) throw Error(ErrorCode::horizon, "no sequence covers step " + std::to_string(needed - 1));
  Matrix windows(static_cast<Index>(rows.size()), width);
  for (std::size_t r = 0; r < rows.size(); ++r) windows.row(static_cast<Index>(r)) = rows[r].transpose();
  return windows;
}

}  // namespace

InterventionSweep sweep_recurrent(const GruNetwork& rnn, const SequenceDataset& data, Index i, Index step,
                                  Index t_out, Index output, const SweepOptions& options, Diagnostics* diag) {
  if (data.sequences.empty()) throw Error(ErrorCode::empty_data, "sequence dataset is empty");
  check_feature(i, rnn.input_dim());
  if (data.features() != rnn.input_dim()) throw Error(ErrorCode::input_shape, "sequence width does not match the network");
  if (step < 0 || step > t_out) throw Error(ErrorCode::invalid_argument, "intervened step must lie in 0..t_out");
  if (!rnn.outputs_feed_inputs() && t_out >= data.max_length())
    throw Error(ErrorCode::horizon, "output step " + std::to_string(t_out) + " beyond every sequence");

  const UnrolledGruOutput model(rnn, t_out + 1, output);
  InterventionSweep sweep;
  sweep.grid = make_grid(i, options.domain.value_or(data.slot_domain(step, i)), options.num, step);
  sweep.method = options.method;
  sweep.output = output;
  const Index num = sweep.grid.alphas.size();
  sweep.ie.resize(num);
  if (sweep.method == Method::exact_taylor && model.dimension() > options.hessian_cap) {
    warn(diag, "unrolled window exceeds the Hessian cap; using the directional approximation");
    sweep.method = Method::approx_directional;
  }
  const Index slot = step * rnn.input_dim() + i;

  detail::parallel_for(num, options.threads, [&](Index j) {
    const double alpha = sweep.grid.alphas(j);
    if (sweep.method == Method::oracle) {
      sweep.ie(j) = enumerate_ie_recurrent(rnn, data, i, step, t_out, alpha, output);
      return;
    }
    const Moments intervened = intervene(empirical_moments(replay_windows(rnn, data, i, step, t_out, alpha)), slot, alpha);
    sweep.ie(j) = sweep.method == Method::exact_taylor
                      ? taylor_exact(model, intervened, options.hessian_cap, diag)
                      : taylor_approx(model, intervened.mu, eigendecompose(intervened).scaled_directions(),
                                      options.eps, diag);
  });
  return sweep;
}

double sweep_baseline(const InterventionSweep& sweep, const InterventionWeight& weight) {
  const Vector& a = sweep.grid.alphas;
  const Vector& y = sweep.ie;
  if (a.size() < 2 || y.size() != a.size()) throw Error(ErrorCode::input_shape, "sweep needs at least two points");
  double num = 0.0;
  double den = 0.0;
  for (Index j = 0; j + 1 < a.size(); ++j) {
    const double w0 = weight ? weight(a(j)) : 1.0;
    const double w1 = weight ? weight(a(j + 1)) : 1.0;
    const double h = a(j + 1) - a(j);
    num += 0.5 * h * (w0 * (y(j) - y(0)) + w1 * (y(j + 1) - y(0)));
    den += 0.5 * h * (w0 + w1);
  }
  if (!(den > 0.0)) throw Error(ErrorCode::domain, "intervention weight integrates to zero");
  // Centred on y(0) so a constant sweep has a bit-exact baseline.
  return y(0) + num / den;
}

AceResult ace_at(const InterventionSweep& sweep, double alpha, Diagnostics* diag) {
  const Vector& a = sweep.grid.alphas;
  if (!sweep.grid.domain.contains(alpha))
    warn(diag, "alpha " + std::to_string(alpha) + " outside the sweep domain: extrapolating");
  const Index n = a.size();
  Index j = 0;
  while (j + 2 < n && alpha > a(j + 1)) ++j;
  const double t = (alpha - a(j)) / (a(j + 1) - a(j));
  AceResult r;
  r.alpha = alpha;
  r.ie = (1.0 - t) * sweep.ie(j) + t * sweep.ie(j + 1);
  r.baseline = sweep_baseline(sweep);
  r.ace = r.ie - r.baseline;
  return r;
}

AceResult ace_at(const CausalRegressor& reg, double alpha, Diagnostics* diag) {
  const Prediction p = predict(reg, alpha, diag);
  AceResult r;
  r.alpha = alpha;
  r.ie = p.mean;
  r.baseline = reg.baseline;
  r.ace = r.ie - r.baseline;
  r.predictive_variance = p.variance;
  return r;
}

double ice(const Network& net, const Vector& u, Index i, double alpha, Index output) {
  check_feature(i, net.input_dim());
  Vector intervened = u;
  intervened(i) = alpha;
  Matrix both(u.size(), 2);
  both << intervened, u;
  const Matrix y = forward_batch(net, both);
  if (output < 0 || output >= y.rows()) throw Error(ErrorCode::input_shape, "output index out of range");
  return y(output, 0) - y(output, 1);
}

Vector saliency(const Network& net, const Dataset& data, const Vector& instance, Index output,
                const SaliencyOptions& options, Diagnostics* diag) {
  if (instance.size() != data.features()) throw Error(ErrorCode::input_shape, "instance width does not match the data");
  Vector map(instance.size());
  for (Index j = 0; j < instance.size(); ++j) {
    SweepOptions sweep_opts = options.sweep;
    sweep_opts.domain.reset();
    const InterventionSweep sweep = sweep_feedforward(net, data, j, output, sweep_opts, diag);
    const CausalRegressor reg = fit_causal_regressor(sweep.grid.alphas, sweep.ie, sweep.grid.domain, options.regressor, diag);
    map(j) = ace_at(reg, instance(j), diag).ace;
  }
  if (options.positive_only) map = map.cwiseMax(0.0);
  return map;
}

Matrix saliency(const GruNetwork& rnn, const SequenceDataset& data, const Matrix& instance, Index output,
                const SaliencyOptions& options, Diagnostics* diag) {
  if (instance.cols() != rnn.input_dim() || instance.rows() < 1)
    throw Error(ErrorCode::input_shape, "instance must be a steps x input_dim sequence");
  const Index t_out = instance.rows() - 1;
  Matrix map(instance.rows(), instance.cols());
  for (Index s = 0; s <= t_out; ++s) {
    for (Index j = 0; j < instance.cols(); ++j) {
      SweepOptions sweep_opts = options.sweep;
      sweep_opts.domain.reset();
      const InterventionSweep sweep = sweep_recurrent(rnn, data, j, s, t_out, output, sweep_opts, diag);
      const CausalRegressor reg =
          fit_causal_regressor(sweep.grid.alphas, sweep.ie, sweep.grid.domain, options.regressor, diag);
      map(s, j) = ace_at(reg, instance(s, j), diag).ace;
    }
  }
  if (options.positive_only) map = map.cwiseMax(0.0);
  return map;
}

double dependence_measure(const Matrix& jacobian) {
  if (jacobian.size() == 0) return 0.0;
  if (jacobian.rows() == 1) return jacobian.cwiseAbs().maxCoeff();
  if (jacobian.rows() == jacobian.cols()) return std::abs(jacobian.determinant());
  return Eigen::JacobiSVD<Matrix>(jacobian).singularValues().minCoeff();
}

Index sequence_lag(const GruNetwork& rnn, const Matrix& sequence, Index t, std::optional<Index> output, double tol) {
  const std::vector<Matrix> jac = output_input_jacobians(rnn, sequence, t, output);
  for (Index lag = t; lag >= 0; --lag)
    if (dependence_measure(jac[static_cast<std::size_t>(lag)]) > tol) return lag;
  return 0;
}

TauResult tau(const GruNetwork& rnn, const SequenceDataset& data, Index t, std::optional<Index> output, double tol) {
  if (data.sequences.empty()) throw Error(ErrorCode::empty_data, "sequence dataset is empty");
  if (t < 0) throw Error(ErrorCode::lag_out_of_range, "output step must be >= 0");
  TauResult result;
  double total = 0.0;
  for (const Matrix& seq : data.sequences) {
    if (seq.rows() < t + 1 && !rnn.outputs_feed_inputs()) continue;
    const Index lag = sequence_lag(rnn, seq, t, output, tol);
    result.per_sequence.push_back(lag);
    total += static_cast<double>(lag);
  }
  if (result.per_sequence.empty())
    throw Error(ErrorCode::horizon, "no sequence reaches step " + std::to_string(t));
  result.tau = static_cast<Index>(std::lround(total / static_cast<double>(result.per_sequence.size())));
  return result;
}

}  // namespace ace
