#include "ace/netcore.hpp"

#include <string>

#include "gru_engine.hpp"
#include "mlp_engine.hpp"

namespace ace {

std::string_view to_string(Activation activation) {
  switch (activation) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
    case Activation::square: return "square";
    case Activation::relu: return "relu";
  }
  return "identity";
}

Activation parse_activation(std::string_view name) {
  for (Activation a : {Activation::identity, Activation::sigmoid, Activation::tanh,
                       Activation::softplus, Activation::square, Activation::relu}) {
    if (to_string(a) == name) return a;
  }
  throw Error(ErrorCode::parse, "unknown activation '" + std::string(name) + "'");
}

namespace {

void check_input(const Network& net, const Matrix& inputs) {
  if (inputs.rows() != net.input_dim())
    throw Error(ErrorCode::input_shape, "expected input of length " + std::to_string(net.input_dim()) +
                                            ", got " + std::to_string(inputs.rows()));
  if (!inputs.allFinite()) throw Error(ErrorCode::domain, "non-finite network input");
}

void check_output(Index output, Index output_dim) {
  if (output < 0 || output >= output_dim)
    throw Error(ErrorCode::input_shape, "output index " + std::to_string(output) + " out of range");
}

void warn_non_smooth(const Network& net, Diagnostics* diag) {
  if (!net.is_smooth())
    warn(diag, "non-smooth: relu network, second-order terms use the left-derivative convention");
}

// Forward-over-reverse on a cached trace: propagates tangents `directions`
// through the forward pass, then differentiates the backward pass along them.
Matrix hvp_from_trace(const Network& net, const detail::MlpTrace& trace, const Matrix& directions,
                      Index output) {
  const auto& layers = net.layers();
  const std::size_t depth = layers.size();

  std::vector<Matrix> dot_pre(depth);
  Matrix dot_post = directions;
  for (std::size_t l = 0; l < depth; ++l) {
    const Activation a = layers[l].activation;
    dot_pre[l] = layers[l].weights * dot_post;
    const Vector d1 = trace.pre[l].col(0).unaryExpr([a](double z) { return activation::first_derivative(a, z); });
    dot_post = d1.asDiagonal() * dot_pre[l];
  }

  Vector g = Vector::Zero(net.output_dim());
  g(output) = 1.0;
  Matrix dot_g = Matrix::Zero(net.output_dim(), directions.cols());
  for (std::size_t l = depth; l-- > 0;) {
    const Activation a = layers[l].activation;
    const Vector z = trace.pre[l].col(0);
    const Vector d1 = z.unaryExpr([a](double v) { return activation::first_derivative(a, v); });
    const Vector d2 = z.unaryExpr([a](double v) { return activation::second_derivative(a, v); });
    const Vector gz = d1.cwiseProduct(g);
    const Matrix dot_gz = d2.cwiseProduct(g).asDiagonal() * dot_pre[l] + d1.asDiagonal() * dot_g;
    g = layers[l].weights.transpose() * gz;
    dot_g = layers[l].weights.transpose() * dot_gz;
  }
  return dot_g;
}

}  // namespace

Vector forward(const Network& net, const Vector& x) {
  check_input(net, x);
  return detail::mlp_forward(net, x).post.back().col(0);
}

namespace {

void activate(Activation a, Matrix& z) {
  if (a != Activation::identity) z = z.unaryExpr([a](double v) { return activation::value(a, v); });
}

// Runs layers [first, end) on activated inputs `current`.
Matrix forward_from(const Network& net, std::size_t first, Matrix current) {
  const auto& layers = net.layers();
  Matrix next;
  for (std::size_t l = first; l < layers.size(); ++l) {
    next.noalias() = layers[l].weights * current;
    next.colwise() += layers[l].bias;
    activate(layers[l].activation, next);
    current.swap(next);
  }
  return current;
}

}  // namespace

Matrix forward_batch(const Network& net, const Matrix& inputs) {
  check_input(net, inputs);
  return forward_from(net, 0, inputs);
}

Vector forward_offsets(const Network& net, const Vector& mu, const Matrix& directions, double eps, Index output) {
  check_input(net, mu);
  check_output(output, net.output_dim());
  if (directions.rows() != mu.size()) throw Error(ErrorCode::input_shape, "direction length does not match the evaluation point");
  if (!directions.allFinite()) throw Error(ErrorCode::domain, "non-finite direction");
  const auto& first = net.layers().front();
  const Index r = directions.cols();
  const Vector centre = first.weights * mu + first.bias;
  Matrix shift;
  shift.noalias() = first.weights * directions;
  shift *= eps;
  Matrix z(centre.size(), 2 * r + 1);
  z.col(0) = centre;
  z.middleCols(1, r) = shift.colwise() + centre;
  z.middleCols(1 + r, r) = (-shift).colwise() + centre;
  activate(first.activation, z);
  return forward_from(net, 1, std::move(z)).row(output).transpose();
}

Vector gradient(const Network& net, const Vector& x, Index output, Diagnostics* diag) {
  check_input(net, x);
  check_output(output, net.output_dim());
  const detail::MlpTrace trace = detail::mlp_forward(net, x);
  if (detail::has_relu_kink(net, trace))
    warn(diag, "relu kink at evaluation point: one-sided derivative used");
  const auto& layers = net.layers();
  Vector g = Vector::Zero(net.output_dim());
  g(output) = 1.0;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Activation a = layers[l].activation;
    const Vector gz = g.cwiseProduct(
        trace.pre[l].col(0).unaryExpr([a](double z) { return activation::first_derivative(a, z); }));
    g = layers[l].weights.transpose() * gz;
  }
  return g;
}

Matrix hessian_vector_product(const Network& net, const Vector& x, const Matrix& directions,
                              Index output, Diagnostics* diag) {
  check_input(net, x);
  check_output(output, net.output_dim());
  if (directions.rows() != net.input_dim())
    throw Error(ErrorCode::input_shape, "direction length does not match input_dim");
  const detail::MlpTrace trace = detail::mlp_forward(net, x);
  warn_non_smooth(net, diag);
  if (detail::has_relu_kink(net, trace))
    warn(diag, "relu kink at evaluation point: one-sided derivative used");
  return hvp_from_trace(net, trace, directions, output);
}

Matrix hessian(const Network& net, const Vector& x, Index output, Index cap, Diagnostics* diag) {
  check_input(net, x);
  check_output(output, net.output_dim());
  const Index k = net.input_dim();
  if (k > cap)
    throw Error(ErrorCode::hessian_cap, "input dimension " + std::to_string(k) + " exceeds the Hessian cap " +
                                            std::to_string(cap) + "; use the directional approximation");
  const detail::MlpTrace trace = detail::mlp_forward(net, x);
  warn_non_smooth(net, diag);
  if (detail::has_relu_kink(net, trace))
    warn(diag, "relu kink at evaluation point: one-sided derivative used");
  Matrix h(k, k);
  Vector e = Vector::Zero(k);
  for (Index j = 0; j < k; ++j) {
    e(j) = 1.0;
    h.col(j) = hvp_from_trace(net, trace, e, output);
    e(j) = 0.0;
  }
  return h;
}

double directional_second_derivative(const Network& net, const Vector& mu, const Vector& v, double eps,
                                     Index output, Diagnostics* diag) {
  const NetworkOutput model(net, output);
  check_input(net, mu);
  if (!v.allFinite()) throw Error(ErrorCode::domain, "non-finite direction");
  warn_non_smooth(net, diag);
  return second_difference_sum(model, mu, v, eps, diag);
}

NetworkOutput::NetworkOutput(const Network& net, Index output) : net_(&net), output_(output) {
  check_output(output, net.output_dim());
}

double NetworkOutput::value(const Vector& x) const { return forward(*net_, x)(output_); }

Vector NetworkOutput::values(const Matrix& columns) const {
  return forward_batch(*net_, columns).row(output_).transpose();
}

Vector NetworkOutput::offset_values(const Vector& mu, const Matrix& directions, double eps) const {
  return forward_offsets(*net_, mu, directions, eps, output_);
}

Vector NetworkOutput::gradient(const Vector& x, Diagnostics* diag) const {
  return ace::gradient(*net_, x, output_, diag);
}

Matrix NetworkOutput::hessian(const Vector& x, Index cap, Diagnostics* diag) const {
  return ace::hessian(*net_, x, output_, cap, diag);
}

// ---------------------------------------------------------------------------

UnrollResult unroll(const GruNetwork& rnn, const Matrix& sequence, Index horizon,
                    std::span<const Override> overrides) {
  const Index k = rnn.input_dim();
  if (horizon < 1) throw Error(ErrorCode::invalid_argument, "unroll horizon must be >= 1");
  if (sequence.cols() != k && !(sequence.size() == 0 && rnn.outputs_feed_inputs()))
    throw Error(ErrorCode::input_shape, "sequence has " + std::to_string(sequence.cols()) +
                                            " features, network expects " + std::to_string(k));
  if (!sequence.allFinite()) throw Error(ErrorCode::domain, "non-finite sequence value");
  const Index provided = sequence.size() == 0 ? 0 : sequence.rows();
  if (provided == 0 && !rnn.outputs_feed_inputs())
    throw Error(ErrorCode::sequence_length, "empty sequence");
  if (horizon > provided && !rnn.outputs_feed_inputs())
    throw Error(ErrorCode::sequence_length, "horizon " + std::to_string(horizon) + " exceeds sequence length " +
                                                std::to_string(provided));
  for (const Override& o : overrides) {
    if (o.feature < 0 || o.feature >= k || o.step < 0 || o.step >= horizon)
      throw Error(ErrorCode::input_shape, "override references an invalid step or feature");
    if (!std::isfinite(o.value)) throw Error(ErrorCode::domain, "non-finite override value");
  }

  const auto& p = rnn.parameters();
  UnrollResult result;
  result.inputs.resize(horizon, k);
  result.hidden.resize(horizon, rnn.hidden_dim());
  result.outputs.resize(horizon, rnn.output_dim());
  Vector h = Vector::Zero(rnn.hidden_dim());
  Vector x(k);
  for (Index t = 0; t < horizon; ++t) {
    if (t < provided) {
      x = sequence.row(t).transpose();
    } else if (t == 0) {
      x = Vector::Zero(k);
    } else {
      x = result.outputs.row(t - 1).transpose();
    }
    for (const Override& o : overrides)
      if (o.step == t) x(o.feature) = o.value;
    const auto step = detail::gru_step<double>(p, x, h);
    result.inputs.row(t) = x.transpose();
    result.hidden.row(t) = step.h.transpose();
    result.outputs.row(t) = step.out.transpose();
    h = step.h;
  }
  return result;
}

std::vector<Matrix> output_input_jacobians(const GruNetwork& rnn, const Matrix& sequence, Index t,
                                           std::optional<Index> output) {
  if (t < 0) throw Error(ErrorCode::lag_out_of_range, "output step must be >= 0");
  if (output) check_output(*output, rnn.output_dim());
  const Index steps = t + 1;
  Matrix window;
  if (sequence.rows() >= steps) {
    if (sequence.cols() != rnn.input_dim()) throw Error(ErrorCode::input_shape, "sequence feature count mismatch");
    window = sequence.topRows(steps);
  } else if (rnn.outputs_feed_inputs()) {
    window = unroll(rnn, sequence, steps).inputs;
  } else {
    throw Error(ErrorCode::horizon, "output step " + std::to_string(t) + " beyond sequence length " +
                                        std::to_string(sequence.rows()));
  }
  const auto& p = rnn.parameters();
  const auto trace = detail::gru_forward<double>(p, window);
  const Index out_dim = rnn.output_dim();
  const Index rows = output ? 1 : out_dim;
  std::vector<Matrix> jac(static_cast<std::size_t>(steps), Matrix(rows, rnn.input_dim()));
  for (Index r = 0; r < rows; ++r) {
    const Index o = output ? *output : r;
    Matrix seeds = Matrix::Zero(steps, out_dim);
    seeds(t, o) = 1.0;
    const Matrix grad = detail::gru_backward<double>(p, trace, seeds);
    for (Index lag = 0; lag <= t; ++lag) jac[static_cast<std::size_t>(lag)].row(r) = grad.row(t - lag);
  }
  return jac;
}

Matrix output_input_jacobian(const GruNetwork& rnn, const Matrix& sequence, Index t, Index lag,
                             std::optional<Index> output) {
  if (lag < 0 || lag > t)
    throw Error(ErrorCode::lag_out_of_range, "lag " + std::to_string(lag) + " outside 0.." + std::to_string(t));
  return output_input_jacobians(rnn, sequence, t, output)[static_cast<std::size_t>(lag)];
}

Vector flatten_window(const Matrix& window) {
  Vector flat(window.size());
  for (Index s = 0; s < window.rows(); ++s) flat.segment(s * window.cols(), window.cols()) = window.row(s).transpose();
  return flat;
}

Matrix unflatten_window(const Vector& flat, Index features) {
  if (features < 1 || flat.size() % features != 0)
    throw Error(ErrorCode::input_shape, "flat window length is not a multiple of the feature count");
  const Index steps = flat.size() / features;
  Matrix window(steps, features);
  for (Index s = 0; s < steps; ++s) window.row(s) = flat.segment(s * features, features).transpose();
  return window;
}

UnrolledGruOutput::UnrolledGruOutput(const GruNetwork& rnn, Index steps, Index output)
    : rnn_(&rnn), steps_(steps), output_(output) {
  if (steps < 1) throw Error(ErrorCode::invalid_argument, "unrolled window needs at least one step");
  check_output(output, rnn.output_dim());
}

bool UnrolledGruOutput::is_smooth() const { return ace::is_smooth(rnn_->parameters().readout.activation); }

double UnrolledGruOutput::value(const Vector& flat) const {
  if (flat.size() != dimension()) throw Error(ErrorCode::input_shape, "window length mismatch");
  if (!flat.allFinite()) throw Error(ErrorCode::domain, "non-finite window value");
  const auto trace = detail::gru_forward<double>(rnn_->parameters(), unflatten_window(flat, rnn_->input_dim()));
  return trace.back().out(output_);
}

Vector UnrolledGruOutput::values(const Matrix& columns) const {
  Vector out(columns.cols());
  for (Index c = 0; c < columns.cols(); ++c) out(c) = value(columns.col(c));
  return out;
}

Vector UnrolledGruOutput::gradient(const Vector& flat, Diagnostics* diag) const {
  if (flat.size() != dimension()) throw Error(ErrorCode::input_shape, "window length mismatch");
  const auto& p = rnn_->parameters();
  const auto trace = detail::gru_forward<double>(p, unflatten_window(flat, rnn_->input_dim()));
  if (!is_smooth() && (trace.back().pre_out.array() == 0.0).any())
    warn(diag, "relu kink at evaluation point: one-sided derivative used");
  Matrix seeds = Matrix::Zero(steps_, rnn_->output_dim());
  seeds(steps_ - 1, output_) = 1.0;
  return flatten_window(detail::gru_backward<double>(p, trace, seeds));
}

Matrix UnrolledGruOutput::hessian(const Vector& flat, Index cap, Diagnostics* diag) const {
  const Index dim = dimension();
  if (flat.size() != dim) throw Error(ErrorCode::input_shape, "window length mismatch");
  if (dim > cap)
    throw Error(ErrorCode::hessian_cap, "unrolled window dimension " + std::to_string(dim) +
                                            " exceeds the Hessian cap; use the directional approximation");
  if (!is_smooth()) warn(diag, "non-smooth: relu readout, second-order terms use the left-derivative convention");
  const GruParameters<Dual> p = rnn_->parameters().cast<Dual>();
  const Index k = rnn_->input_dim();
  MatrixX<Dual> seeds = MatrixX<Dual>::Constant(steps_, rnn_->output_dim(), Dual(0.0));
  seeds(steps_ - 1, output_) = Dual(1.0);
  Matrix h(dim, dim);
  for (Index c = 0; c < dim; ++c) {
    MatrixX<Dual> window(steps_, k);
    for (Index s = 0; s < steps_; ++s)
      for (Index f = 0; f < k; ++f) window(s, f) = Dual(flat(s * k + f), s * k + f == c ? 1.0 : 0.0);
    const auto trace = detail::gru_forward<Dual>(p, window);
    const MatrixX<Dual> grad = detail::gru_backward<Dual>(p, trace, seeds);
    for (Index s = 0; s < steps_; ++s)
      for (Index f = 0; f < k; ++f) h(s * k + f, c) = grad(s, f).tangent;
  }
  return h;
}

}  // namespace ace
