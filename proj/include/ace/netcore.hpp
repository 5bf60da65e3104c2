#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "ace/dual.hpp"
#include "ace/error.hpp"

namespace ace {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Step used by the three-point directional second derivative.
inline constexpr double kDefaultSecondDifferenceStep = 1e-4;
/// Input dimension above which full Hessians are refused.
inline constexpr Index kDefaultHessianCap = 1024;

enum class Activation { identity, sigmoid, tanh, softplus, square, relu };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view name);

/// relu is the only activation without a continuous second derivative.
constexpr bool is_smooth(Activation activation) { return activation != Activation::relu; }

namespace activation {

template <typename T>
T sigmoid(const T& z) {
  using std::exp;
  if (z >= T(0.0)) return T(1.0) / (T(1.0) + exp(-z));
  const T e = exp(z);
  return e / (T(1.0) + e);
}

template <typename T>
T value(Activation a, const T& z) {
  using std::exp;
  using std::log1p;
  using std::tanh;
  switch (a) {
    case Activation::identity: return z;
    case Activation::sigmoid: return sigmoid(z);
    case Activation::tanh: return tanh(z);
    case Activation::softplus:
      return z > T(0.0) ? z + log1p(exp(-z)) : log1p(exp(z));
    case Activation::square: return z * z;
    case Activation::relu: return z > T(0.0) ? z : T(0.0);
  }
  return z;
}

// relu uses the left derivative at 0.
template <typename T>
T first_derivative(Activation a, const T& z) {
  using std::tanh;
  switch (a) {
    case Activation::identity: return T(1.0);
    case Activation::sigmoid:
    case Activation::softplus: {
      const T s = sigmoid(z);
      return a == Activation::softplus ? s : s * (T(1.0) - s);
    }
    case Activation::tanh: {
      const T t = tanh(z);
      return T(1.0) - t * t;
    }
    case Activation::square: return T(2.0) * z;
    case Activation::relu: return z > T(0.0) ? T(1.0) : T(0.0);
  }
  return T(1.0);
}

template <typename T>
T second_derivative(Activation a, const T& z) {
  using std::tanh;
  switch (a) {
    case Activation::identity:
    case Activation::relu: return T(0.0);
    case Activation::sigmoid: {
      const T s = sigmoid(z);
      return s * (T(1.0) - s) * (T(1.0) - T(2.0) * s);
    }
    case Activation::softplus: {
      const T s = sigmoid(z);
      return s * (T(1.0) - s);
    }
    case Activation::tanh: {
      const T t = tanh(z);
      return T(-2.0) * t * (T(1.0) - t * t);
    }
    case Activation::square: return T(2.0);
  }
  return T(0.0);
}

}  // namespace activation

template <typename Scalar>
struct DenseLayer {
  MatrixX<Scalar> weights;  // out x in
  VectorX<Scalar> bias;
  Activation activation = Activation::identity;

  Index input_dim() const { return weights.cols(); }
  Index output_dim() const { return weights.rows(); }

  /// Pre-activations for a batch of column inputs.
  template <typename Derived>
  MatrixX<Scalar> preactivation(const Eigen::MatrixBase<Derived>& x) const {
    return (weights * x).colwise() + bias;
  }
};

/// Layered feed-forward network, the causal mechanism from inputs to outputs.
template <typename Scalar>
class BasicNetwork {
 public:
  using Layer = DenseLayer<Scalar>;

  explicit BasicNetwork(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw Error(ErrorCode::input_shape, "network needs at least one layer");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Layer& layer = layers_[l];
      if (layer.weights.rows() != layer.bias.size())
        throw Error(ErrorCode::input_shape,
                    "layer " + std::to_string(l) + ": weight rows do not match bias length");
      if (layer.weights.cols() < 1 || layer.weights.rows() < 1)
        throw Error(ErrorCode::input_shape, "layer " + std::to_string(l) + " is empty");
      if (l > 0 && layers_[l - 1].output_dim() != layer.input_dim())
        throw Error(ErrorCode::input_shape,
                    "layer " + std::to_string(l) + " input does not chain with previous output");
      if (!layer.weights.allFinite() || !layer.bias.allFinite())
        throw Error(ErrorCode::domain, "layer " + std::to_string(l) + " has non-finite entries");
    }
  }

  const std::vector<Layer>& layers() const { return layers_; }
  Index input_dim() const { return layers_.front().input_dim(); }
  Index output_dim() const { return layers_.back().output_dim(); }
  bool is_smooth() const {
    for (const auto& layer : layers_)
      if (!ace::is_smooth(layer.activation)) return false;
    return true;
  }

 private:
  std::vector<Layer> layers_;
};

using Network = BasicNetwork<double>;

/// Gate parameters act on the concatenation [x; h] (candidate: [x; r*h]).
template <typename Scalar>
struct GruGate {
  MatrixX<Scalar> weights;  // hidden x (input + hidden)
  VectorX<Scalar> bias;
};

template <typename Scalar>
struct GruParameters {
  Index input_dim = 0;
  Index hidden_dim = 0;
  GruGate<Scalar> update;
  GruGate<Scalar> reset;
  GruGate<Scalar> candidate;
  DenseLayer<Scalar> readout;
  bool outputs_feed_inputs = false;

  template <typename Other>
  GruParameters<Other> cast() const {
    const auto gate = [](const GruGate<Scalar>& g) {
      return GruGate<Other>{g.weights.template cast<Other>(), g.bias.template cast<Other>()};
    };
    GruParameters<Other> out;
    out.input_dim = input_dim;
    out.hidden_dim = hidden_dim;
    out.update = gate(update);
    out.reset = gate(reset);
    out.candidate = gate(candidate);
    out.readout = DenseLayer<Other>{readout.weights.template cast<Other>(),
                                    readout.bias.template cast<Other>(), readout.activation};
    out.outputs_feed_inputs = outputs_feed_inputs;
    return out;
  }
};

/// Single-layer GRU with a dense readout of the hidden state:
///   z = sigmoid(Wz [x; h] + bz),  r = sigmoid(Wr [x; h] + br)
///   n = tanh(Wn [x; r*h] + bn),   h' = (1 - z) * n + z * h
template <typename Scalar>
class BasicGruNetwork {
 public:
  explicit BasicGruNetwork(GruParameters<Scalar> params) : params_(std::move(params)) {
    const Index in = params_.input_dim;
    const Index hid = params_.hidden_dim;
    if (in < 1 || hid < 1) throw Error(ErrorCode::input_shape, "gru needs input_dim, hidden_dim >= 1");
    for (const auto* gate : {&params_.update, &params_.reset, &params_.candidate}) {
      if (gate->weights.rows() != hid || gate->weights.cols() != in + hid || gate->bias.size() != hid)
        throw Error(ErrorCode::input_shape, "gru gate shape must be hidden x (input + hidden)");
      if (!gate->weights.allFinite() || !gate->bias.allFinite())
        throw Error(ErrorCode::domain, "gru gate has non-finite entries");
    }
    const auto& ro = params_.readout;
    if (ro.weights.cols() != hid || ro.weights.rows() != ro.bias.size() || ro.weights.rows() < 1)
      throw Error(ErrorCode::input_shape, "gru readout must map hidden_dim to the output");
    if (params_.outputs_feed_inputs && ro.weights.rows() != in)
      throw Error(ErrorCode::input_shape, "outputs_feed_inputs requires output_dim == input_dim");
  }

  const GruParameters<Scalar>& parameters() const { return params_; }
  Index input_dim() const { return params_.input_dim; }
  Index hidden_dim() const { return params_.hidden_dim; }
  Index output_dim() const { return params_.readout.weights.rows(); }
  bool outputs_feed_inputs() const { return params_.outputs_feed_inputs; }

 private:
  GruParameters<Scalar> params_;
};

using GruNetwork = BasicGruNetwork<double>;

// ---------------------------------------------------------------------------
// Feed-forward evaluation and derivatives.

Vector forward(const Network& net, const Vector& x);
/// Evaluates every column of `inputs`; result has one column per input.
Matrix forward_batch(const Network& net, const Matrix& inputs);
/// Output row `output` at the 2r + 1 points [mu, mu + eps D, mu - eps D].
/// The first layer is applied to mu and to eps D separately, so the offsets
/// are never rounded into mu.
Vector forward_offsets(const Network& net, const Vector& mu, const Matrix& directions, double eps, Index output);

/// Reverse-mode gradient of output `output` with respect to the inputs.
Vector gradient(const Network& net, const Vector& x, Index output, Diagnostics* diag = nullptr);

/// H(x) * directions by forward-over-reverse, one tangent per column.
Matrix hessian_vector_product(const Network& net, const Vector& x, const Matrix& directions,
                              Index output, Diagnostics* diag = nullptr);

/// Full Hessian assembled from one forward-over-reverse sweep per input.
Matrix hessian(const Network& net, const Vector& x, Index output,
               Index cap = kDefaultHessianCap, Diagnostics* diag = nullptr);

/// (f(mu - eps v) + f(mu + eps v) - 2 f(mu)) / eps^2.
double directional_second_derivative(const Network& net, const Vector& mu, const Vector& v,
                                     double eps, Index output, Diagnostics* diag = nullptr);

/// Scalar view of one network output, the interface the Taylor machinery uses.
class NetworkOutput {
 public:
  NetworkOutput(const Network& net, Index output);

  Index dimension() const { return net_->input_dim(); }
  bool is_smooth() const { return net_->is_smooth(); }
  double value(const Vector& x) const;
  Vector values(const Matrix& columns) const;
  Vector offset_values(const Vector& mu, const Matrix& directions, double eps) const;
  Vector gradient(const Vector& x, Diagnostics* diag = nullptr) const;
  Matrix hessian(const Vector& x, Index cap, Diagnostics* diag = nullptr) const;

 private:
  const Network* net_;
  Index output_;
};

/// Sum over the columns v_r of `directions` of the three-point second
/// difference, using one batched evaluation of [mu, mu + eps V, mu - eps V].
template <typename Model>
double second_difference_sum(const Model& model, const Vector& mu, const Matrix& directions,
                             double eps, Diagnostics* diag = nullptr) {
  if (!(eps > 0.0)) throw Error(ErrorCode::invalid_argument, "second difference step must be > 0");
  if (directions.rows() != mu.size())
    throw Error(ErrorCode::input_shape, "direction length does not match the evaluation point");
  const Index r = directions.cols();
  Vector f;
  if constexpr (requires { model.offset_values(mu, directions, eps); }) {
    f = model.offset_values(mu, directions, eps);
  } else {
    Matrix points(mu.size(), 2 * r + 1);
    points.col(0) = mu;
    points.middleCols(1, r) = (eps * directions).colwise() + mu;
    points.middleCols(1 + r, r) = (-eps * directions).colwise() + mu;
    f = model.values(points);
  }
  const double f0 = f(0);
  double total = 0.0;
  double magnitude = 0.0;
  for (Index c = 0; c < r; ++c) {
    total += (f(1 + c) + f(1 + r + c) - 2.0 * f0);
    magnitude += std::abs(f(1 + c)) + std::abs(f(1 + r + c)) + 2.0 * std::abs(f0);
  }
  total /= eps * eps;
  const double bound = std::numeric_limits<double>::epsilon() * magnitude / (eps * eps);
  if (bound > 1e-3 * std::max(1.0, std::abs(total))) {
    warn(diag, "second difference cancellation: estimated rounding error " + std::to_string(bound) +
                   " for step " + std::to_string(eps));
  }
  return total;
}

// ---------------------------------------------------------------------------
// Recurrent unrolling.

/// do() surgery on one input slot of an unrolled sequence.
struct Override {
  Index step = 0;
  Index feature = 0;
  double value = 0.0;
};

struct UnrollResult {
  Matrix inputs;   // steps x input_dim, after overrides and feedback
  Matrix hidden;   // steps x hidden_dim
  Matrix outputs;  // steps x output_dim
};

/// Runs `horizon` steps from a zero hidden state. Rows of `sequence` supply
/// inputs; beyond them, inputs are the previous readout when the network feeds
/// its outputs back.
UnrollResult unroll(const GruNetwork& rnn, const Matrix& sequence, Index horizon,
                    std::span<const Override> overrides = {});

/// d y^t / d x^{t-lag}. With `output` set the result is 1 x input_dim,
/// otherwise output_dim x input_dim. Inputs are treated as fixed window slots.
Matrix output_input_jacobian(const GruNetwork& rnn, const Matrix& sequence, Index t, Index lag,
                             std::optional<Index> output = std::nullopt);

/// Jacobians for every lag 0..t from a single set of reverse sweeps.
std::vector<Matrix> output_input_jacobians(const GruNetwork& rnn, const Matrix& sequence, Index t,
                                           std::optional<Index> output = std::nullopt);

/// Row-major flattening of a steps x features window: index = step * k + feature.
Vector flatten_window(const Matrix& window);
Matrix unflatten_window(const Vector& flat, Index features);

/// Output `output` at the last of `steps` unrolled steps as a function of the
/// flattened input window (no feedback; every slot is an independent input).
class UnrolledGruOutput {
 public:
  UnrolledGruOutput(const GruNetwork& rnn, Index steps, Index output);

  Index dimension() const { return steps_ * rnn_->input_dim(); }
  Index steps() const { return steps_; }
  bool is_smooth() const;
  double value(const Vector& flat) const;
  Vector values(const Matrix& columns) const;
  Vector gradient(const Vector& flat, Diagnostics* diag = nullptr) const;
  Matrix hessian(const Vector& flat, Index cap, Diagnostics* diag = nullptr) const;

 private:
  const GruNetwork* rnn_;
  Index steps_;
  Index output_;
};

}  // namespace ace
