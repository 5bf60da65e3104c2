#pragma once

#include <vector>

#include "ace/netcore.hpp"

namespace ace::detail {

/// Batched forward pass keeping every layer's pre- and post-activations.
struct MlpTrace {
  std::vector<Matrix> pre;   // pre[l]: out_l x batch
  std::vector<Matrix> post;  // post[0] = inputs, post[l + 1] = activation(pre[l])
};

inline MlpTrace mlp_forward(const Network& net, const Matrix& inputs) {
  MlpTrace trace;
  const auto& layers = net.layers();
  trace.pre.reserve(layers.size());
  trace.post.reserve(layers.size() + 1);
  trace.post.push_back(inputs);
  for (const auto& layer : layers) {
    trace.pre.push_back(layer.preactivation(trace.post.back()));
    const Activation a = layer.activation;
    trace.post.push_back(trace.pre.back().unaryExpr([a](double z) { return activation::value(a, z); }));
  }
  return trace;
}

inline bool has_relu_kink(const Network& net, const MlpTrace& trace) {
  for (std::size_t l = 0; l < net.layers().size(); ++l)
    if (net.layers()[l].activation == Activation::relu && (trace.pre[l].array() == 0.0).any())
      return true;
  return false;
}

/// Parameter gradients for a batch given dLoss/dOutput (out x batch).
struct MlpGradients {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
};

inline MlpGradients mlp_backward(const Network& net, const MlpTrace& trace, const Matrix& output_grad) {
  const auto& layers = net.layers();
  MlpGradients grads;
  grads.weights.resize(layers.size());
  grads.bias.resize(layers.size());
  Matrix g = output_grad;
  for (std::size_t l = layers.size(); l-- > 0;) {
    const Activation a = layers[l].activation;
    const Matrix gz =
        g.cwiseProduct(trace.pre[l].unaryExpr([a](double z) { return activation::first_derivative(a, z); }));
    grads.weights[l] = gz * trace.post[l].transpose();
    grads.bias[l] = gz.rowwise().sum();
    if (l > 0) g = layers[l].weights.transpose() * gz;
  }
  return grads;
}

}  // namespace ace::detail
