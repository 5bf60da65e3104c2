#pragma once

#include <vector>

#include "ace/netcore.hpp"

namespace ace::detail {

template <typename T>
VectorX<T> sigmoid_vec(const VectorX<T>& a) {
  return a.unaryExpr([](const T& v) { return activation::sigmoid(v); });
}

template <typename T>
VectorX<T> tanh_vec(const VectorX<T>& a) {
  using std::tanh;
  return a.unaryExpr([](const T& v) { return tanh(v); });
}

template <typename T>
VectorX<T> ones(Index n) {
  return VectorX<T>::Constant(n, T(1.0));
}

/// Per-step intermediate values of the GRU cell.
template <typename T>
struct GruStep {
  VectorX<T> x, h_prev, z, r, n, h, pre_out, out;
};

template <typename T>
GruStep<T> gru_step(const GruParameters<T>& p, const VectorX<T>& x, const VectorX<T>& h_prev) {
  const Index k = p.input_dim;
  const Index hid = p.hidden_dim;
  GruStep<T> s;
  s.x = x;
  s.h_prev = h_prev;
  VectorX<T> xh(k + hid);
  xh << x, h_prev;
  s.z = sigmoid_vec<T>(p.update.weights * xh + p.update.bias);
  s.r = sigmoid_vec<T>(p.reset.weights * xh + p.reset.bias);
  VectorX<T> xrh(k + hid);
  xrh << x, s.r.cwiseProduct(h_prev);
  s.n = tanh_vec<T>(p.candidate.weights * xrh + p.candidate.bias);
  s.h = (ones<T>(hid) - s.z).cwiseProduct(s.n) + s.z.cwiseProduct(h_prev);
  s.pre_out = p.readout.weights * s.h + p.readout.bias;
  const Activation a = p.readout.activation;
  s.out = s.pre_out.unaryExpr([a](const T& v) { return activation::value(a, v); });
  return s;
}

/// Unrolls over a fixed input window (rows = steps) from h = 0.
template <typename T>
std::vector<GruStep<T>> gru_forward(const GruParameters<T>& p, const MatrixX<T>& inputs) {
  std::vector<GruStep<T>> trace;
  trace.reserve(static_cast<std::size_t>(inputs.rows()));
  VectorX<T> h = VectorX<T>::Constant(p.hidden_dim, T(0.0));
  for (Index t = 0; t < inputs.rows(); ++t) {
    trace.push_back(gru_step<T>(p, inputs.row(t).transpose(), h));
    h = trace.back().h;
  }
  return trace;
}

template <typename T>
GruParameters<T> zero_like(const GruParameters<T>& p) {
  const auto zero_gate = [](const GruGate<T>& g) {
    return GruGate<T>{MatrixX<T>::Constant(g.weights.rows(), g.weights.cols(), T(0.0)),
                      VectorX<T>::Constant(g.bias.size(), T(0.0))};
  };
  GruParameters<T> z = p;
  z.update = zero_gate(p.update);
  z.reset = zero_gate(p.reset);
  z.candidate = zero_gate(p.candidate);
  z.readout.weights = MatrixX<T>::Constant(p.readout.weights.rows(), p.readout.weights.cols(), T(0.0));
  z.readout.bias = VectorX<T>::Constant(p.readout.bias.size(), T(0.0));
  return z;
}

/// Backpropagation through time. `output_seeds` (steps x output_dim) holds
/// dL/dy^t; returns dL/dx^t (steps x input_dim) and accumulates parameter
/// gradients into `param_grads` when given.
template <typename T>
MatrixX<T> gru_backward(const GruParameters<T>& p, const std::vector<GruStep<T>>& trace,
                        const MatrixX<T>& output_seeds, GruParameters<T>* param_grads = nullptr) {
  const Index k = p.input_dim;
  const Index hid = p.hidden_dim;
  const Index steps = static_cast<Index>(trace.size());
  MatrixX<T> input_grad = MatrixX<T>::Constant(steps, k, T(0.0));
  VectorX<T> gh = VectorX<T>::Constant(hid, T(0.0));
  const Activation ro_act = p.readout.activation;

  for (Index t = steps - 1; t >= 0; --t) {
    const GruStep<T>& s = trace[static_cast<std::size_t>(t)];

    const VectorX<T> g_out = output_seeds.row(t).transpose();
    const VectorX<T> g_pre = g_out.cwiseProduct(
        s.pre_out.unaryExpr([ro_act](const T& v) { return activation::first_derivative(ro_act, v); }));
    gh += p.readout.weights.transpose() * g_pre;
    if (param_grads != nullptr) {
      param_grads->readout.weights += g_pre * s.h.transpose();
      param_grads->readout.bias += g_pre;
    }

    const VectorX<T> one = ones<T>(hid);
    const VectorX<T> gn = gh.cwiseProduct(one - s.z);
    const VectorX<T> gz = gh.cwiseProduct(s.h_prev - s.n);
    VectorX<T> gh_prev = gh.cwiseProduct(s.z);

    const VectorX<T> ga_n = gn.cwiseProduct(one - s.n.cwiseProduct(s.n));
    const VectorX<T> g_xrh = p.candidate.weights.transpose() * ga_n;
    VectorX<T> gx = g_xrh.head(k);
    const VectorX<T> g_rh = g_xrh.tail(hid);
    const VectorX<T> gr = g_rh.cwiseProduct(s.h_prev);
    gh_prev += g_rh.cwiseProduct(s.r);

    const VectorX<T> ga_r = gr.cwiseProduct(s.r.cwiseProduct(one - s.r));
    const VectorX<T> ga_z = gz.cwiseProduct(s.z.cwiseProduct(one - s.z));
    const VectorX<T> g_xh = p.update.weights.transpose() * ga_z + p.reset.weights.transpose() * ga_r;
    gx += g_xh.head(k);
    gh_prev += g_xh.tail(hid);

    if (param_grads != nullptr) {
      VectorX<T> xh(k + hid);
      xh << s.x, s.h_prev;
      VectorX<T> xrh(k + hid);
      xrh << s.x, s.r.cwiseProduct(s.h_prev);
      param_grads->update.weights += ga_z * xh.transpose();
      param_grads->update.bias += ga_z;
      param_grads->reset.weights += ga_r * xh.transpose();
      param_grads->reset.bias += ga_r;
      param_grads->candidate.weights += ga_n * xrh.transpose();
      param_grads->candidate.bias += ga_n;
    }

    input_grad.row(t) = gx.transpose();
    gh = gh_prev;
  }
  return input_grad;
}

}  // namespace ace::detail
