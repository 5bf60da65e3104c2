#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "ace/moments.hpp"
#include "ace/netcore.hpp"

namespace ace::test {

using Rng = std::mt19937_64;

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Matrix m(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) m(r, c) = dist(rng);
  return m;
}

inline Vector random_vector(Rng& rng, Index n, double scale = 1.0) { return random_matrix(rng, n, 1, scale); }

/// y = ((x1 + x2)^2 - (x1 - x2)^2) / 4 = x1 x2.
inline Network product_net() {
  Matrix w1(2, 2);
  w1 << 1, 1, 1, -1;
  Matrix w2(1, 2);
  w2 << 0.25, -0.25;
  return Network({{w1, Vector::Zero(2), Activation::square}, {w2, Vector::Zero(1), Activation::identity}});
}

inline Network linear_net(const Vector& w, double b) {
  return Network({{w.transpose(), Vector::Constant(1, b), Activation::identity}});
}

inline Network constant_net(Index k, double c) {
  return Network({{Matrix::Zero(1, k), Vector::Constant(1, c), Activation::identity}});
}

/// Weights ~ N(0, 1/fan_in), biases ~ N(0, 0.1^2). Hidden layers use
/// `hidden`, the last layer is linear.
inline Network random_mlp(Rng& rng, const std::vector<Index>& sizes, Activation hidden) {
  std::vector<DenseLayer<double>> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const bool last = l + 2 == sizes.size();
    layers.push_back({random_matrix(rng, sizes[l + 1], sizes[l], 1.0 / std::sqrt(static_cast<double>(sizes[l]))),
                      random_vector(rng, sizes[l + 1], 0.1), last ? Activation::identity : hidden});
  }
  return Network(std::move(layers));
}

/// Square hidden layer under a linear readout: a general polynomial of
/// total degree <= 2.
inline Network random_quadratic_net(Rng& rng, Index k, Index hidden) {
  return Network({{random_matrix(rng, hidden, k, 1.0 / std::sqrt(static_cast<double>(k))),
                   random_vector(rng, hidden, 0.5), Activation::square},
                  {random_matrix(rng, 1, hidden), random_vector(rng, 1), Activation::identity}});
}

inline GruNetwork random_gru(Rng& rng, Index k, Index hid, Index out, bool feedback = false,
                             Activation readout = Activation::identity, double scale = 0.8) {
  GruParameters<double> p;
  p.input_dim = k;
  p.hidden_dim = hid;
  p.update = {random_matrix(rng, hid, k + hid, scale), random_vector(rng, hid, 0.3)};
  p.reset = {random_matrix(rng, hid, k + hid, scale), random_vector(rng, hid, 0.3)};
  p.candidate = {random_matrix(rng, hid, k + hid, scale), random_vector(rng, hid, 0.3)};
  p.readout = {random_matrix(rng, out, hid, scale), random_vector(rng, out, 0.3), readout};
  p.outputs_feed_inputs = feedback;
  return GruNetwork(p);
}

/// Hidden-to-gate weights are zero and the update gate is saturated shut
/// (sigmoid(-1000) == 0 exactly), so h^t depends on x^t alone.
inline GruNetwork zero_recurrence_gru(Rng& rng, Index k, Index hid, Index out, bool feedback = false) {
  GruParameters<double> p = random_gru(rng, k, hid, out, feedback).parameters();
  for (auto* gate : {&p.update, &p.reset, &p.candidate}) gate->weights.rightCols(hid).setZero();
  p.update.weights.setZero();
  p.update.bias.setConstant(-1000.0);
  return GruNetwork(p);
}

/// Two hidden units: h_A^t = tanh(w x^t), h_B^t = tanh(c h_A^{t-1}); the
/// readout sees h_B only, so y^t depends on x^{t-1} and nothing else.
inline GruNetwork unit_lag_gru(double w = 1.5, double c = 2.0) {
  GruParameters<double> p;
  p.input_dim = 1;
  p.hidden_dim = 2;
  p.update = {Matrix::Zero(2, 3), Vector::Constant(2, -1000.0)};
  p.reset = {Matrix::Zero(2, 3), Vector::Constant(2, 1000.0)};
  Matrix cand = Matrix::Zero(2, 3);
  cand(0, 0) = w;
  cand(1, 1) = c;
  p.candidate = {cand, Vector::Zero(2)};
  Matrix ro(1, 2);
  ro << 0.0, 1.0;
  p.readout = {ro, Vector::Zero(1), Activation::identity};
  return GruNetwork(p);
}

inline std::vector<Matrix> random_sequences(Rng& rng, Index n, Index min_len, Index max_len, Index k) {
  std::uniform_int_distribution<Index> len(min_len, max_len);
  std::vector<Matrix> out;
  for (Index s = 0; s < n; ++s) out.push_back(random_matrix(rng, len(rng), k));
  return out;
}

/// Central finite-difference gradient of a scalar function.
template <typename F>
Vector fd_gradient(const F& f, const Vector& x, double h = 1e-5) {
  Vector g(x.size());
  for (Index j = 0; j < x.size(); ++j) {
    Vector xp = x, xm = x;
    xp(j) += h;
    xm(j) -= h;
    g(j) = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace ace::test
