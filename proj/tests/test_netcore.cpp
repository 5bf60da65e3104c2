#include <doctest.h>

#include <cmath>

#include "ace/netcore.hpp"
#include "fixtures.hpp"

using namespace ace;
using namespace ace::test;

TEST_CASE("forward: identity layer, product net, flat sigmoid") {
  const Network id({{Matrix::Identity(2, 2), Vector::Zero(2), Activation::identity}});
  CHECK(forward(id, Vector{{1.0, 2.0}}).isApprox(Vector{{1.0, 2.0}}));

  CHECK(forward(product_net(), Vector{{3.0, 5.0}})(0) == doctest::Approx(15.0).epsilon(1e-15));

  const Network sig({{Matrix::Zero(1, 2), Vector::Zero(1), Activation::sigmoid}});
  CHECK(forward(sig, Vector{{-7.0, 123.0}})(0) == 0.5);
}

TEST_CASE("forward rejects bad shapes and non-finite inputs") {
  const Network net = product_net();
  CHECK_THROWS_AS(forward(net, Vector::Zero(3)), Error);
  try {
    forward(net, Vector{{1.0, NAN}});
    FAIL("expected a domain error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::domain);
  }
  CHECK_THROWS_AS(Network({{Matrix::Zero(2, 2), Vector::Zero(3), Activation::identity}}), Error);
  CHECK_THROWS_AS(Network({{Matrix::Zero(2, 2), Vector::Zero(2), Activation::identity},
                           {Matrix::Zero(1, 3), Vector::Zero(1), Activation::identity}}),
                  Error);
}

TEST_CASE("gradient: linear, product, finite differences") {
  const Network lin = linear_net(Vector{{3.0, 4.0}}, 1.0);
  CHECK(gradient(lin, Vector{{-2.0, 9.0}}, 0).isApprox(Vector{{3.0, 4.0}}));
  CHECK(gradient(product_net(), Vector{{3.0, 5.0}}, 0).isApprox(Vector{{5.0, 3.0}}));

  Rng rng(11);
  const Network net = random_mlp(rng, {4, 6, 2}, Activation::tanh);
  for (int trial = 0; trial < 5; ++trial) {
    const Vector x = random_vector(rng, 4);
    for (Index out = 0; out < 2; ++out) {
      const Vector fd = fd_gradient([&](const Vector& p) { return forward(net, p)(out); }, x);
      const Vector g = gradient(net, x, out);
      CHECK((g - fd).norm() / std::max(1e-12, fd.norm()) < 1e-5);
    }
  }
}

TEST_CASE("gradient agrees with finite differences on 100 points for every smooth activation") {
  Rng rng(12);
  for (Activation a : {Activation::sigmoid, Activation::tanh, Activation::softplus, Activation::square}) {
    const Network net = random_mlp(rng, {3, 5, 4, 1}, a);
    for (int trial = 0; trial < 100; ++trial) {
      const Vector x = random_vector(rng, 3);
      const Vector fd = fd_gradient([&](const Vector& p) { return forward(net, p)(0); }, x);
      const Vector g = gradient(net, x, 0);
      CHECK((g - fd).norm() / std::max(1e-6, fd.norm()) < 1e-5);
    }
  }
}

TEST_CASE("relu at a kink: left derivative and a non-smooth warning") {
  const Network net({{Matrix::Identity(1, 1), Vector::Zero(1), Activation::relu}});
  Diagnostics diag;
  CHECK(gradient(net, Vector::Zero(1), 0, &diag)(0) == 0.0);
  CHECK(diag.contains("kink"));
  CHECK(gradient(net, Vector::Constant(1, 0.5), 0)(0) == 1.0);
}

TEST_CASE("hessian: product net, linear net, finite differences, symmetry") {
  Matrix swap(2, 2);
  swap << 0, 1, 1, 0;
  CHECK(hessian(product_net(), Vector{{-1.0, 7.0}}, 0).isApprox(swap));
  CHECK(hessian(linear_net(Vector{{1.0, -2.0, 3.0}}, 0.0), Vector::Ones(3), 0).isZero(0.0));

  Rng rng(13);
  const Network soft = random_mlp(rng, {5, 7, 1}, Activation::softplus);
  const Vector x = random_vector(rng, 5);
  const Matrix h = hessian(soft, x, 0);
  Matrix fd(5, 5);
  for (Index j = 0; j < 5; ++j) {
    Vector xp = x, xm = x;
    xp(j) += 1e-5;
    xm(j) -= 1e-5;
    fd.col(j) = (gradient(soft, xp, 0) - gradient(soft, xm, 0)) / 2e-5;
  }
  CHECK((h - fd).cwiseAbs().maxCoeff() < 1e-4);

  for (int trial = 0; trial < 10; ++trial) {
    const Network net = random_mlp(rng, {6, 8, 8, 2}, Activation::tanh);
    const Matrix hh = hessian(net, random_vector(rng, 6), 1);
    CHECK((hh - hh.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("hessian above the cap is refused") {
  Rng rng(14);
  const Network net = random_mlp(rng, {12, 3, 1}, Activation::tanh);
  try {
    hessian(net, Vector::Zero(12), 0, 8);
    FAIL("expected the Hessian cap to trigger");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::hessian_cap);
  }
}

TEST_CASE("hessian_vector_product matches the explicit Hessian") {
  Rng rng(15);
  const Network net = random_mlp(rng, {5, 6, 1}, Activation::sigmoid);
  const Vector x = random_vector(rng, 5);
  const Matrix v = random_matrix(rng, 5, 3);
  CHECK((hessian_vector_product(net, x, v, 0) - hessian(net, x, 0) * v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("directional second derivative") {
  const Network prod = product_net();
  CHECK(directional_second_derivative(prod, Vector{{0.3, -2.0}}, Vector{{1.0, 1.0}}, 1e-3, 0) ==
        doctest::Approx(2.0).epsilon(1e-8));
  CHECK(std::abs(directional_second_derivative(prod, Vector{{0.3, -2.0}}, Vector{{1.0, 0.0}}, 1e-3, 0)) < 1e-8);

  Rng rng(16);
  for (int trial = 0; trial < 20; ++trial) {
    const Network net = random_mlp(rng, {4, 6, 1}, Activation::tanh);
    const Vector mu = random_vector(rng, 4);
    Vector v = random_vector(rng, 4);
    v *= (1.0 + 9.0 * (trial % 2)) / v.norm();
    const double exact = v.dot(hessian(net, mu, 0) * v);
    CHECK(std::abs(directional_second_derivative(net, mu, v, kDefaultSecondDifferenceStep, 0) - exact) < 1e-4);
  }
}

TEST_CASE("directional second derivative warns when the step is too small") {
  Diagnostics diag;
  directional_second_derivative(product_net(), Vector{{1e3, 1e3}}, Vector{{1.0, 1.0}}, 1e-9, 0, &diag);
  CHECK(diag.contains("cancellation"));
}

TEST_CASE("piecewise-linear nets have zero curvature away from kinks") {
  Rng rng(17);
  const Network net = random_mlp(rng, {3, 8, 8, 1}, Activation::relu);
  for (int trial = 0; trial < 20; ++trial) {
    const Vector x = random_vector(rng, 3);
    const Vector v = random_vector(rng, 3);
    Diagnostics diag;
    CHECK(v.dot(hessian(net, x, 0, kDefaultHessianCap, &diag) * v) == 0.0);
    CHECK(diag.contains("non-smooth"));
  }
}

namespace {

/// Plain step of the GRU cell written out element by element.
Vector hand_step(const GruParameters<double>& p, const Vector& x, const Vector& h) {
  const auto sig = [](double v) { return 1.0 / (1.0 + std::exp(-v)); };
  const Index k = p.input_dim;
  const Index hid = p.hidden_dim;
  Vector z(hid), r(hid), n(hid), out(hid);
  for (Index u = 0; u < hid; ++u) {
    double az = p.update.bias(u), ar = p.reset.bias(u);
    for (Index j = 0; j < k; ++j) {
      az += p.update.weights(u, j) * x(j);
      ar += p.reset.weights(u, j) * x(j);
    }
    for (Index j = 0; j < hid; ++j) {
      az += p.update.weights(u, k + j) * h(j);
      ar += p.reset.weights(u, k + j) * h(j);
    }
    z(u) = sig(az);
    r(u) = sig(ar);
  }
  for (Index u = 0; u < hid; ++u) {
    double an = p.candidate.bias(u);
    for (Index j = 0; j < k; ++j) an += p.candidate.weights(u, j) * x(j);
    for (Index j = 0; j < hid; ++j) an += p.candidate.weights(u, k + j) * r(j) * h(j);
    n(u) = std::tanh(an);
    out(u) = (1.0 - z(u)) * n(u) + z(u) * h(u);
  }
  return out;
}

}  // namespace

TEST_CASE("unroll matches a hand-stepped cell") {
  Rng rng(18);
  const GruNetwork rnn = random_gru(rng, 2, 3, 2);
  const Matrix seq = random_matrix(rng, 3, 2);
  const UnrollResult run = unroll(rnn, seq, 3);
  Vector h = Vector::Zero(3);
  for (Index t = 0; t < 3; ++t) {
    h = hand_step(rnn.parameters(), seq.row(t).transpose(), h);
    CHECK((run.hidden.row(t).transpose() - h).cwiseAbs().maxCoeff() < 1e-14);
    const Vector y = rnn.parameters().readout.weights * h + rnn.parameters().readout.bias;
    CHECK((run.outputs.row(t).transpose() - y).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("unroll without recurrence equals per-step feed-forward readouts") {
  Rng rng(19);
  const GruNetwork rnn = zero_recurrence_gru(rng, 2, 3, 1);
  const Matrix seq = random_matrix(rng, 5, 2);
  const UnrollResult run = unroll(rnn, seq, 5);
  for (Index t = 0; t < 5; ++t) {
    const UnrollResult single = unroll(rnn, seq.row(t), 1);
    CHECK(run.outputs(t, 0) == single.outputs(0, 0));
  }
}

TEST_CASE("unroll overrides, feedback generation and determinism") {
  Rng rng(20);
  const GruNetwork rnn = random_gru(rng, 1, 3, 1);
  const Matrix seq = random_matrix(rng, 6, 1);
  const Override ov{2, 0, 4.0};
  const UnrollResult base = unroll(rnn, seq, 6);
  const UnrollResult hit = unroll(rnn, seq, 6, std::span<const Override>(&ov, 1));
  CHECK(hit.inputs(2, 0) == 4.0);
  CHECK(hit.outputs.topRows(2) == base.outputs.topRows(2));
  CHECK(hit.outputs(3, 0) != base.outputs(3, 0));
  const UnrollResult again = unroll(rnn, seq, 6, std::span<const Override>(&ov, 1));
  CHECK(again.outputs == hit.outputs);

  try {
    unroll(rnn, seq, 8);
    FAIL("expected a sequence-length error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::sequence_length);
  }

  const GruNetwork fb = random_gru(rng, 1, 3, 1, true);
  const UnrollResult gen = unroll(fb, seq.topRows(2), 5);
  for (Index t = 2; t < 5; ++t) CHECK(gen.inputs(t, 0) == gen.outputs(t - 1, 0));
  const Override late{4, 0, -1.0};
  CHECK(unroll(fb, seq.topRows(2), 5, std::span<const Override>(&late, 1)).inputs(4, 0) == -1.0);
}

TEST_CASE("output-input Jacobian") {
  Rng rng(21);
  const GruNetwork flat = zero_recurrence_gru(rng, 2, 3, 2);
  const Matrix seq = random_matrix(rng, 5, 2);
  for (Index lag = 1; lag <= 4; ++lag) CHECK(output_input_jacobian(flat, seq, 4, lag).isZero(0.0));

  GruParameters<double> p;
  p.input_dim = 2;
  p.hidden_dim = 2;
  p.update = {Matrix::Zero(2, 4), Vector::Constant(2, -1000.0)};
  p.reset = {Matrix::Zero(2, 4), Vector::Zero(2)};
  p.candidate = {Matrix::Zero(2, 4), Vector::Zero(2)};
  p.candidate.weights.leftCols(2) = 1e-4 * Matrix::Identity(2, 2);
  p.readout = {1e4 * Matrix::Identity(2, 2), Vector::Zero(2), Activation::identity};
  const Matrix j0 = output_input_jacobian(GruNetwork(p), Matrix::Zero(3, 2), 2, 0);
  CHECK((j0 - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  CHECK_THROWS_AS(output_input_jacobian(flat, seq, 2, 3), Error);

  const GruNetwork rnn = random_gru(rng, 2, 3, 2);
  const Index t = 4;
  for (Index lag = 0; lag <= t; ++lag) {
    const Matrix jac = output_input_jacobian(rnn, seq, t, lag);
    for (Index j = 0; j < 2; ++j) {
      Matrix sp = seq.topRows(t + 1), sm = seq.topRows(t + 1);
      sp(t - lag, j) += 1e-6;
      sm(t - lag, j) -= 1e-6;
      const Vector fd = (unroll(rnn, sp, t + 1).outputs.row(t) - unroll(rnn, sm, t + 1).outputs.row(t)).transpose() / 2e-6;
      CHECK((jac.col(j) - fd).norm() / std::max(1e-8, fd.norm()) < 1e-4);
    }
  }
}

TEST_CASE("unrolled GRU output view: gradient and Hessian against finite differences") {
  Rng rng(22);
  const GruNetwork rnn = random_gru(rng, 2, 3, 1);
  const UnrolledGruOutput model(rnn, 3, 0);
  const Vector flat = random_vector(rng, 6);
  const Vector fd = fd_gradient([&](const Vector& p) { return model.value(p); }, flat);
  CHECK((model.gradient(flat) - fd).cwiseAbs().maxCoeff() < 1e-8);
  const Matrix h = model.hessian(flat, kDefaultHessianCap);
  CHECK((h - h.transpose()).cwiseAbs().maxCoeff() < 1e-10);
  Matrix fdh(6, 6);
  for (Index j = 0; j < 6; ++j) {
    Vector xp = flat, xm = flat;
    xp(j) += 1e-5;
    xm(j) -= 1e-5;
    fdh.col(j) = (model.gradient(xp) - model.gradient(xm)) / 2e-5;
  }
  CHECK((h - fdh).cwiseAbs().maxCoeff() < 1e-6);
  CHECK(unflatten_window(flatten_window(random_matrix(rng, 3, 2)), 2).rows() == 3);
}
