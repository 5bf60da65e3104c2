#include "ace/train.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "gru_engine.hpp"
#include "mlp_engine.hpp"

namespace ace {

namespace {

constexpr double kSynthStd = 0.2;
constexpr Index kSynthMinLength = 10;
constexpr Index kSynthExtraLength = 5;
constexpr Index kSynthSignalSteps = 3;

Matrix xavier(Index rows, Index cols, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Matrix w(rows, cols);
  for (Index c = 0; c < cols; ++c)
    for (Index r = 0; r < rows; ++r) w(r, c) = dist(rng);
  return w;
}

void check_divergence(double loss, Index epoch) {
  if (!std::isfinite(loss))
    throw Error(ErrorCode::divergence, "training diverged: loss is " + std::to_string(loss) + " at epoch " +
                                           std::to_string(epoch));
}

/// Column-wise softmax.
Matrix softmax(const Matrix& logits) {
  Matrix p = logits;
  for (Index c = 0; c < p.cols(); ++c) {
    p.col(c).array() -= p.col(c).maxCoeff();
    p.col(c) = p.col(c).array().exp().matrix();
    p.col(c) /= p.col(c).sum();
  }
  return p;
}

std::vector<int> argmax_columns(const Matrix& scores) {
  std::vector<int> out(static_cast<std::size_t>(scores.cols()));
  for (Index c = 0; c < scores.cols(); ++c) {
    Index best = 0;
    scores.col(c).maxCoeff(&best);
    out[static_cast<std::size_t>(c)] = static_cast<int>(best);
  }
  return out;
}

double final_output(const GruNetwork& rnn, const Matrix& seq) {
  return unroll(rnn, seq, seq.rows()).outputs(seq.rows() - 1, 0);
}

}  // namespace

LabelledSequences synth_sequences(Index n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::invalid_argument, "synth_sequences needs n >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> length(kSynthMinLength, kSynthMinLength + kSynthExtraLength);
  std::bernoulli_distribution coin(0.5);
  std::normal_distribution<double> noise(0.0, kSynthStd);
  LabelledSequences out;
  out.data.sequences.reserve(static_cast<std::size_t>(n));
  out.labels.reserve(static_cast<std::size_t>(n));
  for (Index s = 0; s < n; ++s) {
    const Index len = length(rng);
    const int label = coin(rng) ? 1 : 0;
    const double centre = label == 1 ? 1.0 : -1.0;
    Matrix seq(len, 1);
    for (Index t = 0; t < len; ++t) seq(t, 0) = (t < kSynthSignalSteps ? centre : 0.0) + noise(rng);
    out.data.sequences.push_back(std::move(seq));
    out.labels.push_back(label);
  }
  out.data = make_sequence_dataset(std::move(out.data.sequences), {"x"});
  return out;
}

Network train_mlp(const Matrix& features, const std::vector<int>& labels, const MlpTrainOptions& options,
                  TrainingLog* log) {
  const auto& sizes = options.layer_sizes;
  if (sizes.size() < 2) throw Error(ErrorCode::invalid_argument, "layer_sizes needs input and output sizes");
  if (features.rows() == 0) throw Error(ErrorCode::empty_data, "no training rows");
  if (features.cols() != sizes.front())
    throw Error(ErrorCode::input_shape, "feature width does not match the input layer");
  if (static_cast<Index>(labels.size()) != features.rows())
    throw Error(ErrorCode::input_shape, "one label per row required");
  const Index classes = sizes.back();
  for (int l : labels)
    if (l < 0 || l >= classes) throw Error(ErrorCode::invalid_argument, "label outside [0, classes)");
  if (!(options.learning_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "learning rate must be > 0");

  std::mt19937_64 rng(options.seed);
  std::vector<DenseLayer<double>> layers;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const bool last = l + 2 == sizes.size();
    layers.push_back({xavier(sizes[l + 1], sizes[l], rng), Vector::Zero(sizes[l + 1]),
                      last ? Activation::identity : options.hidden_activation});
  }
  Network net(layers);

  const Index n = features.rows();
  const Matrix inputs = features.transpose();
  Matrix targets = Matrix::Zero(classes, n);
  for (Index r = 0; r < n; ++r) targets(labels[static_cast<std::size_t>(r)], r) = 1.0;

  for (Index epoch = 1; epoch <= options.epochs; ++epoch) {
    const detail::MlpTrace trace = detail::mlp_forward(net, inputs);
    const Matrix p = softmax(trace.post.back());
    const double loss = -(targets.array() * p.array().max(1e-300).log()).sum() / static_cast<double>(n);
    check_divergence(loss, epoch);
    const detail::MlpGradients grads = detail::mlp_backward(net, trace, (p - targets) / static_cast<double>(n));
    for (std::size_t l = 0; l < layers.size(); ++l) {
      layers[l].weights -= options.learning_rate * grads.weights[l];
      layers[l].bias -= options.learning_rate * grads.bias[l];
    }
    net = Network(layers);
    if (log != nullptr) log->push_back({epoch, loss, accuracy(argmax_columns(p), labels)});
  }
  return net;
}

Network train_mlp(const Matrix& features, const Matrix& one_hot, const MlpTrainOptions& options, TrainingLog* log) {
  std::vector<int> labels(static_cast<std::size_t>(one_hot.rows()));
  for (Index r = 0; r < one_hot.rows(); ++r) {
    Index best = 0;
    one_hot.row(r).maxCoeff(&best);
    labels[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return train_mlp(features, labels, options, log);
}

GruNetwork train_gru(const SequenceDataset& data, const std::vector<int>& labels, const GruTrainOptions& options,
                     TrainingLog* log) {
  if (data.sequences.empty()) throw Error(ErrorCode::empty_data, "no training sequences");
  if (labels.size() != data.sequences.size()) throw Error(ErrorCode::input_shape, "one label per sequence required");
  for (int l : labels)
    if (l != 0 && l != 1) throw Error(ErrorCode::invalid_argument, "labels must be 0 or 1");
  if (options.hidden_dim < 1) throw Error(ErrorCode::invalid_argument, "hidden_dim must be >= 1");
  if (!(options.learning_rate > 0.0)) throw Error(ErrorCode::invalid_argument, "learning rate must be > 0");

  const Index k = data.features();
  const Index hid = options.hidden_dim;
  std::mt19937_64 rng(options.seed);
  GruParameters<double> p;
  p.input_dim = k;
  p.hidden_dim = hid;
  p.update = {xavier(hid, k + hid, rng), Vector::Constant(hid, options.update_bias)};
  p.reset = {xavier(hid, k + hid, rng), Vector::Zero(hid)};
  p.candidate = {xavier(hid, k + hid, rng), Vector::Zero(hid)};
  p.readout = {xavier(1, hid, rng), Vector::Zero(1), Activation::sigmoid};

  const double n = static_cast<double>(data.sequences.size());
  for (Index epoch = 1; epoch <= options.epochs; ++epoch) {
    GruParameters<double> grads = detail::zero_like(p);
    double loss = 0.0;
    Index correct = 0;
    for (std::size_t s = 0; s < data.sequences.size(); ++s) {
      const Matrix& seq = data.sequences[s];
      const auto trace = detail::gru_forward<double>(p, seq);
      const double y = trace.back().out(0);
      const double label = labels[s];
      const double yc = std::clamp(y, 1e-15, 1.0 - 1e-15);
      loss -= label * std::log(yc) + (1.0 - label) * std::log(1.0 - yc);
      correct += (y > 0.5) == (labels[s] == 1) ? 1 : 0;
      // dL/dy chosen so that, after the sigmoid derivative, the readout
      // pre-activation receives (y - label) / n.
      Matrix seeds = Matrix::Zero(seq.rows(), 1);
      seeds(seq.rows() - 1, 0) = (y - label) / std::max(y * (1.0 - y), 1e-300) / n;
      detail::gru_backward<double>(p, trace, seeds, &grads);
    }
    loss /= n;
    check_divergence(loss, epoch);
    const double lr = options.learning_rate;
    for (auto [gate, grad] : {std::pair{&p.update, &grads.update}, std::pair{&p.reset, &grads.reset},
                              std::pair{&p.candidate, &grads.candidate}}) {
      gate->weights -= lr * grad->weights;
      gate->bias -= lr * grad->bias;
    }
    p.readout.weights -= lr * grads.readout.weights;
    p.readout.bias -= lr * grads.readout.bias;
    if (log != nullptr) log->push_back({epoch, loss, static_cast<double>(correct) / n});
  }
  return GruNetwork(p);
}

std::vector<int> predict_classes(const Network& net, const Matrix& features) {
  return argmax_columns(forward_batch(net, features.transpose()));
}

std::vector<int> predict_labels(const GruNetwork& rnn, const SequenceDataset& data) {
  std::vector<int> out;
  out.reserve(data.sequences.size());
  for (const Matrix& seq : data.sequences) out.push_back(final_output(rnn, seq) > 0.5 ? 1 : 0);
  return out;
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size() || truth.empty())
    throw Error(ErrorCode::input_shape, "accuracy needs equally sized, non-empty label vectors");
  std::size_t hits = 0;
  for (std::size_t j = 0; j < truth.size(); ++j) hits += predicted[j] == truth[j] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

Index imputation_flips(const GruNetwork& rnn, const SequenceDataset& data, Index step, std::uint64_t seed) {
  if (step < 0) throw Error(ErrorCode::invalid_argument, "step must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, kSynthStd);
  Index flips = 0;
  for (const Matrix& seq : data.sequences) {
    if (seq.rows() <= step) continue;
    Matrix imputed = seq;
    for (Index j = 0; j < seq.cols(); ++j) imputed(step, j) = noise(rng);
    flips += (final_output(rnn, seq) > 0.5) != (final_output(rnn, imputed) > 0.5) ? 1 : 0;
  }
  return flips;
}

Matrix min_max_normalize(const Matrix& features) {
  Matrix out = features;
  for (Index c = 0; c < out.cols(); ++c) {
    const double lo = out.col(c).minCoeff();
    const double span = out.col(c).maxCoeff() - lo;
    if (span > 0.0)
      out.col(c) = ((out.col(c).array() - lo) / span).matrix();
    else
      out.col(c).setZero();
  }
  return out;
}

}  // namespace ace
