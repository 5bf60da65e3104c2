#pragma once

#include <cstdint>
#include <vector>

#include "ace/moments.hpp"
#include "ace/netcore.hpp"

namespace ace {

/// Binary-labelled sequences whose class is carried by the first three steps.
struct LabelledSequences {
  SequenceDataset data;
  std::vector<int> labels;
};

/// Lengths uniform in [10, 15]; steps 0..2 ~ N(+-1, 0.2) by class (p = 0.5
/// each), later steps ~ N(0, 0.2). Reproducible for a given seed.
LabelledSequences synth_sequences(Index n, std::uint64_t seed);

struct TrainingRecord {
  Index epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};
using TrainingLog = std::vector<TrainingRecord>;

struct MlpTrainOptions {
  std::vector<Index> layer_sizes;  // input, hidden..., classes
  Activation hidden_activation = Activation::tanh;
  Index epochs = 2000;
  double learning_rate = 0.05;
  std::uint64_t seed = 0;
};

/// Full-batch gradient descent on the mean softmax cross-entropy of the
/// logits. Labels are class indices in [0, classes). The last layer is linear.
Network train_mlp(const Matrix& features, const std::vector<int>& labels, const MlpTrainOptions& options,
                  TrainingLog* log = nullptr);
/// One-hot labels (one row per sample).
Network train_mlp(const Matrix& features, const Matrix& one_hot, const MlpTrainOptions& options,
                  TrainingLog* log = nullptr);

struct GruTrainOptions {
  Index hidden_dim = 1;
  Index epochs = 300;
  double learning_rate = 1.0;
  /// Initial update-gate bias; positive values start the cell close to
  /// carrying its state forward.
  double update_bias = 2.0;
  std::uint64_t seed = 0;
};

/// Full-batch gradient descent on the mean logistic loss of the sigmoid
/// readout at each sequence's final step. Labels are 0 or 1.
GruNetwork train_gru(const SequenceDataset& data, const std::vector<int>& labels, const GruTrainOptions& options,
                     TrainingLog* log = nullptr);

/// Argmax of the network outputs per row.
std::vector<int> predict_classes(const Network& net, const Matrix& features);
/// Final-step readout thresholded at 0.5, one label per sequence.
std::vector<int> predict_labels(const GruNetwork& rnn, const SequenceDataset& data);
double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Number of final-step predictions that change when the values at `step`
/// are replaced by N(0, 0.2) draws. Sequences shorter than step + 1 are kept
/// as they are.
Index imputation_flips(const GruNetwork& rnn, const SequenceDataset& data, Index step, std::uint64_t seed);

/// Per-column affine map onto [0, 1]; constant columns map to 0.
Matrix min_max_normalize(const Matrix& features);

}  // namespace ace
