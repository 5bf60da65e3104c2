#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ace/netcore.hpp"

namespace ace {

/// Closed interval [low, high] an input may be intervened on.
struct Domain {
  double low = 0.0;
  double high = 0.0;

  double width() const { return high - low; }
  bool contains(double x) const { return x >= low && x <= high; }
};

/// Observation table: one row per sample, one column per input neuron.
struct Dataset {
  std::vector<std::string> feature_names;
  Matrix rows;  // n x k
  std::vector<Domain> domains;

  Index size() const { return rows.rows(); }
  Index features() const { return rows.cols(); }
  Index feature_index(std::string_view name) const;
};

/// Per-column [min, max].
std::vector<Domain> observed_domains(const Matrix& rows);

/// Validates the table; missing names become x0, x1, ... and missing domains
/// default to the observed range of each column.
Dataset make_dataset(Matrix rows, std::vector<std::string> feature_names = {},
                     std::vector<Domain> domains = {});

/// Variable-length sequences sharing one feature layout.
struct SequenceDataset {
  std::vector<std::string> feature_names;
  std::vector<Matrix> sequences;  // each T_s x k
  /// Optional user-supplied domain per feature, applied at every step.
  std::vector<std::optional<Domain>> feature_domains;

  Index size() const { return static_cast<Index>(sequences.size()); }
  Index features() const { return static_cast<Index>(feature_names.size()); }
  Index feature_index(std::string_view name) const;
  Index min_length() const;
  Index max_length() const;
  /// User domain for the feature if given, else the observed range of the
  /// (step, feature) slot over sequences that reach that step.
  Domain slot_domain(Index step, Index feature) const;
};

SequenceDataset make_sequence_dataset(std::vector<Matrix> sequences,
                                      std::vector<std::string> feature_names = {});

struct Intervention {
  Index index = 0;
  double value = 0.0;
};

/// First and second moments of the inputs, possibly under do(x_i = alpha).
struct Moments {
  Vector mu;
  Matrix cov;
  std::optional<Intervention> intervened_on;

  Index dimension() const { return mu.size(); }
};

/// Sample mean and population (1/n) covariance.
Moments empirical_moments(const Matrix& rows);
Moments empirical_moments(const Dataset& data);

/// mu[i] := alpha and row/column i of the covariance zeroed; nothing else
/// changes. Intervening twice on the same moments is rejected.
Moments intervene(const Moments& moments, Index i, double alpha);

/// Eigenvalues in descending order (clamped at zero) with orthonormal
/// eigenvectors as columns.
struct EigenPairs {
  Vector eigenvalues;
  Matrix eigenvectors;

  /// Columns sqrt(lambda_r) e_r, skipping zero eigenvalues.
  Matrix scaled_directions() const;
  Matrix reconstruct() const;
};

EigenPairs eigendecompose(const Matrix& cov);
EigenPairs eigendecompose(const Moments& moments);

}  // namespace ace
