#include "ace/moments.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include <Eigen/Eigenvalues>

#ifdef ACE_HAVE_LAPACKE
#include <lapacke.h>
#endif

namespace ace {

namespace {

Index find_name(const std::vector<std::string>& names, std::string_view name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw Error(ErrorCode::invalid_argument, "unknown feature '" + std::string(name) + "'");
  return static_cast<Index>(it - names.begin());
}

struct AscendingEigen {
  Vector values;
  Matrix vectors;
};

AscendingEigen symmetric_eigen(const Matrix& cov) {
  AscendingEigen e;
#ifdef ACE_HAVE_LAPACKE
  // Divide and conquer; several times faster than QR iteration for large k.
  e.vectors = cov;
  e.values.resize(cov.rows());
  const auto n = static_cast<lapack_int>(cov.rows());
  if (n > 0 && LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, e.vectors.data(), n, e.values.data()) != 0)
    throw Error(ErrorCode::not_psd, "eigendecomposition did not converge");
#else
  const Eigen::SelfAdjointEigenSolver<Matrix> solver(cov);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::not_psd, "eigendecomposition did not converge");
  e.values = solver.eigenvalues();
  e.vectors = solver.eigenvectors();
#endif
  return e;
}

std::vector<std::string> default_names(Index k) {
  std::vector<std::string> names;
  for (Index j = 0; j < k; ++j) names.push_back("x" + std::to_string(j));
  return names;
}

}  // namespace

Index Dataset::feature_index(std::string_view name) const { return find_name(feature_names, name); }

std::vector<Domain> observed_domains(const Matrix& rows) {
  std::vector<Domain> domains;
  for (Index j = 0; j < rows.cols(); ++j) domains.push_back({rows.col(j).minCoeff(), rows.col(j).maxCoeff()});
  return domains;
}

Dataset make_dataset(Matrix rows, std::vector<std::string> feature_names, std::vector<Domain> domains) {
  if (rows.rows() == 0) throw Error(ErrorCode::empty_data, "dataset has no rows");
  if (rows.cols() == 0) throw Error(ErrorCode::input_shape, "dataset has no features");
  if (!rows.allFinite()) throw Error(ErrorCode::domain, "dataset contains non-finite values");
  if (feature_names.empty()) feature_names = default_names(rows.cols());
  if (static_cast<Index>(feature_names.size()) != rows.cols())
    throw Error(ErrorCode::input_shape, "feature name count does not match column count");
  const std::vector<Domain> observed = observed_domains(rows);
  if (domains.empty()) domains = observed;
  if (static_cast<Index>(domains.size()) != rows.cols())
    throw Error(ErrorCode::input_shape, "domain count does not match column count");
  for (std::size_t j = 0; j < domains.size(); ++j) {
    if (domains[j].low > observed[j].low || domains[j].high < observed[j].high)
      throw Error(ErrorCode::domain, "domain of '" + feature_names[j] + "' does not cover the observed values");
  }
  return Dataset{std::move(feature_names), std::move(rows), std::move(domains)};
}

Index SequenceDataset::feature_index(std::string_view name) const { return find_name(feature_names, name); }

Index SequenceDataset::min_length() const {
  Index m = std::numeric_limits<Index>::max();
  for (const auto& s : sequences) m = std::min(m, s.rows());
  return sequences.empty() ? 0 : m;
}

Index SequenceDataset::max_length() const {
  Index m = 0;
  for (const auto& s : sequences) m = std::max(m, s.rows());
  return m;
}

Domain SequenceDataset::slot_domain(Index step, Index feature) const {
  if (feature < 0 || feature >= features()) throw Error(ErrorCode::input_shape, "feature index out of range");
  if (static_cast<std::size_t>(feature) < feature_domains.size() && feature_domains[feature])
    return *feature_domains[feature];
  Domain d{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (const auto& s : sequences) {
    if (s.rows() <= step) continue;
    d.low = std::min(d.low, s(step, feature));
    d.high = std::max(d.high, s(step, feature));
  }
  if (d.low > d.high) throw Error(ErrorCode::horizon, "no sequence reaches step " + std::to_string(step));
  return d;
}

SequenceDataset make_sequence_dataset(std::vector<Matrix> sequences, std::vector<std::string> feature_names) {
  if (sequences.empty()) throw Error(ErrorCode::empty_data, "sequence dataset is empty");
  const Index k = sequences.front().cols();
  for (const auto& s : sequences) {
    if (s.cols() != k) throw Error(ErrorCode::input_shape, "sequences disagree on feature count");
    if (s.rows() == 0) throw Error(ErrorCode::sequence_length, "empty sequence");
    if (!s.allFinite()) throw Error(ErrorCode::domain, "sequence contains non-finite values");
  }
  if (feature_names.empty()) feature_names = default_names(k);
  if (static_cast<Index>(feature_names.size()) != k)
    throw Error(ErrorCode::input_shape, "feature name count does not match sequence width");
  SequenceDataset data;
  data.feature_names = std::move(feature_names);
  data.sequences = std::move(sequences);
  data.feature_domains.assign(static_cast<std::size_t>(k), std::nullopt);
  return data;
}

Moments empirical_moments(const Matrix& rows) {
  if (rows.rows() == 0) throw Error(ErrorCode::empty_data, "cannot take moments of zero rows");
  const double n = static_cast<double>(rows.rows());
  Moments m;
  m.mu = rows.colwise().mean().transpose();
  const Matrix centered = rows.rowwise() - m.mu.transpose();
  m.cov = (centered.transpose() * centered) / n;
  return m;
}

Moments empirical_moments(const Dataset& data) { return empirical_moments(data.rows); }

Moments intervene(const Moments& moments, Index i, double alpha) {
  if (i < 0 || i >= moments.dimension()) throw Error(ErrorCode::input_shape, "intervened index out of range");
  if (moments.intervened_on)
    throw Error(ErrorCode::double_intervention, "moments are already intervened on; one neuron per sweep");
  if (!std::isfinite(alpha)) throw Error(ErrorCode::domain, "non-finite intervention value");
  Moments out = moments;
  out.mu(i) = alpha;
  out.cov.row(i).setZero();
  out.cov.col(i).setZero();
  out.intervened_on = Intervention{i, alpha};
  return out;
}

Matrix EigenPairs::scaled_directions() const {
  Index r = 0;
  while (r < eigenvalues.size() && eigenvalues(r) > 0.0) ++r;
  return eigenvectors.leftCols(r) * eigenvalues.head(r).cwiseSqrt().asDiagonal();
}

Matrix EigenPairs::reconstruct() const {
  return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
}

EigenPairs eigendecompose(const Matrix& cov) {
  if (cov.rows() != cov.cols()) throw Error(ErrorCode::input_shape, "covariance must be square");
  if (!cov.allFinite()) throw Error(ErrorCode::domain, "non-finite covariance entry");
  const double scale = std::max(1.0, cov.cwiseAbs().maxCoeff());
  if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw Error(ErrorCode::not_symmetric, "covariance is not symmetric");

  const AscendingEigen solver = symmetric_eigen(cov);
  const Index k = cov.rows();
  const double floor = -1e-10 * std::abs(cov.trace());
  EigenPairs pairs;
  pairs.eigenvalues.resize(k);
  pairs.eigenvectors.resize(k, k);
  // Solver order is ascending; store descending.
  for (Index r = 0; r < k; ++r) {
    const double lambda = solver.values(k - 1 - r);
    if (lambda < floor)
      throw Error(ErrorCode::not_psd, "covariance has a negative eigenvalue " + std::to_string(lambda));
    pairs.eigenvalues(r) = std::max(lambda, 0.0);
    pairs.eigenvectors.col(r) = solver.vectors.col(k - 1 - r);
  }
  return pairs;
}

EigenPairs eigendecompose(const Moments& moments) { return eigendecompose(moments.cov); }

}  // namespace ace
