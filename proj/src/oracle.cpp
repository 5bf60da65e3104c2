#include "ace/oracle.hpp"

#include <string>
#include <vector>

namespace ace {

namespace {

double pairwise_range(const double* v, Index n) {
  if (n <= 8) {
    double s = 0.0;
    for (Index j = 0; j < n; ++j) s += v[j];
    return s;
  }
  const Index half = n / 2;
  return pairwise_range(v, half) + pairwise_range(v + half, n - half);
}

}  // namespace

double pairwise_sum(const Vector& values) { return pairwise_range(values.data(), values.size()); }

double enumerate_ie(const Network& net, const Matrix& rows, Index i, double alpha, Index output) {
  if (rows.rows() == 0) throw Error(ErrorCode::empty_data, "oracle needs at least one row");
  if (i < 0 || i >= rows.cols()) throw Error(ErrorCode::input_shape, "intervened index out of range");
  if (output < 0 || output >= net.output_dim()) throw Error(ErrorCode::input_shape, "output index out of range");
  Matrix inputs = rows.transpose();
  inputs.row(i).setConstant(alpha);
  const Vector y = forward_batch(net, inputs).row(output).transpose();
  return pairwise_sum(y) / static_cast<double>(y.size());
}

double enumerate_ie(const Network& net, const Dataset& data, Index i, double alpha, Index output) {
  return enumerate_ie(net, data.rows, i, alpha, output);
}

double enumerate_ie_recurrent(const GruNetwork& rnn, const SequenceDataset& data, Index i, Index step,
                              Index t_out, double alpha, Index output) {
  if (data.sequences.empty()) throw Error(ErrorCode::empty_data, "oracle needs at least one sequence");
  if (step < 0 || step > t_out) throw Error(ErrorCode::invalid_argument, "intervened step must lie in 0..t_out");
  if (output < 0 || output >= rnn.output_dim()) throw Error(ErrorCode::input_shape, "output index out of range");
  const bool feedback = rnn.outputs_feed_inputs();
  const Index needed = feedback ? step + 1 : t_out + 1;
  const Override ov{step, i, alpha};
  std::vector<double> ys;
  for (const Matrix& seq : data.sequences) {
    if (seq.rows() < needed) continue;
    const UnrollResult run = unroll(rnn, seq.topRows(needed), t_out + 1, std::span<const Override>(&ov, 1));
    ys.push_back(run.outputs(t_out, output));
  }
  if (ys.empty())
    throw Error(ErrorCode::horizon, "no sequence covers step " + std::to_string(needed - 1));
  const Vector y = Eigen::Map<const Vector>(ys.data(), static_cast<Index>(ys.size()));
  return pairwise_sum(y) / static_cast<double>(y.size());
}

}  // namespace ace
