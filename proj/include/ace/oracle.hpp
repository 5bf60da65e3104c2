#pragma once

#include "ace/moments.hpp"
#include "ace/netcore.hpp"

namespace ace {

/// Order-independent pairwise summation.
double pairwise_sum(const Vector& values);

/// Brute-force E[y | do(x_i = alpha)]: every row with column i set to alpha
/// is pushed through the network and the outputs are averaged.
double enumerate_ie(const Network& net, const Dataset& data, Index i, double alpha, Index output);
double enumerate_ie(const Network& net, const Matrix& rows, Index i, double alpha, Index output);

/// Brute-force E[y^{t_out} | do(x_i^{step} = alpha)]: every sequence is replayed
/// with the override and the step-t_out outputs are averaged.
double enumerate_ie_recurrent(const GruNetwork& rnn, const SequenceDataset& data, Index i, Index step,
                              Index t_out, double alpha, Index output);

}  // namespace ace
