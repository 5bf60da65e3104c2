#pragma once

#include <functional>
#include <optional>
#include <string_view>
#include <vector>

#include "ace/moments.hpp"
#include "ace/netcore.hpp"
#include "ace/regressor.hpp"

namespace ace {

enum class Method { exact_taylor, approx_directional, oracle };

std::string_view to_string(Method method);
/// Accepts "exact", "approx", "oracle" and the long names.
Method parse_method(std::string_view name);

/// `num` evenly spaced intervention values covering [low, high].
struct InterventionGrid {
  Index feature = 0;
  std::optional<Index> step;
  Domain domain;
  Vector alphas;
};

InterventionGrid make_grid(Index feature, const Domain& domain, Index num, std::optional<Index> step = std::nullopt);

struct InterventionSweep {
  InterventionGrid grid;
  Vector ie;  // E[y | do(x_i = alpha)] per grid value
  Method method = Method::exact_taylor;
  Index output = 0;
};

struct AceResult {
  double alpha = 0.0;
  double ie = 0.0;
  double baseline = 0.0;
  double ace = 0.0;
  std::optional<double> predictive_variance;
};

/// f(mu) + 1/2 Tr(H(mu) Cov) under do(x_i = alpha). `moments` must be
/// observational; the intervention is applied here.
double ie_exact(const Network& net, const Moments& moments, Index i, double alpha, Index output,
                Index hessian_cap = kDefaultHessianCap, Diagnostics* diag = nullptr);

/// Same expectation with the trace term replaced by second differences along
/// the scaled eigenvectors of the intervened covariance.
double ie_approx(const Network& net, const Moments& moments, Index i, double alpha, double eps, Index output,
                 Diagnostics* diag = nullptr);

struct SweepOptions {
  Index num = 50;
  Method method = Method::exact_taylor;
  std::optional<Domain> domain;  // overrides the data domain of the feature
  double eps = kDefaultSecondDifferenceStep;
  Index hessian_cap = kDefaultHessianCap;
  unsigned threads = 0;  // 0: ACE_THREADS or the hardware concurrency
};

/// Interventional expectations over the grid of one input of a feed-forward
/// network. Moments are computed once; exact sweeps above the Hessian cap
/// fall back to the directional approximation with a warning.
InterventionSweep sweep_feedforward(const Network& net, const Dataset& data, Index i, Index output,
                                    const SweepOptions& options = {}, Diagnostics* diag = nullptr);

/// Interventional expectations of y^{t_out} over the grid of input i at step
/// `step`. For each alpha every training sequence is replayed with the
/// override (inputs before `step` come from data, later ones are generated
/// when outputs feed inputs); moments of the flattened window 0..t_out are
/// taken over the replays and the Taylor estimate is applied to the unrolled
/// network. Sequences too short for the window are skipped.
InterventionSweep sweep_recurrent(const GruNetwork& rnn, const SequenceDataset& data, Index i, Index step,
                                  Index t_out, Index output, const SweepOptions& options = {},
                                  Diagnostics* diag = nullptr);

/// Weight over intervention values; empty means uniform.
using InterventionWeight = std::function<double(double alpha)>;

/// Trapezoidal (weighted) mean of the sweep over its grid.
double sweep_baseline(const InterventionSweep& sweep, const InterventionWeight& weight = {});

/// ACE from the sweep alone: piecewise-linear ie minus the trapezoidal baseline.
AceResult ace_at(const InterventionSweep& sweep, double alpha, Diagnostics* diag = nullptr);
/// ACE from a fitted causal regressor, with its predictive variance.
AceResult ace_at(const CausalRegressor& reg, double alpha, Diagnostics* diag = nullptr);

/// f(u with x_i := alpha) - f(u).
double ice(const Network& net, const Vector& u, Index i, double alpha, Index output);

struct SaliencyOptions {
  SweepOptions sweep;
  RegressorOptions regressor;
  bool positive_only = false;
};

/// Entry j is the ACE of feature j at alpha = instance[j].
Vector saliency(const Network& net, const Dataset& data, const Vector& instance, Index output,
                const SaliencyOptions& options = {}, Diagnostics* diag = nullptr);

/// (step x feature) map for the output at the instance's last step.
Matrix saliency(const GruNetwork& rnn, const SequenceDataset& data, const Matrix& instance, Index output,
                const SaliencyOptions& options = {}, Diagnostics* diag = nullptr);

/// |det J| for square J, |J|_inf for a single row, smallest singular value otherwise.
double dependence_measure(const Matrix& jacobian);

/// Largest lag whose Jacobian dependence exceeds `tol` (0 if none does).
Index sequence_lag(const GruNetwork& rnn, const Matrix& sequence, Index t, std::optional<Index> output,
                   double tol = 1e-8);

struct TauResult {
  Index tau = 0;
  std::vector<Index> per_sequence;
};

/// Rounded mean of the per-sequence lags over sequences covering step t.
TauResult tau(const GruNetwork& rnn, const SequenceDataset& data, Index t, std::optional<Index> output,
              double tol = 1e-8);

}  // namespace ace
