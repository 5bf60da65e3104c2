#pragma once

#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ace {

enum class ErrorCode {
  input_shape,
  domain,
  empty_data,
  double_intervention,
  not_symmetric,
  not_psd,
  hessian_cap,
  lag_out_of_range,
  horizon,
  sequence_length,
  single_point_domain,
  ill_conditioned,
  divergence,
  parse,
  io,
  invalid_argument,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so the
/// command-line front end can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// True for failures of the numerical kernels (as opposed to bad input
  /// files or flags).
  bool is_numerical() const noexcept;

 private:
  ErrorCode code_;
};

/// Collects non-fatal warnings. Safe to share between sweep workers.
class Diagnostics {
 public:
  void warn(std::string message);
  std::vector<std::string> warnings() const;
  bool empty() const;
  bool contains(std::string_view fragment) const;

 private:
  mutable std::mutex mutex_;
  std::vector<std::string> warnings_;
};

inline void warn(Diagnostics* diag, std::string message) {
  if (diag != nullptr) diag->warn(std::move(message));
}

}  // namespace ace
