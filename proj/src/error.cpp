#include "ace/error.hpp"

#include <algorithm>

namespace ace {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::input_shape: return "input-shape";
    case ErrorCode::domain: return "domain";
    case ErrorCode::empty_data: return "empty-data";
    case ErrorCode::double_intervention: return "double-intervention";
    case ErrorCode::not_symmetric: return "not-symmetric";
    case ErrorCode::not_psd: return "not-psd";
    case ErrorCode::hessian_cap: return "hessian-cap";
    case ErrorCode::lag_out_of_range: return "lag-out-of-range";
    case ErrorCode::horizon: return "horizon";
    case ErrorCode::sequence_length: return "sequence-length";
    case ErrorCode::single_point_domain: return "single-point-domain";
    case ErrorCode::ill_conditioned: return "ill-conditioned-fit";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::parse: return "parse";
    case ErrorCode::io: return "io";
    case ErrorCode::invalid_argument: return "invalid-argument";
  }
  return "unknown";
}

bool Error::is_numerical() const noexcept {
  switch (code_) {
    case ErrorCode::parse:
    case ErrorCode::io:
      return false;
    default:
      return true;
  }
}

void Diagnostics::warn(std::string message) {
  std::lock_guard lock(mutex_);
  warnings_.push_back(std::move(message));
}

std::vector<std::string> Diagnostics::warnings() const {
  std::lock_guard lock(mutex_);
  return warnings_;
}

bool Diagnostics::empty() const {
  std::lock_guard lock(mutex_);
  return warnings_.empty();
}

bool Diagnostics::contains(std::string_view fragment) const {
  std::lock_guard lock(mutex_);
  return std::any_of(warnings_.begin(), warnings_.end(), [&](const std::string& w) {
    return w.find(fragment) != std::string::npos;
  });
}

}  // namespace ace
