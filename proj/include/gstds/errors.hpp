#pragma once

#include <stdexcept>
#include <string>

namespace gstds {

enum class ErrorCode {
  bad_magic,
  bad_header,
  dimension_mismatch,
  non_finite_value,
  zero_feature_row,
  duplicate_id,
  label_out_of_range,
  infeasible,
  non_convergence,
  invalid_argument,
  configuration,
  divergence,
  io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gstds
