#pragma once

#include <stdexcept>
#include <string>

namespace actex {

// Validation errors are defects of input files or configuration (CLI exit 2);
// compute errors arise from data that parsed cleanly but cannot be processed
// (CLI exit 3).
enum class ErrorKind {
  invalid_coordinate,
  invalid_argument,
  schema,
  config,
  io,
  record,
  incoherent_rate_table,
  incomplete_rate_table,
  degenerate_rate,
  impossible_observation,
  empty_support,
  level_mismatch,
  insufficient_data,
  degenerate_variance,
  degenerate_input,
  invalid_resample,
};

inline bool is_validation_error(ErrorKind k) {
  switch (k) {
    case ErrorKind::invalid_coordinate:
    case ErrorKind::invalid_argument:
    case ErrorKind::schema:
    case ErrorKind::config:
    case ErrorKind::io:
    case ErrorKind::record:
    case ErrorKind::incoherent_rate_table:
    case ErrorKind::incomplete_rate_table:
      return true;
    default:
      return false;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace actex
