#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace psfdecon {

/// Mismatched dimensions between operands.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid parameter or configuration value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// File missing, malformed, or unwritable.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative method broke one of its numerical contracts (typically
/// monotone descent). Carries the objective trace up to the failure.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, std::vector<double> trace = {})
      : std::runtime_error(what), trace_(std::move(trace)) {}

  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

}  // namespace psfdecon
