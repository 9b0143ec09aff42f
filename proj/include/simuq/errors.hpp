#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace simuq {

/// Base class for all toolkit errors. Carries a short machine-readable code
/// (e.g. "NotPositiveDefinite") alongside the human-readable message.
class error : public std::runtime_error {
 public:
  error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// Configuration / usage errors: bad files, malformed schemas, invalid sizes.
/// The CLI maps these to exit code 2.
class config_error : public error {
 public:
  using error::error;
};

/// Numerical failures: non-SPD matrices, degenerate resamples that cannot be
/// repaired, analytic preconditions that do not hold. CLI exit code 3.
class numeric_error : public error {
 public:
  using error::error;
};

}  // namespace simuq
