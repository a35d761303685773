#pragma once

#include <stdexcept>
#include <string>

namespace fcdm {

/// Raised when a caller breaks an operation's preconditions (bad shapes,
/// out-of-range arguments, unknown identifiers).
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised on filesystem or format failures. The message names the path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when a numerical procedure produces a non-finite value.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fcdm
