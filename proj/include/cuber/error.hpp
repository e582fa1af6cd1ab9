#pragma once

#include <stdexcept>
#include <string>

namespace cuber {

/// Raised when a caller hands in data that violates an operation's contract
/// (shape mismatch, non-finite entries, out-of-range parameter).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an iterative routine fails to converge.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when internal bookkeeping is inconsistent (e.g. a basis that should
/// exist in memory is missing).
class ConsistencyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

namespace detail {

inline void require(bool cond, const char* what) {
  if (!cond) throw InvalidInput(what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InvalidInput(what);
}

}  // namespace detail
}  // namespace cuber
