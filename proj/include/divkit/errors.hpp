#pragma once

#include <stdexcept>
#include <string>

namespace divkit {

/// Input problems: missing files, malformed records, shape mismatches,
/// violated preconditions. CLI maps these to exit code 2.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite values, diverging optimization. CLI maps these to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Bad flag combinations and config keys. CLI maps these to exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace divkit
