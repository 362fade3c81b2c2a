#pragma once

#include <stdexcept>
#include <string>

namespace cpsr {

// Error taxonomy mirrored by the CLI exit codes:
//   UsageError -> 1, NumericalError -> 2, IoError -> 3.

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Raised when the uncompressed baseline cannot fit its dense
// test-by-history matrix inside the configured memory budget.
struct TpsrInfeasibleError : NumericalError {
  explicit TpsrInfeasibleError(const std::string& detail)
      : NumericalError("TPSR infeasible: " + detail) {}
};

}  // namespace cpsr
