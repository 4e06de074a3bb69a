#pragma once

#include <stdexcept>
#include <string>

namespace evae {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: ConfigError/DomainError -> 1 (usage), FormatError/ValidationError/
// DimensionError -> 2 (data), NumericError/StateError -> 3.

// Bad user-facing configuration: out-of-range hyperparameters, unknown kinds.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape mismatch between tensors or between arrays and declared dimensions.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Data failed a semantic check (non-normalized kernel, pixel out of range,
// checkpoint architecture mismatch).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Byte-level parse failure of an external file format.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Computation produced or encountered a non-finite / meaningless value.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation called in an order its contract forbids (e.g. backward twice).
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace evae
