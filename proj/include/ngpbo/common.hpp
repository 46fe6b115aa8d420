#pragma once

#include <stdexcept>
#include <string>

namespace ngpbo {

/// Bad configuration or flags; the CLI maps this to exit code 2.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Dimension mismatch between containers that must agree.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Violated call contract (stale cache, negative sigma, ...).
struct ContractError : std::logic_error {
    using std::logic_error::logic_error;
};

/// Numerical failure: non-finite values, Cholesky breakdown.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace ngpbo
