#pragma once

#include <stdexcept>
#include <string>

namespace ckl {

/// Bad input: malformed specs, violated preconditions, out-of-domain queries.
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A computation that could not be completed with the requested accuracy
/// (degenerate metric, ill-conditioned fit, overflow, truncated geodesic).
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace ckl
