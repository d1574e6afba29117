#pragma once

#include <stdexcept>
#include <string>

namespace espvfm {

/// Bad input: malformed config, schema mismatch, out-of-domain argument.
/// The CLI maps this to exit code 2.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation that was well-posed but failed numerically (integration
/// blow-up, Newton non-convergence, NaN loss). The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace espvfm
