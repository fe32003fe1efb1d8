#pragma once

#include <stdexcept>
#include <string>

namespace trb {

/// Bad inputs: malformed files, schema violations, impossible configurations.
/// The CLI maps this family to exit code 2.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Estimation failed on numerical grounds (non-convergence, singular system,
/// degenerate data). The CLI maps this family to exit code 3.
class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// No usable deep out-of-the-money quotes remain after filtering.
class NoTailDataError : public NumericError {
public:
    explicit NoTailDataError(const std::string& msg) : NumericError(msg) {}
};

/// Tail slope estimate violates the decay bound (alpha <= 0).
class DegenerateTailError : public NumericError {
public:
    explicit DegenerateTailError(const std::string& msg) : NumericError(msg) {}
};

/// Iterative fit did not converge or the design is rank deficient.
class FitError : public NumericError {
public:
    explicit FitError(const std::string& msg) : NumericError(msg) {}
};

} // namespace trb
