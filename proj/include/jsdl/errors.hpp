#pragma once

#include <stdexcept>
#include <string>

namespace jsdl {

// Invalid inputs: bad shapes, malformed files, unusable configuration.
// The CLI maps these to exit code 1.
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numerical breakdown: divergence, non-finite values, singular systems.
// The CLI maps these to exit code 2.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConstantVector : ValidationError {
    using ValidationError::ValidationError;
};
struct DimensionMismatch : ValidationError {
    using ValidationError::ValidationError;
};
struct EmptyActiveSet : ValidationError {
    using ValidationError::ValidationError;
};
struct DegenerateRow : ValidationError {
    using ValidationError::ValidationError;
};
struct TooLarge : ValidationError {
    using ValidationError::ValidationError;
};
struct BadMagic : ValidationError {
    using ValidationError::ValidationError;
};
struct TruncatedFile : ValidationError {
    using ValidationError::ValidationError;
};
struct InsufficientData : ValidationError {
    using ValidationError::ValidationError;
};
struct InvalidSpec : ValidationError {
    using ValidationError::ValidationError;
};

struct NonFinite : NumericalError {
    using NumericalError::NumericalError;
};
struct MaxIterations : NumericalError {
    using NumericalError::NumericalError;
};
struct RankDeficient : NumericalError {
    using NumericalError::NumericalError;
};
struct TransitionPoint : NumericalError {
    using NumericalError::NumericalError;
};

}  // namespace jsdl
