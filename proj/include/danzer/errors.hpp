#pragma once

#include <stdexcept>
#include <string>

namespace danzer {

/// Affinely dependent or otherwise rank-deficient input.
struct DegenerateInputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Parameters outside the range where even log-space evaluation is meaningful.
struct ScheduleRangeError : std::domain_error {
    using std::domain_error::domain_error;
};

/// A query region leaves the window on which a point-set oracle is defined.
/// Distinct from an empty query result: emptiness is a certified answer,
/// this is a refusal to answer.
struct OutOfWindowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Iterative solver hit its iteration cap before the requested tolerance.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A set-distance result that cannot be trusted because the finite windows of
/// the operands are smaller than 1/distance.
struct WindowInsufficiencyError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace danzer
