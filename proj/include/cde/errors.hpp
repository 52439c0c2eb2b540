#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace cde {

// Bad arguments: dimension mismatches, invalid sizes, malformed specs.
struct InputError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Problems with user data files.
struct ParseError : std::runtime_error {
    ParseError(const std::string& msg, std::size_t row)
        : std::runtime_error(msg), row(row) {}
    std::size_t row;  // 1-based data row, 0 for the header
};

// Data that cannot support the requested operation (e.g. all ys equal).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Evaluation point outside the bounded domain.
struct DomainError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// Non-finite inputs to a numerical routine.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// An iterative solver gave up; carries the last iterate.
struct NonConvergenceError : std::runtime_error {
    NonConvergenceError(const std::string& msg, Eigen::VectorXd last)
        : std::runtime_error(msg), last_iterate(std::move(last)) {}
    Eigen::VectorXd last_iterate;
};

// Parameter norm blew up (e.g. complete separation in the logistic fit).
struct DivergenceError : NonConvergenceError {
    using NonConvergenceError::NonConvergenceError;
};

// An internal invariant was violated. Always a bug.
struct InternalError : std::logic_error {
    using std::logic_error::logic_error;
};

}  // namespace cde
