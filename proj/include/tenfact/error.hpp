#pragma once

#include <stdexcept>
#include <string>

namespace tenfact {

/// Base of every exception the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad arguments, shape mismatches, malformed files. Maps to CLI exit code 1.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// A numerical routine could not produce a meaningful answer
/// (non-convergence, vanishing iterate, unstable eigenproblem). Exit code 2.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// Rank deficiency detected during orthogonalization. Carries the first
/// offending column so callers can re-randomize it.
class DegenerateInput : public NumericalFailure {
public:
    DegenerateInput(const std::string& what, long column)
        : NumericalFailure(what), column_(column) {}

    long column() const noexcept { return column_; }

private:
    long column_;
};

}  // namespace tenfact
