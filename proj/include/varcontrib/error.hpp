#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace varcontrib {

/// Input violates a documented precondition or type invariant.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a trustworthy result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Cholesky factorization hit a non-positive pivot.
class DecompositionError : public NumericalError {
public:
    DecompositionError(std::size_t pivot, double value)
        : NumericalError("matrix is not positive definite: pivot " + std::to_string(pivot) +
                         " has value " + std::to_string(value)),
          pivot_(pivot) {}

    std::size_t pivot() const noexcept { return pivot_; }

private:
    std::size_t pivot_;
};

/// No kernel mass near the evaluation point.
class EmptyNeighborhoodError : public NumericalError {
public:
    explicit EmptyNeighborhoodError(double x)
        : NumericalError("empty neighborhood: kernel weights vanish at x = " + std::to_string(x)),
          x_(x) {}

    double point() const noexcept { return x_; }

private:
    double x_;
};

/// Malformed configuration text; line numbers are 1-based.
class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace varcontrib
