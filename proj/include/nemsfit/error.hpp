#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace nemsfit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated a documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Touchstone input could not be read. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
public:
    ParseError(std::size_t line, const std::string& what)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A 2x2 network matrix could not be inverted at `frequency()` Hz.
class SingularMatrixError : public Error {
public:
    SingularMatrixError(double frequency, const std::string& what)
        : Error(what + " at " + std::to_string(frequency) + " Hz"), frequency_(frequency) {}

    double frequency() const noexcept { return frequency_; }

private:
    double frequency_;
};

/// Phase unwrapping is ambiguous; the grid must be densified.
class PhaseUnwrapError : public Error {
public:
    using Error::Error;
};

/// Least-squares fit produced non-finite cost.
class FitError : public Error {
public:
    FitError(int iteration, const std::string& what)
        : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

}  // namespace nemsfit
