#pragma once

#include <stdexcept>
#include <string>

namespace perfstop {

/// Argument outside the mathematical domain of an operation (t ∉ [0,T], p ∉ (0,1), ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Invalid model, forecast or rule parameters, detected at construction.
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A root solver could not bracket or converge.
class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A series or quadrature did not reach its accuracy target.
class AccuracyError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Exhaustive enumeration would exceed its configured cap.
class SizeError : public std::length_error {
public:
    using std::length_error::length_error;
};

/// Malformed input file. The message carries the offending line number.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line)
        : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

}  // namespace perfstop
