#pragma once

#include <stdexcept>
#include <string>

namespace sprtl {

// Thrown when a caller hands us arguments that violate a documented
// precondition (mismatched dimensions, non-positive smoothing parameter,
// weights that do not sum to one, ...).
class InvalidArgument : public std::invalid_argument {
public:
    explicit InvalidArgument(const std::string& what) : std::invalid_argument(what) {}
};

// Thrown when an input file cannot be read or does not parse as the
// documented CSV layout. The message carries the offending path and,
// where possible, the line number.
class DataFormatError : public std::runtime_error {
public:
    explicit DataFormatError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown when an iterative routine exhausts its budget without reaching
// its stated stopping state. Callers that can tolerate a truncated result
// catch this; the experiment driver treats it as a hard failure.
class ConvergenceError : public std::runtime_error {
public:
    explicit ConvergenceError(const std::string& what) : std::runtime_error(what) {}
};

// Thrown by the linear-programming layer when a constraint system admits
// no feasible point (e.g. the precision-matrix tolerance is too tight).
class InfeasibleError : public std::runtime_error {
public:
    explicit InfeasibleError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sprtl
