#pragma once

#include <stdexcept>
#include <string>

namespace ambeq {

// A parameter is outside its admissible range (bad user input).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// An argument or state lies outside the validity domain of a formula
// or solver (e.g. alpha at or below the solvability threshold).
class ValidityError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// A numerical procedure failed to converge or degenerated.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// I/O failure (missing file, unparseable row, ...).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace ambeq
