#pragma once

#include <stdexcept>
#include <string>

namespace jsreg {

// Bad arguments or malformed input data (CLI exit code 2).
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DimensionMismatch : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

// Optimization produced a non-finite loss or activation (CLI exit code 3).
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// File system or stream failure (CLI exit code 4).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace jsreg
