#pragma once

#include <stdexcept>
#include <string>

namespace gwgen {

// Base for every domain-level failure raised by the library. The CLI maps
// these to exit code 1; usage problems are reported separately.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Input violates a documented precondition or invariant.
class InvalidInput : public Error {
public:
    using Error::Error;
};

// Malformed file contents (bad magic, unparseable line, unknown layer kind).
class FormatError : public Error {
public:
    using Error::Error;
};

// Declared tensor sizes disagree with the bytes actually present.
class LengthError : public Error {
public:
    using Error::Error;
};

// Consecutive layers whose shapes do not compose.
class CompositionError : public Error {
public:
    using Error::Error;
};

// Non-finite value produced inside a computation.
class NumericError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Consistency check over produced artifacts failed (missing files, counts).
class ValidationError : public Error {
public:
    using Error::Error;
};

} // namespace gwgen
