#pragma once

#include <stdexcept>
#include <string>

namespace mfirank {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (missing column, duplicate key, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Bad arguments or configuration supplied by the caller.
class UsageError : public Error {
public:
    using Error::Error;
};

/// An internal cross-check failed; indicates a bug or a numerically hostile input.
class InvariantError : public Error {
public:
    using Error::Error;
};

} // namespace mfirank
