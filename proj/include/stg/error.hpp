#pragma once

#include <stdexcept>
#include <string>

namespace stg {

// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Tensor shapes do not agree (matmul inner dims, optimizer state, ...).
struct DimensionError : Error {
    using Error::Error;
};

// A scalar argument is outside its legal range (dropout rate, hits k, ...).
struct ParameterError : Error {
    using Error::Error;
};

// An id, label or index is out of range.
struct IndexError : Error {
    using Error::Error;
};

// A value violates a contract that is not a range (non-binary target, ...).
struct ValueError : Error {
    using Error::Error;
};

// Corpus / graph input data is malformed (parse errors, missing ids, ...).
struct DataError : Error {
    using Error::Error;
};

// Feature cache or checkpoint file is unreadable or corrupt.
struct CacheError : Error {
    using Error::Error;
};

// Run configuration is invalid. CLI exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

// A required upstream artifact is missing. CLI exit code 3.
struct DependencyError : Error {
    using Error::Error;
};

// Non-finite values or a failed numeric check. CLI exit code 4.
struct NumericError : Error {
    using Error::Error;
};

// Model trained/eval state does not allow the call (merge in training mode, ...).
struct StateError : Error {
    using Error::Error;
};

}  // namespace stg
