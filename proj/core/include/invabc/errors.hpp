#pragma once

#include <stdexcept>
#include <string>

namespace invabc {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor/matrix dimension disagreement; message names the offending axis.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Bad user-supplied configuration (out-of-range value, missing key, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File parsing or serialization failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Numerical failure at runtime (divergence, near-singular system, ...).
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace invabc
