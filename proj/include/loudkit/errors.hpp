#pragma once

#include <stdexcept>
#include <string>

namespace loudkit {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// File exists but is not a format this toolkit reads.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Payload contains invalid values (NaN/Inf samples).
class DataError : public Error {
public:
    using Error::Error;
};

/// Inputs that must agree (shape, rate, layout) do not.
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// Unsupported or invalid configuration value.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Invalid argument to an operation (empty input, bad range).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Signal too short for the requested analysis.
class InsufficientDurationError : public Error {
public:
    using Error::Error;
};

/// No gating block survived; loudness of the material is undefined.
class SilenceError : public Error {
public:
    using Error::Error;
};

/// A parameter search could not reach the requested target.
class SearchError : public Error {
public:
    using Error::Error;
};

/// A wrapped external process failed.
class ProcessError : public Error {
public:
    using Error::Error;
};

} // namespace loudkit
