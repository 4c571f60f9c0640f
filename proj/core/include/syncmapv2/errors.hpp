#pragma once

#include <stdexcept>
#include <string>

namespace syncmap {

// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// File could not be opened, read, or written.
class IoError : public Error {
public:
    using Error::Error;
};

// File exists but its contents are not in the expected format.
class FormatError : public Error {
public:
    using Error::Error;
};

// Configuration values violate a structural requirement.
class ConfigError : public Error {
public:
    using Error::Error;
};

// A function argument violates its precondition.
class ArgumentError : public Error {
public:
    using Error::Error;
};

// An iterative numerical procedure failed to converge.
class NumericError : public Error {
public:
    NumericError(const std::string& msg, double last_estimate)
        : Error(msg), last_estimate(last_estimate) {}
    double last_estimate;
};

// Operation requested on an object whose state cannot support it.
class StateError : public Error {
public:
    using Error::Error;
};

// Statistical test is undefined for the given samples.
class StatisticsError : public Error {
public:
    using Error::Error;
};

}  // namespace syncmap
