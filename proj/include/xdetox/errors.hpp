#pragma once

#include <stdexcept>
#include <string>

namespace xdetox {

// Base of every error thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration or violated precondition (CLI maps these to exit 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Bad runtime input (empty text, out-of-range id, mismatched vectors).
class InputError : public Error {
public:
    using Error::Error;
};

// Malformed file content; message carries the offending line number.
class SchemaError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Remote service replied with a non-2xx status.
class ServiceError : public Error {
public:
    ServiceError(const std::string& msg, int status) : Error(msg), status_(status) {}
    int status() const { return status_; }

private:
    int status_ = 0;
};

class TimeoutError : public Error {
public:
    using Error::Error;
};

// Checkpoint or cache integrity failure.
class CorruptionError : public Error {
public:
    using Error::Error;
};

}  // namespace xdetox
