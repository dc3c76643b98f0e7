#pragma once

#include <stdexcept>
#include <string>

namespace mimoe {

// Every error thrown by the library derives from Error. The CLI maps the
// three families (usage, data, numeric) onto exit codes 1, 2 and 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed or invalid input data (files, point clouds, datasets).
class DataError : public Error {
public:
    using Error::Error;
};

class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ScheduleError : public Error {
public:
    using Error::Error;
};

class ArgumentError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class RoutingError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Non-finite losses, failed gradient checks, divergence.
class NumericError : public Error {
public:
    using Error::Error;
};

class LossError : public NumericError {
public:
    using NumericError::NumericError;
};

}  // namespace mimoe
