#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace thermalsr {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Filesystem or stream failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Unsupported or malformed image encoding.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Operands whose dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid parameters or an inconsistent configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Malformed input records. Carries the 1-based line number when known.
class DataError : public Error {
public:
    explicit DataError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace thermalsr
