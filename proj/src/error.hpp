#pragma once

#include <stdexcept>
#include <string>

namespace curate {

// Numeric values double as CLI exit codes and C API status codes.
enum class ErrorKind : int {
    usage = 1,
    data = 2,
    io = 3,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& message) : Error(ErrorKind::usage, message) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& message) : Error(ErrorKind::data, message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message) : Error(ErrorKind::io, message) {}
};

// Throws the subclass matching `kind`.
[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& message) {
    switch (kind) {
    case ErrorKind::usage: throw UsageError(message);
    case ErrorKind::data: throw DataError(message);
    case ErrorKind::io: break;
    }
    throw IoError(message);
}

} // namespace curate
