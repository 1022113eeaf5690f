#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace pulse_atom {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Argument outside the mathematical or physical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

// Parameter combination that the implementation does not cover.
class UnsupportedParameter : public Error {
public:
    using Error::Error;
};

// Integrator, root finder or fit failed to converge.
class NumericalError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Timestamp file whose content does not follow the format.
class MalformedFile : public IoError {
public:
    MalformedFile(const std::string& what, std::uint64_t byte_offset)
        : IoError(what + " (byte offset " + std::to_string(byte_offset) + ")"),
          offset_(byte_offset) {}

    std::uint64_t byte_offset() const noexcept { return offset_; }

private:
    std::uint64_t offset_;
};

class VersionMismatch : public IoError {
public:
    using IoError::IoError;
};

} // namespace pulse_atom
