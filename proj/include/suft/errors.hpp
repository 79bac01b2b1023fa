#pragma once

#include <stdexcept>
#include <string>

namespace suft {

/// Base class for all errors thrown by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor/image dimensions do not satisfy an operation's contract.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A configuration value is missing, unknown, or inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A scalar argument is outside its valid range.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Base class for file-related failures.
class IoError : public Error {
public:
    using Error::Error;
};

class FileNotFound : public IoError {
public:
    using IoError::IoError;
};

class MalformedFile : public IoError {
public:
    using IoError::IoError;
};

/// Depth and guidance dimensions disagree after accounting for scale.
class DimensionMismatch : public IoError {
public:
    using IoError::IoError;
};

class ChecksumMismatch : public IoError {
public:
    using IoError::IoError;
};

class VersionMismatch : public IoError {
public:
    using IoError::IoError;
};

}  // namespace suft
