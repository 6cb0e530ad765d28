#pragma once

#include <stdexcept>
#include <string>

namespace currmask {

// Root of every error thrown by the library. The CLI maps subclasses onto exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A caller-supplied parameter violates an operation's precondition.
class ParameterError : public Error {
public:
    using Error::Error;
};

// A requested length exceeds what the input provides (e.g. window longer than trajectory).
class LengthError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

// Non-finite or out-of-range input values (rejected by env_step and friends).
class InputError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

// Tensor or dimension mismatch between two inputs.
class ShapeError : public ParameterError {
public:
    using ParameterError::ParameterError;
};

// A caller broke an internal contract (e.g. an unscaled reward passed to the weight update).
class ContractError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

// Problems reading or locating datasets and checkpoints.
class DataError : public Error {
public:
    using Error::Error;
};

class CorruptHeaderError : public DataError {
public:
    using DataError::DataError;
};

class PayloadLengthError : public DataError {
public:
    using DataError::DataError;
};

class VersionError : public DataError {
public:
    using DataError::DataError;
};

// Training produced a non-finite loss or parameter.
class NumericError : public Error {
public:
    using Error::Error;
};

}  // namespace currmask
