#pragma once

#include <stdexcept>
#include <string>

namespace orca {

// Exit codes used by the command-line front end.
enum class ExitCode : int {
    Success = 0,
    ConfigError = 2,
    DataError = 3,
    NumericalFailure = 4,
};

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual ExitCode exit_code() const noexcept = 0;
};

class ConfigError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::ConfigError; }
};

class DataError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::DataError; }
};

/// Fewer usable rows than the pipeline needs.
class InsufficientHistory : public DataError {
public:
    using DataError::DataError;
};

/// A trailing window was requested before enough rows exist; callers skip the date.
class WindowUnavailable : public DataError {
public:
    using DataError::DataError;
};

class NumericalError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::NumericalFailure; }
};

/// A metric that is not defined on the given input (single-class labels, zero volatility).
class UndefinedMetric : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// A walk-forward fold whose training labels can see into its test range.
class LeakageError : public Error {
public:
    using Error::Error;
    ExitCode exit_code() const noexcept override { return ExitCode::DataError; }
};

}  // namespace orca
