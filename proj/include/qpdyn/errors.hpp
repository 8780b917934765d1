#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace qpdyn {

// Failure categories. Each maps to one CLI exit code.
enum class ErrorKind {
    usage = 2,
    io = 3,
    parse = 4,
    invalid_parameter = 5,
    numerical = 6,
    data = 7,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }
    int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& w) : Error(ErrorKind::usage, w) {}
};

struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};

// Malformed input text. line is 1-based, 0 when not tied to a line.
struct ParseError : Error {
    ParseError(const std::string& w, std::size_t line_no = 0)
        : Error(ErrorKind::parse, line_no ? "line " + std::to_string(line_no) + ": " + w : w),
          line(line_no) {}
    std::size_t line;
};

struct InvalidParameterError : Error {
    explicit InvalidParameterError(const std::string& w) : Error(ErrorKind::invalid_parameter, w) {}
};

struct DomainError : InvalidParameterError {
    using InvalidParameterError::InvalidParameterError;
};

struct DegenerateSystemError : InvalidParameterError {
    using InvalidParameterError::InvalidParameterError;
};

// Fitted shape parameters that imply a negative trapping or generation rate.
struct NegativeRateError : InvalidParameterError {
    NegativeRateError(const std::string& which, double v)
        : InvalidParameterError("negative " + which + " implied by inputs: " + std::to_string(v)),
          name(which), value(v) {}
    std::string name;
    double value;
};

struct InvalidGeometryError : InvalidParameterError {
    explicit InvalidGeometryError(std::vector<std::string> problems);
    std::vector<std::string> problems;
};

struct NumericalError : Error {
    explicit NumericalError(const std::string& w) : Error(ErrorKind::numerical, w) {}
};

struct StepUnderflowError : NumericalError {
    using NumericalError::NumericalError;
};

struct NoRootFoundError : NumericalError {
    using NumericalError::NumericalError;
};

struct InsufficientDataError : Error {
    explicit InsufficientDataError(const std::string& w) : Error(ErrorKind::data, w) {}
};

struct DegenerateTraceError : InsufficientDataError {
    using InsufficientDataError::InsufficientDataError;
};

struct InsufficientSpreadError : InsufficientDataError {
    using InsufficientDataError::InsufficientDataError;
};

}  // namespace qpdyn
