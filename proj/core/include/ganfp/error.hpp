#pragma once

#include <stdexcept>
#include <string>

namespace ganfp {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A network or architecture description is invalid.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity showed up where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an API precondition (e.g. backward on a non-scalar loss).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Dataset is missing a class or has too few rows for the request.
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

/// Out-of-range numeric parameter (k too large, ratio <= 0, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Input file has the wrong layout (columns, header, magic).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A single value could not be parsed. Carries the 1-based line number.
class ParseError : public FormatError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : FormatError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Undefined metric such as PR-AUC with no positive labels.
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace ganfp
