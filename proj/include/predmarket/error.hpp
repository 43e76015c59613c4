#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace predmarket {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (bad family parameters, malformed
/// descriptors, inconsistent dimensions).
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Input data problems: unreadable files, malformed rows, missing values.
class DataError : public Error {
 public:
  using Error::Error;
};

class MalformedRow : public DataError {
 public:
  MalformedRow(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NonNumericFeature : public DataError {
 public:
  NonNumericFeature(std::size_t line, std::size_t column, const std::string& cell)
      : DataError("line " + std::to_string(line) + ", column " + std::to_string(column) +
                  ": non-numeric feature '" + cell + "'"),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class MissingValue : public DataError {
 public:
  MissingValue(std::size_t line, std::size_t column)
      : DataError("line " + std::to_string(line) + ", column " + std::to_string(column) +
                  ": missing value"),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Numerical failures of the price solvers and update rules.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// No participant bets on the instance: the market rejects it.
class Rejected : public NumericalError {
 public:
  Rejected() : NumericalError("market rejected the instance: total bet is zero") {}
  explicit Rejected(const std::string& what) : NumericalError(what) {}
};

/// The existence condition for an equilibrium price does not hold.
class NoRoot : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// An iterative solver hit its iteration cap without reaching tolerance.
class NonConvergence : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// Process exit codes used by the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitSpecError = 2,
  kExitDataError = 3,
  kExitNumericalFailure = 4,
};

}  // namespace predmarket
