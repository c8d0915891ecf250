#pragma once

#include <functional>
#include <stdexcept>
#include <string>

namespace optomech {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input violated a documented contract (non-Hermitian density, trace drift, ...).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

/// Malformed scenario configuration; `field` names the offending entry.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Base for failures of a numerical procedure on otherwise valid input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IntegrationFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& message, double residual)
      : NumericalError(message), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class BoundaryLeak : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class TruncationInadequate : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

using WarningHandler = std::function<void(const std::string&)>;

/// Installs a sink for non-fatal diagnostics; returns the previous one.
/// The default sink writes to stderr.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

}  // namespace optomech
