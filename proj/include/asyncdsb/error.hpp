#pragma once

#include <stdexcept>
#include <string>

namespace asyncdsb {

// Error families map one-to-one onto the C API status codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad shapes, out-of-range arguments, violated preconditions.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Inconsistent or incomplete configuration (e.g. oracle without ground truth).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Division by a vanishing variance at t = 0.
class SingularityError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace asyncdsb
