#pragma once

#include <stdexcept>
#include <string>

namespace delaudit {

/// Base class for all delaudit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration (flags, config file, endpoint setup). CLI exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Network or endpoint failure. CLI exit code 3.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Retryable transport failure (timeouts, 429/5xx, connection resets).
class TransientError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// The endpoint cannot provide something the caller required,
/// e.g. log-probabilities. Not retryable; the caller decides fallback.
class CapabilityError : public TransportError {
 public:
  using TransportError::TransportError;
};

/// Malformed or inconsistent data (datasets, record files, fixtures).
/// CLI exit code 4.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition was violated by the caller. CLI exit code 4.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace delaudit
