#pragma once

#include <stdexcept>
#include <string>

namespace exposcope {

// Bad input, bad flags, or an unsatisfied precondition on configuration.
// The CLI maps these to exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A well-formed request that cannot be satisfied by the data (exit status 1).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// On-disk state does not match its recorded checksum or layout.
class IntegrityError : public DomainError {
 public:
  using DomainError::DomainError;
};

// I/O failure while reading inputs or writing outputs.
class IoError : public DomainError {
 public:
  using DomainError::DomainError;
};

}  // namespace exposcope
