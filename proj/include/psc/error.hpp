#pragma once

#include <stdexcept>
#include <string>

namespace psc {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A numerical or mathematical precondition failed (CLI exit code 1).
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& msg) : Error(msg) {}
};

/// Malformed configuration or arguments (CLI exit code 2).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

class SpectralError : public DomainError {
 public:
  explicit SpectralError(const std::string& msg) : DomainError(msg) {}
};

class FlowError : public DomainError {
 public:
  explicit FlowError(const std::string& msg) : DomainError(msg) {}
};

}  // namespace psc
