#pragma once

#include <stdexcept>
#include <string>

namespace lerp {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Raised when a caller breaks a documented precondition (shape mismatch,
// out-of-range id, negative clamp input, ...).
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class QueryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lerp
