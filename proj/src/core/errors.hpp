#pragma once

#include <stdexcept>
#include <string>

namespace cloudtrust {

// Input outside the mathematical domain of an operation (negative rate, NaN, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Malformed or inconsistent configuration: missing table entries, bad shapes.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Floating point trouble: non-finite state, failed factorization.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, long step = -1)
      : std::runtime_error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

// Scenario file that fails to parse or violates the schema.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::string field, int line)
      : std::runtime_error(what), field_(std::move(field)), line_(line) {}
  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  std::string field_;
  int line_;
};

// Broken internal contract (e.g. selecting from an empty candidate list).
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace cloudtrust
