#pragma once

#include <stdexcept>
#include <string>

namespace gridloc {

// Base for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Structurally invalid input (segment fields, config values, counts).
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Argument outside an operation's domain (parity mismatch, unknown node, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; the message carries the line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Distributed simulation did not reach quiescence within its event budget.
class TimeoutError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridloc
