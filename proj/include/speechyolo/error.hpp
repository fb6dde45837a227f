#pragma once

#include <stdexcept>
#include <string>

namespace speechyolo {

// Precondition violations on caller-supplied data (empty waveforms, bad
// shapes, out-of-range indices).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed or unreadable files. Carries the 1-based line number when the
// failure is tied to a line of a text file (0 otherwise).
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace speechyolo
