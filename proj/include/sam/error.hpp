#pragma once

#include <stdexcept>
#include <string>

namespace sam {

// Failure categories. The CLI maps each one to its own exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File missing, unreadable or unwritable.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed input or a violated precondition.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, degenerate geometry, optimizer blow-up.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace sam
