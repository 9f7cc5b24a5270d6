#pragma once

#include <stdexcept>
#include <string>

namespace relamix {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Violated precondition or malformed argument.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Corrupt or inconsistent file on disk. The message names the file.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A loss term evaluated to NaN or infinity.
class NonFiniteLoss : public Error {
 public:
  NonFiniteLoss(std::string term, double value)
      : Error("non-finite loss term " + term + " = " + std::to_string(value)),
        term_(std::move(term)) {}
  const std::string& term() const noexcept { return term_; }

 private:
  std::string term_;
};

}  // namespace relamix
