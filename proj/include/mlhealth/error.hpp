#pragma once

#include <stdexcept>
#include <string>

namespace mlhealth {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied input that violates an operation's precondition.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// A referenced entity (model, profile, pipeline, column) does not exist.
class NotFound : public Error {
 public:
  using Error::Error;
};

/// Persistent storage could not be read or written.
class StoreError : public Error {
 public:
  using Error::Error;
};

}  // namespace mlhealth
