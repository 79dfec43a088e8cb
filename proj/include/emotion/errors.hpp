#pragma once

#include <stdexcept>
#include <string>

namespace emotion {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes that do not fit the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Model specification does not shape-chain.
class BuildError : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. backward without a matching recorded tape.
class UsageError : public Error {
 public:
  using Error::Error;
};

class DecodeError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures and malformed manifests.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace emotion
