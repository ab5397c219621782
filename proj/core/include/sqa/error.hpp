#pragma once

#include <stdexcept>
#include <string>

namespace sqa {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor shapes do not satisfy an operation's requirements.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An index (token id, span position, target class) is out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an API precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// A sequence exceeds a configured maximum length.
class LengthError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration file or value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input data (datasets, labels, alignments).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage is missing or has a stale prerequisite.
class DependencyError : public Error {
 public:
  using Error::Error;
};

/// A persisted file does not match the expected binary format.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace sqa
