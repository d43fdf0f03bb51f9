#pragma once

#include <stdexcept>
#include <string>

namespace eviscreen {

/// Base class for all library errors. Subclasses distinguish the failure
/// domain so callers (and the C API) can map them to status codes.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem-level failure: missing file, unreadable path, short write.
class IoError : public Error {
public:
  using Error::Error;
};

/// A file parsed but violated its format contract (bad magic, truncated
/// payload, version mismatch, non-finite values).
class FormatError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration value (bad ratio, even window, unknown key).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Structurally invalid input to an operation (mixed dims, empty set).
class InputError : public Error {
public:
  using Error::Error;
};

/// Invalid retrieval request (k too large, dimension mismatch).
class QueryError : public Error {
public:
  using Error::Error;
};

/// Non-finite value produced where the math guarantees finiteness.
class NumericError : public Error {
public:
  using Error::Error;
};

/// Metric preconditions violated (single-class score set).
class MetricError : public Error {
public:
  using Error::Error;
};

/// Training preconditions violated (single-class dataset).
class TrainError : public Error {
public:
  using Error::Error;
};

}  // namespace eviscreen
