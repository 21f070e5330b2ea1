#ifndef CSPROXY_ERRORS_HPP
#define CSPROXY_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace csproxy {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument: dimension mismatch, out-of-range parameter, etc.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed container contents (bad magic, bad header, bad row shape).
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Underlying I/O failure: missing file, truncated stream, failed write.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Two inputs that must agree do not (e.g. image/label counts, labels in fuse).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace csproxy

#endif
