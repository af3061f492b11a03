#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tspace {

/// Base of every error raised by the tuple-space library.
class TupleSpaceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A blocking rd/in saw no matching tuple before its timeout.
class TimeoutError : public TupleSpaceError {
 public:
  TimeoutError() : TupleSpaceError("timed out waiting for a matching tuple") {}
  using TupleSpaceError::TupleSpaceError;
};

/// The space was shut down while the request was pending.
class ShuttingDown : public TupleSpaceError {
 public:
  ShuttingDown() : TupleSpaceError("tuple space is shutting down") {}
  using TupleSpaceError::TupleSpaceError;
};

/// Undecodable bytes: truncation, unknown tags, bad UTF-8, oversize lengths.
class MalformedError : public TupleSpaceError {
 public:
  using TupleSpaceError::TupleSpaceError;
};

class ConnectionLost : public TupleSpaceError {
 public:
  using TupleSpaceError::TupleSpaceError;
};

class Unreachable : public TupleSpaceError {
 public:
  using TupleSpaceError::TupleSpaceError;
};

class VersionMismatch : public TupleSpaceError {
 public:
  using TupleSpaceError::TupleSpaceError;
};

class AddressInUse : public TupleSpaceError {
 public:
  using TupleSpaceError::TupleSpaceError;
};

/// REPLY_ERR received for a code without a more specific mapping.
class RemoteError : public TupleSpaceError {
 public:
  RemoteError(std::uint16_t code, const std::string& msg)
      : TupleSpaceError("remote error " + std::to_string(code) + ": " + msg),
        code_(code) {}
  std::uint16_t code() const { return code_; }

 private:
  std::uint16_t code_;
};

/// A search or benchmark step ran past its deadline.
class DeadlineExceeded : public TupleSpaceError {
 public:
  using TupleSpaceError::TupleSpaceError;
};

/// A search was abandoned because its stop predicate fired.
class SearchStopped : public TupleSpaceError {
 public:
  SearchStopped() : TupleSpaceError("search stopped") {}
  explicit SearchStopped(const std::string& why) : TupleSpaceError(why) {}
};

}  // namespace tspace
