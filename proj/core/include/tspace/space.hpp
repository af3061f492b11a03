#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

#include "tspace/timeout.hpp"
#include "tspace/tuple.hpp"

namespace tspace {

/// Outcome delivered to an asynchronous watch.
struct WatchResult {
  enum class Status { Found, Cancelled, Failed };
  Status status = Status::Failed;
  std::optional<Tuple> tuple;
  std::string error;
};

using WatchCallback = std::function<void(WatchResult)>;
using WatchId = std::uint64_t;

/// The operation set shared by local and remote spaces.
///
/// rd/in throw TimeoutError when a finite timeout elapses. Probes never block
/// on waiters.
class TupleSpace {
 public:
  virtual ~TupleSpace() = default;

  virtual void out(const Tuple& tuple) = 0;
  virtual std::optional<Tuple> rdp(const Template& tmpl) = 0;
  virtual std::optional<Tuple> inp(const Template& tmpl) = 0;
  virtual Tuple rd(const Template& tmpl, Timeout timeout) = 0;
  virtual Tuple in(const Template& tmpl, Timeout timeout) = 0;
  virtual std::size_t count(const Template& tmpl) = 0;

  /// Non-destructive asynchronous read. `cb` runs exactly once unless
  /// cancel_watch() succeeds first; it may run on another thread or inline.
  virtual WatchId watch(const Template& tmpl, WatchCallback cb) = 0;
  /// Best-effort cancellation of a pending watch.
  virtual void cancel_watch(WatchId id) = 0;

  virtual std::string describe() const = 0;
};

}  // namespace tspace
