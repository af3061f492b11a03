#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>

namespace tspace {

/// Millisecond timeout for blocking operations; infinite is distinct from
/// any finite value.
class Timeout {
 public:
  static constexpr std::uint64_t kInfiniteWire = std::numeric_limits<std::uint64_t>::max();

  static Timeout infinite() { return Timeout(); }
  static Timeout after(std::chrono::milliseconds ms) {
    return Timeout(ms.count() < 0 ? std::chrono::milliseconds(0) : ms);
  }
  static Timeout immediate() { return Timeout(std::chrono::milliseconds(0)); }
  static Timeout from_wire(std::uint64_t raw) {
    if (raw == kInfiniteWire) return infinite();
    return after(std::chrono::milliseconds(
        static_cast<std::int64_t>(std::min<std::uint64_t>(raw, kInfiniteWire >> 2))));
  }

  bool is_infinite() const { return !ms_.has_value(); }
  std::chrono::milliseconds duration() const { return *ms_; }
  std::uint64_t to_wire() const {
    return ms_ ? static_cast<std::uint64_t>(ms_->count()) : kInfiniteWire;
  }

  /// Absolute deadline from `now`, or nullopt when infinite.
  std::optional<std::chrono::steady_clock::time_point> deadline_from(
      std::chrono::steady_clock::time_point now = std::chrono::steady_clock::now()) const {
    if (!ms_) return std::nullopt;
    return now + *ms_;
  }

  friend bool operator==(const Timeout&, const Timeout&) = default;

 private:
  Timeout() = default;
  explicit Timeout(std::chrono::milliseconds ms) : ms_(ms) {}
  std::optional<std::chrono::milliseconds> ms_;
};

/// Remaining time until an absolute deadline, as a Timeout.
inline Timeout remaining(std::optional<std::chrono::steady_clock::time_point> deadline) {
  if (!deadline) return Timeout::infinite();
  const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
      *deadline - std::chrono::steady_clock::now());
  return Timeout::after(left);
}

}  // namespace tspace
