#pragma once

#include <atomic>
#include <compare>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "tspace/space.hpp"

namespace tspace {

/// Index key of a stored tuple: its arity plus the first field when that
/// field is a string.
struct BucketKey {
  std::size_t arity = 0;
  std::optional<std::string> head;

  friend auto operator<=>(const BucketKey&, const BucketKey&) = default;
  friend bool operator==(const BucketKey&, const BucketKey&) = default;
};

BucketKey bucket_key_of(const Tuple& tuple);

/// Thread-safe multiset of tuples.
///
/// Tuples live in FIFO buckets keyed by BucketKey, each bucket with its own
/// lock. Every insert gets a stamp from a global counter; when several stored
/// tuples match, the one with the smallest stamp is selected.
///
/// Blocking requests are kept as waiters. An out first completes every
/// matching non-destructive waiter, then hands the tuple to the oldest
/// matching destructive waiter if there is one; only otherwise is the tuple
/// stored.
class LocalSpace final : public TupleSpace {
 public:
  /// Invoked exactly once with the tuple, or with nullopt on shutdown.
  using WaiterCallback = std::function<void(std::optional<Tuple>)>;
  using WaiterId = std::uint64_t;

  struct Registration {
    std::optional<Tuple> immediate;  // set when a match already existed
    WaiterId waiter = 0;             // valid when immediate is empty
  };

  LocalSpace() = default;
  explicit LocalSpace(std::string name) : name_(std::move(name)) {}
  LocalSpace(const LocalSpace&) = delete;
  LocalSpace& operator=(const LocalSpace&) = delete;
  ~LocalSpace() override;

  void out(const Tuple& tuple) override;
  std::optional<Tuple> rdp(const Template& tmpl) override;
  std::optional<Tuple> inp(const Template& tmpl) override;
  Tuple rd(const Template& tmpl, Timeout timeout) override;
  Tuple in(const Template& tmpl, Timeout timeout) override;
  std::size_t count(const Template& tmpl) override;
  WatchId watch(const Template& tmpl, WatchCallback cb) override;
  void cancel_watch(WatchId id) override;
  std::string describe() const override { return "local:" + name_; }

  /// Probes once; if nothing matches, registers `cb` atomically with respect
  /// to concurrent out. Throws ShuttingDown after shutdown().
  Registration probe_or_register(const Template& tmpl, bool destructive,
                                 WaiterCallback cb);

  /// Removes a pending waiter. Returns false if it was already completed (its
  /// callback has run or is about to run).
  bool cancel_waiter(WaiterId id);

  /// Fails every pending waiter and rejects new blocking requests.
  void shutdown();
  bool is_shut_down() const;

  std::size_t size() const;
  std::size_t waiter_count() const;
  std::size_t bucket_count() const;

 private:
  struct Stored {
    std::uint64_t stamp;
    Tuple tuple;
  };
  struct Bucket {
    std::mutex mu;
    std::deque<Stored> items;
  };
  struct Waiter {
    Template tmpl;
    bool destructive;
    WaiterCallback cb;
  };
  using Completion = std::pair<WaiterCallback, std::optional<Tuple>>;

  std::vector<Bucket*> candidates_locked(const Template& tmpl) const;
  Bucket& bucket_for(const BucketKey& key);
  std::optional<Tuple> probe_locked(const std::vector<Bucket*>& buckets,
                                    const Template& tmpl, bool destructive);
  Tuple blocking(const Template& tmpl, Timeout timeout, bool destructive);

  std::string name_ = "space";

  mutable std::shared_mutex map_mu_;
  std::map<BucketKey, std::unique_ptr<Bucket>> buckets_;
  std::atomic<std::uint64_t> next_stamp_{1};

  mutable std::mutex waiters_mu_;
  std::map<WaiterId, Waiter> waiters_;  // ascending registration order
  WaiterId next_waiter_ = 1;
  bool shut_down_ = false;
};

}  // namespace tspace
