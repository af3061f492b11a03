#include "tspace/local_space.hpp"

#include <condition_variable>

#include "tspace/errors.hpp"

namespace tspace {

BucketKey bucket_key_of(const Tuple& tuple) {
  BucketKey key{tuple.arity(), std::nullopt};
  if (tuple[0].tag() == ValueTag::Str) key.head = tuple[0].as_str();
  return key;
}

namespace {

// Locks the given buckets in order (the caller passes them in map order).
template <typename B>
std::vector<std::unique_lock<std::mutex>> lock_all(const std::vector<B*>& buckets) {
  std::vector<std::unique_lock<std::mutex>> locks;
  locks.reserve(buckets.size());
  for (auto* b : buckets) locks.emplace_back(b->mu);
  return locks;
}

}  // namespace

LocalSpace::~LocalSpace() { shutdown(); }

// Caller holds map_mu_ (shared or exclusive). Result is in map order.
std::vector<LocalSpace::Bucket*> LocalSpace::candidates_locked(const Template& tmpl) const {
  std::vector<Bucket*> out;
  const std::size_t arity = tmpl.arity();
  const auto& head = tmpl[0];

  const bool str_literal = head.is_literal() && head.literal().tag() == ValueTag::Str;
  const bool non_str_only =
      (head.is_literal() && head.literal().tag() != ValueTag::Str) ||
      (head.is_typed() && head.wildcard_tag() != ValueTag::Str);

  if (str_literal) {
    // (arity, absent) sorts before every (arity, "...") key.
    if (auto it = buckets_.find(BucketKey{arity, std::nullopt}); it != buckets_.end()) {
      out.push_back(it->second.get());
    }
    if (auto it = buckets_.find(BucketKey{arity, head.literal().as_str()});
        it != buckets_.end()) {
      out.push_back(it->second.get());
    }
    return out;
  }
  if (non_str_only) {
    if (auto it = buckets_.find(BucketKey{arity, std::nullopt}); it != buckets_.end()) {
      out.push_back(it->second.get());
    }
    return out;
  }
  for (auto it = buckets_.lower_bound(BucketKey{arity, std::nullopt});
       it != buckets_.end() && it->first.arity == arity; ++it) {
    out.push_back(it->second.get());
  }
  return out;
}

LocalSpace::Bucket& LocalSpace::bucket_for(const BucketKey& key) {
  {
    std::shared_lock lk(map_mu_);
    if (auto it = buckets_.find(key); it != buckets_.end()) return *it->second;
  }
  std::unique_lock lk(map_mu_);
  auto [it, inserted] = buckets_.try_emplace(key, nullptr);
  if (inserted) it->second = std::make_unique<Bucket>();
  return *it->second;
}

// Caller holds the locks of every bucket in `buckets`.
std::optional<Tuple> LocalSpace::probe_locked(const std::vector<Bucket*>& buckets,
                                              const Template& tmpl, bool destructive) {
  Bucket* best_bucket = nullptr;
  std::deque<Stored>::iterator best;
  for (auto* b : buckets) {
    for (auto it = b->items.begin(); it != b->items.end(); ++it) {
      if (best_bucket && it->stamp > best->stamp) break;
      if (match(tmpl, it->tuple)) {
        best_bucket = b;
        best = it;
        break;
      }
    }
  }
  if (!best_bucket) return std::nullopt;
  Tuple result = best->tuple;
  if (destructive) best_bucket->items.erase(best);
  return result;
}

void LocalSpace::out(const Tuple& tuple) {
  const BucketKey key = bucket_key_of(tuple);
  bucket_for(key);  // make sure it exists before taking the shared lock

  std::vector<Completion> completions;
  {
    std::shared_lock map_lk(map_mu_);
    Bucket& bucket = *buckets_.find(key)->second;
    std::lock_guard bucket_lk(bucket.mu);
    bool consumed = false;
    {
      std::lock_guard wlk(waiters_mu_);
      auto destructive_it = waiters_.end();
      for (auto it = waiters_.begin(); it != waiters_.end();) {
        if (!match(it->second.tmpl, tuple)) {
          ++it;
          continue;
        }
        if (it->second.destructive) {
          if (destructive_it == waiters_.end()) destructive_it = it;
          ++it;
          continue;
        }
        completions.emplace_back(std::move(it->second.cb), tuple);
        it = waiters_.erase(it);
      }
      if (destructive_it != waiters_.end()) {
        completions.emplace_back(std::move(destructive_it->second.cb), tuple);
        waiters_.erase(destructive_it);
        consumed = true;
      }
    }
    if (!consumed) bucket.items.push_back(Stored{next_stamp_.fetch_add(1), tuple});
  }
  for (auto& [cb, t] : completions) cb(std::move(t));
}

std::optional<Tuple> LocalSpace::rdp(const Template& tmpl) {
  std::shared_lock map_lk(map_mu_);
  auto buckets = candidates_locked(tmpl);
  auto locks = lock_all(buckets);
  return probe_locked(buckets, tmpl, false);
}

std::optional<Tuple> LocalSpace::inp(const Template& tmpl) {
  std::shared_lock map_lk(map_mu_);
  auto buckets = candidates_locked(tmpl);
  auto locks = lock_all(buckets);
  return probe_locked(buckets, tmpl, true);
}

std::size_t LocalSpace::count(const Template& tmpl) {
  std::shared_lock map_lk(map_mu_);
  auto buckets = candidates_locked(tmpl);
  auto locks = lock_all(buckets);
  std::size_t n = 0;
  for (auto* b : buckets) {
    for (const auto& s : b->items) n += match(tmpl, s.tuple) ? 1 : 0;
  }
  return n;
}

LocalSpace::Registration LocalSpace::probe_or_register(const Template& tmpl,
                                                       bool destructive,
                                                       WaiterCallback cb) {
  // The shared map lock keeps new buckets from appearing between the probe
  // and the registration; the bucket locks keep out() away from both.
  std::shared_lock map_lk(map_mu_);
  auto buckets = candidates_locked(tmpl);
  auto locks = lock_all(buckets);
  if (auto hit = probe_locked(buckets, tmpl, destructive)) {
    return Registration{std::move(hit), 0};
  }
  std::lock_guard wlk(waiters_mu_);
  if (shut_down_) throw ShuttingDown();
  const WaiterId id = next_waiter_++;
  waiters_.emplace(id, Waiter{tmpl, destructive, std::move(cb)});
  return Registration{std::nullopt, id};
}

bool LocalSpace::cancel_waiter(WaiterId id) {
  std::lock_guard wlk(waiters_mu_);
  return waiters_.erase(id) > 0;
}

void LocalSpace::shutdown() {
  std::map<WaiterId, Waiter> pending;
  {
    std::lock_guard wlk(waiters_mu_);
    shut_down_ = true;
    pending.swap(waiters_);
  }
  for (auto& [id, w] : pending) w.cb(std::nullopt);
}

bool LocalSpace::is_shut_down() const {
  std::lock_guard wlk(waiters_mu_);
  return shut_down_;
}

Tuple LocalSpace::blocking(const Template& tmpl, Timeout timeout, bool destructive) {
  if (!timeout.is_infinite() && timeout.duration().count() == 0) {
    auto hit = destructive ? inp(tmpl) : rdp(tmpl);
    if (!hit) throw TimeoutError();
    return std::move(*hit);
  }

  struct Slot {
    std::mutex mu;
    std::condition_variable cv;
    bool done = false;
    std::optional<Tuple> result;
  };
  auto slot = std::make_shared<Slot>();
  auto reg = probe_or_register(tmpl, destructive, [slot](std::optional<Tuple> r) {
    std::lock_guard lk(slot->mu);
    slot->result = std::move(r);
    slot->done = true;
    slot->cv.notify_all();
  });
  if (reg.immediate) return std::move(*reg.immediate);

  std::unique_lock lk(slot->mu);
  auto is_done = [&] { return slot->done; };
  if (timeout.is_infinite()) {
    slot->cv.wait(lk, is_done);
  } else if (!slot->cv.wait_for(lk, timeout.duration(), is_done)) {
    lk.unlock();
    if (cancel_waiter(reg.waiter)) throw TimeoutError();
    // Completed concurrently with the timeout; the callback is on its way.
    lk.lock();
    slot->cv.wait(lk, is_done);
  }
  if (!slot->result) throw ShuttingDown();
  return std::move(*slot->result);
}

Tuple LocalSpace::rd(const Template& tmpl, Timeout timeout) {
  return blocking(tmpl, timeout, false);
}

Tuple LocalSpace::in(const Template& tmpl, Timeout timeout) {
  return blocking(tmpl, timeout, true);
}

WatchId LocalSpace::watch(const Template& tmpl, WatchCallback cb) {
  auto shared_cb = std::make_shared<WatchCallback>(std::move(cb));
  Registration reg;
  try {
    reg = probe_or_register(tmpl, false, [shared_cb](std::optional<Tuple> r) {
      WatchResult res;
      if (r) {
        res.status = WatchResult::Status::Found;
        res.tuple = std::move(r);
      } else {
        res.status = WatchResult::Status::Failed;
        res.error = "tuple space is shutting down";
      }
      (*shared_cb)(std::move(res));
    });
  } catch (const ShuttingDown& e) {
    (*shared_cb)(WatchResult{WatchResult::Status::Failed, std::nullopt, e.what()});
    return 0;
  }
  if (reg.immediate) {
    (*shared_cb)(WatchResult{WatchResult::Status::Found, std::move(reg.immediate), {}});
    return 0;
  }
  return reg.waiter;
}

void LocalSpace::cancel_watch(WatchId id) {
  if (id != 0) cancel_waiter(id);
}

std::size_t LocalSpace::size() const {
  std::shared_lock map_lk(map_mu_);
  std::size_t n = 0;
  for (const auto& [k, b] : buckets_) {
    std::lock_guard lk(b->mu);
    n += b->items.size();
  }
  return n;
}

std::size_t LocalSpace::waiter_count() const {
  std::lock_guard wlk(waiters_mu_);
  return waiters_.size();
}

std::size_t LocalSpace::bucket_count() const {
  std::shared_lock map_lk(map_mu_);
  return buckets_.size();
}

}  // namespace tspace
