#include "tspace/search.hpp"

#include <algorithm>
#include <condition_variable>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "tspace/errors.hpp"

namespace tspace {

PeerDirectory::PeerDirectory(TupleSpace& self, std::vector<std::shared_ptr<TupleSpace>> peers)
    : self_(self), peers_(std::move(peers)) {
  for (const auto& p : peers_) {
    if (!p) throw std::invalid_argument("null peer in directory");
    if (p.get() == &self_) throw std::invalid_argument("directory peers must not contain self");
  }
}

SuccessStats::SuccessStats(std::size_t peers, double alpha)
    : alpha_(alpha), factors_(peers, kInitial) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("alpha must lie in (0, 1)");
}

std::size_t SuccessStats::size() const {
  std::lock_guard lk(mu_);
  return factors_.size();
}

double SuccessStats::factor(std::size_t peer) const {
  std::lock_guard lk(mu_);
  return factors_.at(peer);
}

void SuccessStats::set_factor(std::size_t peer, double value) {
  if (!(value >= 0.0 && value <= 1.0)) throw std::invalid_argument("factor must lie in [0, 1]");
  std::lock_guard lk(mu_);
  factors_.at(peer) = value;
}

void SuccessStats::record(std::size_t peer, bool hit) {
  std::lock_guard lk(mu_);
  double& f = factors_.at(peer);
  f = std::clamp(updated(f, alpha_, hit), 0.0, 1.0);
}

std::vector<std::size_t> SuccessStats::probe_order() const {
  std::lock_guard lk(mu_);
  std::vector<std::size_t> order(factors_.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return factors_[a] > factors_[b]; });
  return order;
}

void SuccessStats::reset() {
  std::lock_guard lk(mu_);
  std::fill(factors_.begin(), factors_.end(), kInitial);
}

void decay_reset(SuccessStats& stats) { stats.reset(); }

namespace {

using Clock = std::chrono::steady_clock;

std::optional<Tuple> probe(TupleSpace& space, const Template& tmpl, bool destructive) {
  return destructive ? space.inp(tmpl) : space.rdp(tmpl);
}

template <typename OrderFn, typename OnProbe>
SearchOutcome poll_rounds(const PeerDirectory& dir, const Template& tmpl,
                          const SearchOptions& opts, OrderFn order, OnProbe on_probe) {
  const auto start = Clock::now();
  const auto deadline = opts.deadline.deadline_from(start);
  SearchOutcome res{Tuple{0}, 0, 0, {}, 0, std::nullopt};

  auto finish = [&](Tuple t, std::optional<std::size_t> source) {
    res.tuple = std::move(t);
    res.source = source;
    res.elapsed = Clock::now() - start;
    return res;
  };

  for (;;) {
    ++res.rounds;
    const bool first = res.rounds == 1;

    ++res.visited_nodes;
    if (first) ++res.visited_nodes_first_round;
    if (auto t = probe(dir.self(), tmpl, opts.destructive)) return finish(std::move(*t), {});

    for (std::size_t p : order()) {
      ++res.visited_nodes;
      if (first) ++res.visited_nodes_first_round;
      auto t = probe(dir.peer(p), tmpl, opts.destructive);
      on_probe(p, t.has_value());
      if (t) return finish(std::move(*t), p);
    }

    if (deadline && Clock::now() >= *deadline) {
      throw DeadlineExceeded("no tuple matching " + to_string(tmpl) + " before the deadline");
    }
    if (opts.should_stop && opts.should_stop()) throw SearchStopped();
    auto pause = opts.poll_interval;
    if (deadline) {
      pause = std::min(pause, std::chrono::duration_cast<std::chrono::milliseconds>(
                                  *deadline - Clock::now()) + std::chrono::milliseconds(1));
    }
    if (pause.count() > 0) std::this_thread::sleep_for(pause);
  }
}

}  // namespace

SearchOutcome search_sequential(const PeerDirectory& dir, const Template& tmpl,
                                const SearchOptions& opts) {
  std::vector<std::size_t> order(dir.peer_count());
  std::iota(order.begin(), order.end(), 0);
  return poll_rounds(
      dir, tmpl, opts, [&] { return order; }, [](std::size_t, bool) {});
}

SearchOutcome search_success_factor(const PeerDirectory& dir, SuccessStats& stats,
                                    const Template& tmpl, const SearchOptions& opts) {
  if (stats.size() != dir.peer_count()) {
    throw std::invalid_argument("success stats size does not match the directory");
  }
  return poll_rounds(
      dir, tmpl, opts, [&] { return stats.probe_order(); },
      [&](std::size_t p, bool hit) { stats.record(p, hit); });
}

SearchOutcome search_notify(const PeerDirectory& dir, const Template& tmpl,
                            const SearchOptions& opts) {
  if (opts.destructive) {
    throw std::invalid_argument("broadcast search supports non-destructive reads only");
  }
  struct State {
    std::mutex mu;
    std::condition_variable cv;
    std::optional<Tuple> winner;
    std::optional<std::size_t> source;
    std::size_t failed = 0;
    std::string last_error;
  };
  auto state = std::make_shared<State>();
  const auto start = Clock::now();
  const auto deadline = opts.deadline.deadline_from(start);
  const std::size_t legs = 1 + dir.peer_count();

  auto make_cb = [state](std::optional<std::size_t> leg) {
    return [state, leg](WatchResult r) {
      std::lock_guard lk(state->mu);
      if (r.status == WatchResult::Status::Found) {
        if (!state->winner) {
          state->winner = std::move(r.tuple);
          state->source = leg;
        }
      } else if (r.status == WatchResult::Status::Failed) {
        ++state->failed;
        state->last_error = r.error;
      }
      state->cv.notify_all();
    };
  };

  std::vector<std::pair<TupleSpace*, WatchId>> registered;
  registered.reserve(legs);
  registered.emplace_back(&dir.self(), dir.self().watch(tmpl, make_cb(std::nullopt)));
  for (std::size_t p = 0; p < dir.peer_count(); ++p) {
    registered.emplace_back(&dir.peer(p), dir.peer(p).watch(tmpl, make_cb(p)));
  }

  auto cancel_rest = [&] {
    for (auto& [space, id] : registered) space->cancel_watch(id);
  };

  std::unique_lock lk(state->mu);
  auto settled = [&] { return state->winner.has_value() || state->failed >= legs; };
  while (!settled()) {
    auto wake = deadline.value_or(Clock::time_point::max());
    if (opts.should_stop) {
      wake = std::min(wake, Clock::now() + std::max(opts.poll_interval, std::chrono::milliseconds(1)));
    }
    if (wake == Clock::time_point::max()) {
      state->cv.wait(lk, settled);
      break;
    }
    state->cv.wait_until(lk, wake, settled);
    if (settled()) break;
    if (deadline && Clock::now() >= *deadline) {
      lk.unlock();
      cancel_rest();
      throw DeadlineExceeded("no tuple matching " + to_string(tmpl) + " before the deadline");
    }
    if (opts.should_stop && opts.should_stop()) {
      lk.unlock();
      cancel_rest();
      throw SearchStopped();
    }
  }
  if (!state->winner) {
    const std::string why = state->last_error;
    lk.unlock();
    cancel_rest();
    throw ConnectionLost("every search leg failed: " + why);
  }
  SearchOutcome res{*state->winner, legs, legs, Clock::now() - start, 1, state->source};
  lk.unlock();
  cancel_rest();
  return res;
}

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::Sequential: return "sequential";
    case Strategy::SuccessFactor: return "success_factor";
    case Strategy::Notify: return "notify";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
  if (text == "sequential") return Strategy::Sequential;
  if (text == "success_factor") return Strategy::SuccessFactor;
  if (text == "notify") return Strategy::Notify;
  return std::nullopt;
}

Searcher::Searcher(const PeerDirectory& dir, Strategy strategy, double alpha)
    : dir_(dir), strategy_(strategy), stats_(dir.peer_count(), alpha) {}

SearchOutcome Searcher::find(const Template& tmpl, const SearchOptions& opts) {
  switch (strategy_) {
    case Strategy::Sequential: return search_sequential(dir_, tmpl, opts);
    case Strategy::SuccessFactor: return search_success_factor(dir_, stats_, tmpl, opts);
    case Strategy::Notify: break;
  }
  if (!opts.destructive) return search_notify(dir_, tmpl, opts);

  // Destructive acquisition on top of the broadcast read: locate a match,
  // then try to take it from the node that reported it. Another taker may
  // win the race, in which case the broadcast is repeated.
  SearchOptions read_opts = opts;
  read_opts.destructive = false;
  const auto start = Clock::now();
  const auto deadline = opts.deadline.deadline_from(start);
  SearchOutcome total{Tuple{0}, 0, 0, {}, 0, std::nullopt};
  for (;;) {
    read_opts.deadline = remaining(deadline);
    auto found = search_notify(dir_, tmpl, read_opts);
    total.visited_nodes += found.visited_nodes;
    if (total.rounds == 0) total.visited_nodes_first_round = found.visited_nodes_first_round;
    ++total.rounds;
    TupleSpace& holder = found.source ? dir_.peer(*found.source) : dir_.self();
    ++total.visited_nodes;
    if (auto t = holder.inp(tmpl)) {
      total.tuple = std::move(*t);
      total.source = found.source;
      total.elapsed = Clock::now() - start;
      return total;
    }
  }
}

}  // namespace tspace
