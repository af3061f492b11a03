#pragma once

#include <chrono>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string_view>
#include <vector>

#include "tspace/space.hpp"

namespace tspace {

/// The local space plus the other nodes' spaces, in a fixed probe order.
class PeerDirectory {
 public:
  PeerDirectory(TupleSpace& self, std::vector<std::shared_ptr<TupleSpace>> peers);

  TupleSpace& self() const { return self_; }
  std::size_t peer_count() const { return peers_.size(); }
  TupleSpace& peer(std::size_t i) const { return *peers_.at(i); }

 private:
  TupleSpace& self_;
  std::vector<std::shared_ptr<TupleSpace>> peers_;
};

/// Per-peer success factors in [0, 1].
///
/// A hit moves the factor toward 1 and a miss toward 0 by a fraction alpha of
/// the remaining distance. Updates are serialised, so one instance may be
/// shared by concurrent searches of the same worker.
class SuccessStats {
 public:
  static constexpr double kDefaultAlpha = 0.25;
  static constexpr double kInitial = 0.5;

  explicit SuccessStats(std::size_t peers, double alpha = kDefaultAlpha);

  double alpha() const { return alpha_; }
  std::size_t size() const;
  double factor(std::size_t peer) const;
  void set_factor(std::size_t peer, double value);

  void record(std::size_t peer, bool hit);
  /// Peer indices by descending factor, ties by ascending index.
  std::vector<std::size_t> probe_order() const;
  /// Every factor back to 0.5.
  void reset();

  static double updated(double factor, double alpha, bool hit) {
    return hit ? factor + alpha * (1.0 - factor) : (1.0 - alpha) * factor;
  }

 private:
  double alpha_;
  mutable std::mutex mu_;
  std::vector<double> factors_;
};

struct SearchOptions {
  bool destructive = false;
  std::chrono::milliseconds poll_interval{1};
  Timeout deadline = Timeout::infinite();
  /// Checked between rounds; when it returns true the search throws
  /// SearchStopped.
  std::function<bool()> should_stop;
};

struct SearchOutcome {
  Tuple tuple;
  /// Every probe issued, re-probes across rounds included.
  std::size_t visited_nodes = 0;
  /// Probes issued during the first round only.
  std::size_t visited_nodes_first_round = 0;
  std::chrono::nanoseconds elapsed{0};
  std::size_t rounds = 0;
  /// Index of the peer that supplied the tuple; empty for the local space.
  std::optional<std::size_t> source;
};

/// Polls local then peers in directory order, sleeping between rounds.
SearchOutcome search_sequential(const PeerDirectory& dir, const Template& tmpl,
                                const SearchOptions& opts = {});

/// Polls local, then peers by descending success factor; every probe updates
/// the probed peer's factor.
SearchOutcome search_success_factor(const PeerDirectory& dir, SuccessStats& stats,
                                    const Template& tmpl, const SearchOptions& opts = {});

/// Registers a non-destructive watch at the local space and every peer at
/// once; the first reply wins and the other legs are cancelled.
/// `opts.destructive` must be false.
SearchOutcome search_notify(const PeerDirectory& dir, const Template& tmpl,
                            const SearchOptions& opts = {});

/// Resets factors between benchmark repetitions.
void decay_reset(SuccessStats& stats);

enum class Strategy { Sequential, SuccessFactor, Notify };

std::string_view strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view text);

/// Bundles a directory with a strategy and, for success_factor, its stats.
class Searcher {
 public:
  Searcher(const PeerDirectory& dir, Strategy strategy,
           double alpha = SuccessStats::kDefaultAlpha);

  SearchOutcome find(const Template& tmpl, const SearchOptions& opts = {});

  Strategy strategy() const { return strategy_; }
  SuccessStats& stats() { return stats_; }
  const PeerDirectory& directory() const { return dir_; }

 private:
  const PeerDirectory& dir_;
  Strategy strategy_;
  SuccessStats stats_;
};

}  // namespace tspace
