#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tspace/search.hpp"

namespace tspace::bench {

enum class CaseKind { Password, Sort, Ocean, Matmul };
enum class Distribution { Uniform, BOnOne };

std::string_view case_name(CaseKind k);
std::optional<CaseKind> parse_case(std::string_view text);
std::string_view distribution_name(Distribution d);
std::optional<Distribution> parse_distribution(std::string_view text);

/// Workload parameters of one benchmark run.
struct BenchConfig {
  CaseKind kind = CaseKind::Password;
  int workers = 1;
  /// password: DB entries; sort: elements; ocean: grid side; matmul: order.
  std::int64_t size = 10000;
  Strategy strategy = Strategy::Sequential;
  Distribution distribution = Distribution::Uniform;  // matmul only
  int reps = 10;
  std::uint64_t seed = 1;
  std::int64_t sort_threshold = 10000;
  int ocean_iters = 20;
  int password_tasks = 100;
  std::chrono::milliseconds poll_interval{1};
  std::chrono::seconds deadline{300};
};

/// Throws std::invalid_argument when a case precondition does not hold.
void validate(const BenchConfig& cfg);

/// Outcome of one repetition; `correct` always comes from the case oracle.
struct CaseResult {
  /// Why a repetition did not produce a checked result.
  enum class Fault { None, Deadline, Infrastructure };

  bool correct = false;
  Fault fault = Fault::None;
  std::string digest;  // MD5 over the case output
  std::string detail;
  std::int64_t searches = 0;
  std::int64_t visited_first_round = 0;  // summed over all searches
  std::int64_t visited_total = 0;
  std::chrono::nanoseconds total_runtime{0};
  std::vector<std::filesystem::path> dumps;

  double mean_visited_first_round() const {
    return searches == 0 ? 0.0 : static_cast<double>(visited_first_round) / searches;
  }
};

/// Seed of repetition `rep`: seed + rep.
inline std::uint64_t rep_seed(std::uint64_t seed, int rep) {
  return seed + static_cast<std::uint64_t>(rep);
}

}  // namespace tspace::bench
