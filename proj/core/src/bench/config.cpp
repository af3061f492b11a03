#include "tspace/bench/config.hpp"

#include <stdexcept>

namespace tspace::bench {

std::string_view case_name(CaseKind k) {
  switch (k) {
    case CaseKind::Password: return "password";
    case CaseKind::Sort: return "sort";
    case CaseKind::Ocean: return "ocean";
    case CaseKind::Matmul: return "matmul";
  }
  return "?";
}

std::optional<CaseKind> parse_case(std::string_view text) {
  for (auto k : {CaseKind::Password, CaseKind::Sort, CaseKind::Ocean, CaseKind::Matmul}) {
    if (case_name(k) == text) return k;
  }
  return std::nullopt;
}

std::string_view distribution_name(Distribution d) {
  return d == Distribution::BOnOne ? "b_on_one" : "uniform";
}

std::optional<Distribution> parse_distribution(std::string_view text) {
  if (text == "uniform") return Distribution::Uniform;
  if (text == "b_on_one") return Distribution::BOnOne;
  return std::nullopt;
}

void validate(const BenchConfig& cfg) {
  auto fail = [](const std::string& why) { throw std::invalid_argument(why); };
  if (cfg.workers < 1) fail("--workers must be at least 1");
  if (cfg.size < 1) fail("--size must be at least 1");
  if (cfg.reps < 1) fail("--reps must be at least 1");
  if (cfg.poll_interval.count() < 0) fail("--poll-interval-ms must not be negative");
  if (cfg.deadline.count() < 1) fail("--deadline-s must be at least 1");
  switch (cfg.kind) {
    case CaseKind::Password:
      if (cfg.password_tasks < 1) fail("password search needs at least one task");
      break;
    case CaseKind::Sort:
      if (cfg.sort_threshold < 1) fail("--threshold must be at least 1");
      break;
    case CaseKind::Ocean:
      if (cfg.workers < 2) fail("ocean needs at least 2 workers");
      if (cfg.size < 3) fail("ocean grid side must be at least 3");
      if (cfg.workers > cfg.size) fail("ocean needs at most one worker per grid column");
      if (cfg.size > 2048) fail("ocean grid side is capped at 2048");
      if (cfg.ocean_iters < 1) fail("--iters must be at least 1");
      break;
    case CaseKind::Matmul:
      if (cfg.workers > cfg.size) fail("matmul needs order >= workers");
      if (cfg.size > 2048) fail("matmul order is capped at 2048");
      break;
  }
}

}  // namespace tspace::bench
