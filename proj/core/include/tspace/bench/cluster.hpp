#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "tspace/bench/config.hpp"

namespace tspace::bench {

/// Where and under which key one repetition runs.
struct RepOptions {
  int rep = 0;
  std::string run_key = "local";
  std::filesystem::path out_dir;  // empty: profiles are discarded
  /// First port; role i listens on base_port + i. 0 picks ephemeral ports.
  std::uint16_t base_port = 0;
};

/// Runs one repetition with the master and every worker on threads of this
/// process, each role with its own space and server on loopback.
///
/// `cfg.seed` is used as given; callers derive per-repetition seeds. A role
/// failure or a missed deadline stops every role and comes back as an
/// incorrect result whose `fault` says why.
CaseResult run_threads(const BenchConfig& cfg, const RepOptions& opts = {});

CaseResult run_password(const BenchConfig& cfg, const RepOptions& opts = {});
CaseResult run_sort(const BenchConfig& cfg, const RepOptions& opts = {});
CaseResult run_ocean(const BenchConfig& cfg, const RepOptions& opts = {});
CaseResult run_matmul(const BenchConfig& cfg, Distribution distribution,
                      const RepOptions& opts = {});

}  // namespace tspace::bench
