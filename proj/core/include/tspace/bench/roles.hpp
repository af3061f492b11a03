#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "tspace/bench/config.hpp"
#include "tspace/local_space.hpp"
#include "tspace/net.hpp"

namespace tspace::bench {

/// Handshake tuples shared by every workload.
namespace handshake {
inline constexpr const char* kDoneStatus = "complete";
inline constexpr const char* kPendingStatus = "not_processed";

Tuple ready();
Tuple loaded();
Tuple key(const std::string& run_key);
Template key_template();
}  // namespace handshake

/// What one role (master or worker) needs for one repetition.
struct RoleEnv {
  BenchConfig cfg;  // seed is already the repetition seed
  int role = 0;     // 0 is the master, k + 1 is worker k
  std::vector<NodeAddress> nodes;  // indexed by role
  LocalSpace* space = nullptr;     // this role's own space, served at nodes[role]
  std::string run_key;
  int rep = 0;
  std::filesystem::path out_dir;  // empty: profiles are not written
  std::chrono::steady_clock::time_point deadline;
  /// Set when the role runs in a process of its own (fault injection exits
  /// instead of throwing).
  bool own_process = false;
  /// Polled by waiting loops; true makes the role give up.
  std::function<bool()> aborted;
};

std::string role_name(int role);
std::filesystem::path dump_path(const std::filesystem::path& dir, const std::string& run_key,
                                int rep, int role);

/// Consumes `workers` READY tuples and then `workers` LOADED tuples from
/// `master_space`. Throws DeadlineExceeded when they do not all arrive.
void barrier_ready(TupleSpace& master_space, int workers, Timeout timeout);

/// Drives one repetition from the master side and checks the output against
/// the case oracle.
CaseResult run_master(const RoleEnv& env);
void run_worker(const RoleEnv& env);

/// Environment variable naming a worker id that fails right after READY.
inline constexpr const char* kFaultEnv = "TSBENCH_FAULT_WORKER";

}  // namespace tspace::bench
