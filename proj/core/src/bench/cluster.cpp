#include "tspace/bench/cluster.hpp"

#include <atomic>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tspace/bench/roles.hpp"
#include "tspace/errors.hpp"
#include "tspace/net.hpp"

namespace tspace::bench {

CaseResult run_threads(const BenchConfig& cfg, const RepOptions& opts) {
  validate(cfg);
  const int roles = cfg.workers + 1;

  std::vector<std::unique_ptr<LocalSpace>> spaces;
  std::vector<std::unique_ptr<Server>> servers;
  std::vector<NodeAddress> nodes;
  for (int i = 0; i < roles; ++i) {
    spaces.push_back(std::make_unique<LocalSpace>(role_name(i)));
    NodeAddress addr{"127.0.0.1",
                     static_cast<std::uint16_t>(opts.base_port == 0 ? 0 : opts.base_port + i),
                     role_name(i)};
    servers.push_back(Server::start(*spaces.back(), addr));
    nodes.push_back(servers.back()->address());
  }

  std::atomic<bool> aborted{false};
  std::mutex mu;
  std::exception_ptr first_failure;  // guarded by mu
  std::string failures;              // guarded by mu

  auto abort_all = [&] {
    if (aborted.exchange(true)) return;
    for (auto& s : spaces) s->shutdown();
    for (auto& s : servers) s->stop();
  };

  const auto deadline = std::chrono::steady_clock::now() + cfg.deadline;
  std::vector<RoleEnv> envs(static_cast<std::size_t>(roles));
  for (int i = 0; i < roles; ++i) {
    RoleEnv& env = envs[static_cast<std::size_t>(i)];
    env.cfg = cfg;
    env.role = i;
    env.nodes = nodes;
    env.space = spaces[static_cast<std::size_t>(i)].get();
    env.run_key = opts.run_key;
    env.rep = opts.rep;
    env.out_dir = opts.out_dir;
    env.deadline = deadline;
    env.aborted = [&aborted] { return aborted.load(); };
  }

  CaseResult result;
  std::vector<std::thread> threads;
  for (int i = 0; i < roles; ++i) {
    threads.emplace_back([&, i] {
      try {
        if (i == 0) {
          result = run_master(envs[0]);
        } else {
          run_worker(envs[static_cast<std::size_t>(i)]);
        }
      } catch (const std::exception& e) {
        {
          std::lock_guard lk(mu);
          // Roles that fail because of the abort only echo the root cause.
          if (!aborted.load()) {
            if (!first_failure) first_failure = std::current_exception();
            failures += role_name(i) + ": " + e.what() + "\n";
          }
        }
        abort_all();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& s : servers) s->stop();

  if (first_failure) {
    CaseResult failed;
    failed.correct = false;
    failed.detail = failures;
    try {
      std::rethrow_exception(first_failure);
    } catch (const DeadlineExceeded&) {
      failed.fault = CaseResult::Fault::Deadline;
    } catch (...) {
      failed.fault = CaseResult::Fault::Infrastructure;
    }
    return failed;
  }
  if (!opts.out_dir.empty()) {
    result.dumps.clear();
    for (int i = 0; i < roles; ++i) {
      result.dumps.push_back(dump_path(opts.out_dir, opts.run_key, opts.rep, i));
    }
  }
  return result;
}

namespace {

CaseResult run_kind(const BenchConfig& cfg, CaseKind kind, const RepOptions& opts) {
  if (cfg.kind != kind) {
    throw std::invalid_argument("configuration is for the " + std::string(case_name(cfg.kind)) +
                                " case");
  }
  return run_threads(cfg, opts);
}

}  // namespace

CaseResult run_password(const BenchConfig& cfg, const RepOptions& opts) {
  return run_kind(cfg, CaseKind::Password, opts);
}

CaseResult run_sort(const BenchConfig& cfg, const RepOptions& opts) {
  return run_kind(cfg, CaseKind::Sort, opts);
}

CaseResult run_ocean(const BenchConfig& cfg, const RepOptions& opts) {
  return run_kind(cfg, CaseKind::Ocean, opts);
}

CaseResult run_matmul(const BenchConfig& cfg, Distribution distribution,
                      const RepOptions& opts) {
  BenchConfig c = cfg;
  c.distribution = distribution;
  return run_kind(c, CaseKind::Matmul, opts);
}

}  // namespace tspace::bench
