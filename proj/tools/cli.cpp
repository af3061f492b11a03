#include "cli.hpp"

#include <netinet/in.h>
#include <signal.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <thread>

#include "tspace/bench/cluster.hpp"
#include "tspace/bench/roles.hpp"
#include "tspace/errors.hpp"
#include "tspace/profiler.hpp"

extern char** environ;

namespace tsbench {

namespace fs = std::filesystem;
using namespace tspace;
using namespace tspace::bench;

std::vector<NodeAddress> read_host_file(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::invalid_argument("cannot open host file " + file.string());
  std::vector<NodeAddress> nodes;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string name, endpoint, extra;
    if (!(ls >> name >> endpoint) || (ls >> extra)) {
      throw std::invalid_argument(file.string() + ":" + std::to_string(lineno) +
                                  ": expected 'name host:port'");
    }
    nodes.push_back(parse_endpoint(endpoint, name));
  }
  return nodes;
}

void write_host_file(const fs::path& file, const std::vector<NodeAddress>& nodes) {
  std::ofstream out(file);
  for (const auto& n : nodes) out << n.name << ' ' << n.endpoint() << '\n';
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

std::map<std::string, std::string> read_key_values(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  return kv;
}

namespace {

using KeyValues = std::vector<std::pair<std::string, std::string>>;

void write_key_values(const fs::path& file, const KeyValues& kv) {
  std::ofstream out(file);
  for (const auto& [k, v] : kv) out << k << '=' << v << '\n';
  if (!out) throw std::runtime_error("cannot write " + file.string());
}

// Flags shared by `run` and the hidden `role` command.
struct Flags {
  std::string case_name;
  int workers = 1;
  std::optional<std::int64_t> size;
  std::string strategy = "sequential";
  std::string distribution = "uniform";
  int reps = 10;
  std::uint64_t seed = 1;
  std::int64_t threshold = 10000;
  int iters = 20;
  std::string mode = "threads";
  int base_port = 0;
  std::string hosts;
  std::string out = "tsbench-out";
  int poll_ms = 1;
  int deadline_s = 300;
};

void add_config_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--case", f.case_name, "password, sort, ocean or matmul")->required();
  cmd.add_option("--workers", f.workers, "number of workers")->capture_default_str();
  cmd.add_option("--size", f.size,
                 "password: DB entries, sort: elements, ocean: grid side, matmul: order");
  cmd.add_option("--strategy", f.strategy, "sequential, success_factor or notify")
      ->capture_default_str();
  cmd.add_option("--distribution", f.distribution, "matmul only: uniform or b_on_one")
      ->capture_default_str();
  cmd.add_option("--seed", f.seed, "input seed")->capture_default_str();
  cmd.add_option("--threshold", f.threshold, "sort split threshold")->capture_default_str();
  cmd.add_option("--iters", f.iters, "ocean iterations")->capture_default_str();
  cmd.add_option("--hosts", f.hosts, "host file: 'name host:port' per line, master first");
  cmd.add_option("--out", f.out, "output directory")->capture_default_str();
  cmd.add_option("--poll-interval-ms", f.poll_ms, "pause between polling rounds")
      ->capture_default_str();
  cmd.add_option("--deadline-s", f.deadline_s, "per-repetition deadline")->capture_default_str();
}

std::int64_t default_size(CaseKind k) {
  switch (k) {
    case CaseKind::Password: return 10000;
    case CaseKind::Sort: return 100000;
    case CaseKind::Ocean: return 64;
    case CaseKind::Matmul: return 50;
  }
  return 1;
}

BenchConfig to_config(const Flags& f) {
  BenchConfig cfg;
  auto kind = parse_case(f.case_name);
  if (!kind) throw std::invalid_argument("unknown case '" + f.case_name + "'");
  auto strategy = parse_strategy(f.strategy);
  if (!strategy) throw std::invalid_argument("unknown strategy '" + f.strategy + "'");
  auto dist = parse_distribution(f.distribution);
  if (!dist) throw std::invalid_argument("unknown distribution '" + f.distribution + "'");
  cfg.kind = *kind;
  cfg.workers = f.workers;
  cfg.size = f.size.value_or(default_size(*kind));
  cfg.strategy = *strategy;
  cfg.distribution = *dist;
  cfg.reps = f.reps;
  cfg.seed = f.seed;
  cfg.sort_threshold = f.threshold;
  cfg.ocean_iters = f.iters;
  cfg.poll_interval = std::chrono::milliseconds(f.poll_ms);
  cfg.deadline = std::chrono::seconds(f.deadline_s);
  validate(cfg);
  return cfg;
}

std::string group_name(const BenchConfig& cfg) {
  std::string g = std::string(case_name(cfg.kind)) + "_w" + std::to_string(cfg.workers) + "_n" +
                  std::to_string(cfg.size) + "_" + std::string(strategy_name(cfg.strategy));
  if (cfg.kind == CaseKind::Matmul) g += "_" + std::string(distribution_name(cfg.distribution));
  return g;
}

std::string make_run_key(std::uint64_t seed) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      now.time_since_epoch()).count() % 1000;
  std::ostringstream os;
  os << std::put_time(&tm, "%Y%m%dT%H%M%S") << std::setw(3) << std::setfill('0') << ms << "-s"
     << seed << "-p" << ::getpid();
  return os.str();
}

// ------------------------------------------------------------- processes --

bool port_free(const std::string& host, int port) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) return false;
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  addr.sin_addr.s_addr = host == "127.0.0.1" ? htonl(INADDR_LOOPBACK) : htonl(INADDR_ANY);
  const bool ok = ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0;
  ::close(fd);
  return ok;
}

bool ports_free(int base, int count) {
  if (base < 1 || base + count - 1 > 65535) return false;
  for (int i = 0; i < count; ++i) {
    if (!port_free("127.0.0.1", base + i)) return false;
  }
  return true;
}

bool is_local_host(const std::string& host) {
  static const std::set<std::string> loopback{"127.0.0.1", "localhost", "::1", "0.0.0.0"};
  if (loopback.contains(host)) return true;
  char name[256] = {};
  return ::gethostname(name, sizeof(name) - 1) == 0 && host == name;
}

pid_t spawn(const fs::path& exe, const std::vector<std::string>& args) {
  std::vector<char*> argv;
  std::string prog = exe.string();
  argv.push_back(prog.data());
  std::vector<std::string> copy = args;
  for (auto& a : copy) argv.push_back(a.data());
  argv.push_back(nullptr);
  pid_t pid = 0;
  if (int rc = ::posix_spawn(&pid, prog.c_str(), nullptr, nullptr, argv.data(), environ); rc != 0) {
    throw std::runtime_error("cannot start " + prog + ": " + std::strerror(rc));
  }
  return pid;
}

constexpr int kRoleDeadlineExit = 4;

struct ProcsOutcome {
  CaseResult::Fault fault = CaseResult::Fault::None;
  std::string detail;
};

// Reaps every child. The first abnormal exit kills the rest.
ProcsOutcome wait_children(std::vector<std::pair<pid_t, int>> children,
                           std::chrono::steady_clock::time_point deadline) {
  ProcsOutcome res;
  auto kill_all = [&] {
    for (auto& [pid, role] : children) ::kill(pid, SIGKILL);
    for (auto& [pid, role] : children) ::waitpid(pid, nullptr, 0);
    children.clear();
  };
  while (!children.empty()) {
    for (auto it = children.begin(); it != children.end();) {
      int status = 0;
      const pid_t r = ::waitpid(it->first, &status, WNOHANG);
      if (r == 0) {
        ++it;
        continue;
      }
      const int role = it->second;
      it = children.erase(it);
      if (r == -1 || (WIFEXITED(status) && WEXITSTATUS(status) == 0)) continue;
      if (WIFEXITED(status)) {
        res.detail = role_name(role) + " exited with status " + std::to_string(WEXITSTATUS(status));
        res.fault = WEXITSTATUS(status) == kRoleDeadlineExit ? CaseResult::Fault::Deadline
                                                             : CaseResult::Fault::Infrastructure;
      } else {
        res.detail = role_name(role) + " was killed by signal " + std::to_string(WTERMSIG(status));
        res.fault = CaseResult::Fault::Infrastructure;
      }
      kill_all();
      return res;
    }
    if (std::chrono::steady_clock::now() > deadline) {
      kill_all();
      res.fault = CaseResult::Fault::Deadline;
      res.detail = "roles did not finish before the deadline";
      return res;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  return res;
}

fs::path result_path(const fs::path& out, const std::string& run_key, int rep) {
  return out / (run_key + "_rep" + std::to_string(rep) + "_result.txt");
}

std::vector<std::string> role_args(const Flags& f, const BenchConfig& cfg, int role, int rep,
                                   const std::string& run_key, const fs::path& hosts) {
  return {"role", "--case", f.case_name, "--workers", std::to_string(cfg.workers),
          "--size", std::to_string(cfg.size), "--strategy", f.strategy,
          "--distribution", f.distribution, "--seed", std::to_string(cfg.seed),
          "--threshold", std::to_string(cfg.sort_threshold), "--iters",
          std::to_string(cfg.ocean_iters), "--poll-interval-ms", std::to_string(f.poll_ms),
          "--deadline-s", std::to_string(f.deadline_s), "--hosts", hosts.string(), "--out",
          f.out, "--role-index", std::to_string(role), "--rep", std::to_string(rep),
          "--run-key", run_key};
}

CaseResult run_procs_rep(const Context& ctx, const Flags& f, const BenchConfig& cfg, int rep,
                         const std::string& run_key, const fs::path& hosts,
                         const std::vector<NodeAddress>& nodes) {
  std::vector<std::pair<pid_t, int>> children;
  try {
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
      auto args = role_args(f, cfg, i, rep, run_key, hosts);
      if (is_local_host(nodes[static_cast<std::size_t>(i)].host)) {
        children.emplace_back(spawn(ctx.self_exe, args), i);
      } else {
        ctx.err << "start on " << nodes[static_cast<std::size_t>(i)].host << ": tsbench";
        for (const auto& a : args) ctx.err << ' ' << a;
        ctx.err << '\n';
      }
    }
  } catch (const std::exception& e) {
    for (auto& [pid, role] : children) ::kill(pid, SIGKILL);
    for (auto& [pid, role] : children) ::waitpid(pid, nullptr, 0);
    CaseResult r;
    r.fault = CaseResult::Fault::Infrastructure;
    r.detail = e.what();
    return r;
  }
  const auto deadline = std::chrono::steady_clock::now() + cfg.deadline + std::chrono::seconds(5);
  ProcsOutcome po = wait_children(std::move(children), deadline);
  CaseResult r;
  if (po.fault != CaseResult::Fault::None) {
    r.fault = po.fault;
    r.detail = po.detail;
    return r;
  }
  const auto kv = read_key_values(result_path(f.out, run_key, rep));
  r.correct = kv.at("correct") == "1";
  r.digest = kv.at("digest");
  r.detail = kv.at("detail");
  r.searches = std::stoll(kv.at("searches"));
  r.visited_first_round = std::stoll(kv.at("visited_first_round"));
  r.visited_total = std::stoll(kv.at("visited_total"));
  r.total_runtime = std::chrono::nanoseconds(std::stoll(kv.at("total_runtime_ns")));
  for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
    r.dumps.push_back(dump_path(f.out, run_key, rep, i));
  }
  return r;
}

// ----------------------------------------------------------- aggregation --

// Dump files of a directory grouped by configuration, taken from the run
// manifests; without manifests every dump-shaped CSV forms one group.
std::map<std::string, std::vector<fs::path>> collect_dumps(const fs::path& dir) {
  std::map<std::string, std::vector<fs::path>> groups;
  if (!fs::is_directory(dir)) return groups;
  bool any_manifest = false;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (!name.starts_with("manifest_") || entry.path().extension() != ".txt") continue;
    any_manifest = true;
    const auto kv = read_key_values(entry.path());
    const auto group = kv.find("group");
    for (const auto& [k, v] : kv) {
      if (!k.ends_with(".dumps") || v.empty()) continue;
      std::istringstream parts(v);
      std::string file;
      while (std::getline(parts, file, ';')) {
        if (file.empty()) continue;
        const fs::path p = dir / file;
        if (fs::exists(p)) groups[group == kv.end() ? "all" : group->second].push_back(p);
      }
    }
  }
  if (!any_manifest) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.path().extension() != ".csv") continue;
      std::ifstream in(entry.path());
      std::string first;
      if (std::getline(in, first) && first == prof::kDumpHeader) {
        groups["all"].push_back(entry.path());
      }
    }
  }
  for (auto& [g, files] : groups) std::sort(files.begin(), files.end());
  return groups;
}

void write_stats_file(const fs::path& file, const std::map<std::string, prof::MetricStats>& stats) {
  std::ofstream out(file);
  prof::write_stats(out, stats);
  if (!out) throw prof::IoFailure("cannot write " + file.string());
}

// ---------------------------------------------------------------- commands --

int cmd_run(const Context& ctx, const Flags& f) {
  BenchConfig cfg;
  try {
    cfg = to_config(f);
  } catch (const std::invalid_argument& e) {
    ctx.err << "error: " << e.what() << '\n';
    return kUsage;
  }
  if (f.mode != "threads" && f.mode != "procs" && f.mode != "hosts") {
    ctx.err << "error: --mode must be threads, procs or hosts\n";
    return kUsage;
  }
  if (f.mode == "hosts" && f.hosts.empty()) {
    ctx.err << "error: --mode hosts needs --hosts <file>\n";
    return kUsage;
  }
  if (f.base_port < 0 || f.base_port > 65535) {
    ctx.err << "error: --base-port out of range\n";
    return kUsage;
  }

  const fs::path out = f.out;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) {
    ctx.err << "error: cannot create " << out << ": " << ec.message() << '\n';
    return kInfrastructure;
  }
  const std::string run_key = make_run_key(f.seed);
  const int roles = cfg.workers + 1;

  // Topology for process modes.
  std::vector<NodeAddress> nodes;
  fs::path hosts_file;
  if (f.mode == "hosts") {
    try {
      nodes = read_host_file(f.hosts);
    } catch (const std::exception& e) {
      ctx.err << "error: " << e.what() << '\n';
      return kUsage;
    }
    if (static_cast<int>(nodes.size()) != roles) {
      ctx.err << "error: host file lists " << nodes.size() << " roles, expected " << roles
              << " (master first)\n";
      return kUsage;
    }
    if (!is_local_host(nodes[0].host)) {
      ctx.err << "error: the master must run on this host\n";
      return kUsage;
    }
    hosts_file = fs::absolute(f.hosts);
  } else if (f.mode == "procs") {
    int base = f.base_port;
    if (base != 0) {
      if (!ports_free(base, roles)) {
        ctx.err << "error: ports " << base << ".." << base + roles - 1 << " are not all free\n";
        return kInfrastructure;
      }
    } else {
      base = 47100;
      int tries = 0;
      while (!ports_free(base, roles) && ++tries < 200) base += roles;
      if (tries >= 200) {
        ctx.err << "error: no free port range found\n";
        return kInfrastructure;
      }
    }
    for (int i = 0; i < roles; ++i) {
      nodes.push_back(NodeAddress{"127.0.0.1", static_cast<std::uint16_t>(base + i), role_name(i)});
    }
    hosts_file = out / (run_key + "_hosts.txt");
    write_host_file(hosts_file, nodes);
  } else if (f.base_port != 0 && !ports_free(f.base_port, roles)) {
    ctx.err << "error: ports " << f.base_port << ".." << f.base_port + roles - 1
            << " are not all free\n";
    return kInfrastructure;
  }

  KeyValues manifest{
      {"run_key", run_key},
      {"group", group_name(cfg)},
      {"case", std::string(case_name(cfg.kind))},
      {"workers", std::to_string(cfg.workers)},
      {"size", std::to_string(cfg.size)},
      {"strategy", std::string(strategy_name(cfg.strategy))},
      {"distribution", std::string(distribution_name(cfg.distribution))},
      {"reps", std::to_string(f.reps)},
      {"seed", std::to_string(f.seed)},
      {"threshold", std::to_string(cfg.sort_threshold)},
      {"iters", std::to_string(cfg.ocean_iters)},
      {"mode", f.mode},
      {"base_port", std::to_string(f.base_port)},
      {"poll_interval_ms", std::to_string(f.poll_ms)},
      {"deadline_s", std::to_string(f.deadline_s)},
  };
  const fs::path manifest_file = out / ("manifest_" + run_key + ".txt");

  int exit_code = kOk;
  std::vector<fs::path> all_dumps;
  for (int rep = 0; rep < f.reps; ++rep) {
    BenchConfig rc = cfg;
    rc.seed = rep_seed(f.seed, rep);
    CaseResult r;
    if (f.mode == "threads") {
      try {
        r = run_threads(rc, RepOptions{rep, run_key, out, static_cast<std::uint16_t>(f.base_port)});
      } catch (const std::exception& e) {
        r.fault = CaseResult::Fault::Infrastructure;
        r.detail = e.what();
      }
    } else {
      r = run_procs_rep(ctx, f, rc, rep, run_key, hosts_file, nodes);
    }

    const std::string p = "rep." + std::to_string(rep) + ".";
    std::string dumps;
    for (const auto& d : r.dumps) {
      if (!dumps.empty()) dumps += ';';
      dumps += d.filename().string();
      all_dumps.push_back(d);
    }
    const char* fault = r.fault == CaseResult::Fault::None       ? "none"
                        : r.fault == CaseResult::Fault::Deadline ? "deadline"
                                                                 : "infrastructure";
    manifest.insert(manifest.end(),
                    {{p + "seed", std::to_string(rc.seed)},
                     {p + "correct", r.correct ? "1" : "0"},
                     {p + "fault", fault},
                     {p + "digest", r.digest},
                     {p + "searches", std::to_string(r.searches)},
                     {p + "visited_first_round", std::to_string(r.visited_first_round)},
                     {p + "visited_total", std::to_string(r.visited_total)},
                     {p + "total_runtime_ns", std::to_string(r.total_runtime.count())},
                     {p + "dumps", dumps}});

    ctx.out << "rep " << rep << " seed " << rc.seed << ": ";
    if (r.fault != CaseResult::Fault::None) {
      ctx.out << "FAILED (" << fault << ")\n";
      ctx.err << r.detail << (r.detail.ends_with('\n') ? "" : "\n");
      exit_code = kInfrastructure;
      break;
    }
    ctx.out << (r.correct ? "correct" : "INCORRECT") << ", digest " << r.digest << ", "
            << r.searches << " searches, mean first-round visits " << std::fixed
            << std::setprecision(3) << r.mean_visited_first_round() << ", runtime "
            << std::setprecision(1) << std::chrono::duration<double, std::milli>(r.total_runtime).count()
            << " ms\n"
            << std::defaultfloat;
    if (!r.correct) {
      ctx.err << "rep " << rep << ": " << r.detail << '\n';
      exit_code = kIncorrect;
    }
  }

  if (!all_dumps.empty()) {
    const fs::path stats_file = out / (run_key + "_stats.csv");
    try {
      write_stats_file(stats_file, prof::aggregate(all_dumps));
      manifest.emplace_back("aggregate", stats_file.filename().string());
    } catch (const std::exception& e) {
      ctx.err << "error: " << e.what() << '\n';
      if (exit_code == kOk) exit_code = kInfrastructure;
    }
  }
  write_key_values(manifest_file, manifest);
  ctx.out << "manifest " << manifest_file.string() << '\n';
  return exit_code;
}

int cmd_role(const Context& ctx, const Flags& f, int role, int rep, const std::string& run_key) {
  BenchConfig cfg;
  std::vector<NodeAddress> nodes;
  try {
    cfg = to_config(f);
    nodes = read_host_file(f.hosts);
  } catch (const std::exception& e) {
    ctx.err << "error: " << e.what() << '\n';
    return kUsage;
  }
  if (static_cast<int>(nodes.size()) != cfg.workers + 1 || role < 0 || role > cfg.workers) {
    ctx.err << "error: role index does not fit the host file\n";
    return kUsage;
  }
  try {
    LocalSpace space(role_name(role));
    NodeAddress bind_addr = nodes[static_cast<std::size_t>(role)];
    auto server = Server::start(space, bind_addr);
    RoleEnv env;
    env.cfg = cfg;
    env.role = role;
    env.nodes = nodes;
    env.space = &space;
    env.run_key = run_key;
    env.rep = rep;
    env.out_dir = f.out;
    env.deadline = std::chrono::steady_clock::now() + cfg.deadline;
    env.own_process = true;
    if (role == 0) {
      CaseResult r = run_master(env);
      write_key_values(result_path(f.out, run_key, rep),
                       {{"correct", r.correct ? "1" : "0"},
                        {"digest", r.digest},
                        {"detail", r.detail},
                        {"searches", std::to_string(r.searches)},
                        {"visited_first_round", std::to_string(r.visited_first_round)},
                        {"visited_total", std::to_string(r.visited_total)},
                        {"total_runtime_ns", std::to_string(r.total_runtime.count())}});
    } else {
      run_worker(env);
    }
    server->stop();
  } catch (const DeadlineExceeded& e) {
    ctx.err << role_name(role) << ": " << e.what() << '\n';
    return kRoleDeadlineExit;
  } catch (const std::exception& e) {
    ctx.err << role_name(role) << ": " << e.what() << '\n';
    return kInfrastructure;
  }
  return kOk;
}

int cmd_aggregate(const Context& ctx, const fs::path& dir) {
  std::map<std::string, std::vector<fs::path>> groups;
  try {
    groups = collect_dumps(dir);
  } catch (const std::exception& e) {
    ctx.err << "error: " << e.what() << '\n';
    return kIncorrect;
  }
  if (groups.empty()) {
    ctx.err << "no dumps found in " << dir.string() << '\n';
    return kIncorrect;
  }
  try {
    for (const auto& [group, files] : groups) {
      const fs::path target =
          groups.size() == 1 ? dir / "stats.csv" : dir / ("stats_" + group + ".csv");
      write_stats_file(target, prof::aggregate(files));
      ctx.out << target.string() << " (" << files.size() << " dumps)\n";
    }
  } catch (const prof::ParseError& e) {
    ctx.err << "parse error: " << e.what() << '\n';
    return kIncorrect;
  } catch (const std::exception& e) {
    ctx.err << "error: " << e.what() << '\n';
    return kIncorrect;
  }
  return kOk;
}

std::map<std::string, prof::MetricStats> stats_of(const fs::path& dir) {
  const auto groups = collect_dumps(dir);
  std::vector<fs::path> files;
  for (const auto& [g, fs_] : groups) files.insert(files.end(), fs_.begin(), fs_.end());
  if (!files.empty()) return prof::aggregate(files);
  if (fs::exists(dir / "stats.csv")) return prof::read_stats(dir / "stats.csv");
  throw std::runtime_error("no dumps or stats.csv in " + dir.string());
}

int cmd_compare(const Context& ctx, const fs::path& a, const fs::path& b, const std::string& metric) {
  std::map<std::string, prof::MetricStats> sa, sb;
  try {
    sa = stats_of(a);
    sb = stats_of(b);
  } catch (const std::exception& e) {
    ctx.err << "error: " << e.what() << '\n';
    return kIncorrect;
  }
  const auto ia = sa.find(metric);
  const auto ib = sb.find(metric);
  if (ia == sa.end() || ib == sb.end()) {
    ctx.err << "metric '" << metric << "' not found in " << (ia == sa.end() ? a : b).string()
            << '\n';
    return kIncorrect;
  }
  const auto& x = ia->second;
  const auto& y = ib->second;
  const double ratio = x.mean / y.mean;
  auto& os = ctx.out;
  os << "metric " << metric << '\n';
  os << std::left << std::setw(8) << "" << std::right << std::setw(16) << "A" << std::setw(16)
     << "B" << '\n';
  os << std::setprecision(9);
  os << std::left << std::setw(8) << "mean" << std::right << std::setw(16) << x.mean
     << std::setw(16) << y.mean << '\n';
  os << std::left << std::setw(8) << "stddev" << std::right << std::setw(16) << x.stddev
     << std::setw(16) << y.stddev << '\n';
  os << std::left << std::setw(8) << "n" << std::right << std::setw(16) << x.n << std::setw(16)
     << y.n << '\n';
  os << "ratio A/B " << ratio << '\n';
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, const Context& ctx) {
  CLI::App app{"Tuple-space benchmark driver", "tsbench"};
  app.require_subcommand(1);

  Flags run_flags;
  auto* run = app.add_subcommand("run", "run a workload for a number of repetitions");
  add_config_flags(*run, run_flags);
  run->add_option("--reps", run_flags.reps, "repetitions")->capture_default_str();
  run->add_option("--mode", run_flags.mode, "threads, procs or hosts")->capture_default_str();
  run->add_option("--base-port", run_flags.base_port,
                  "role i listens on base-port + i (0: choose automatically)")
      ->capture_default_str();

  std::string agg_dir;
  auto* agg = app.add_subcommand("aggregate", "write per-label statistics of a dump directory");
  agg->add_option("dir", agg_dir)->required();

  std::string cmp_a, cmp_b, cmp_metric;
  auto* cmp = app.add_subcommand("compare", "compare one metric between two directories");
  cmp->add_option("dirA", cmp_a)->required();
  cmp->add_option("dirB", cmp_b)->required();
  cmp->add_option("--metric", cmp_metric)->required();

  Flags role_flags;
  int role_index = 0, role_rep = 0;
  std::string role_key;
  auto* role = app.add_subcommand("role", "run one role of a repetition");
  role->group("");
  add_config_flags(*role, role_flags);
  role->add_option("--role-index", role_index)->required();
  role->add_option("--rep", role_rep)->required();
  role->add_option("--run-key", role_key)->required();

  std::vector<std::string> argv_storage{"tsbench"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    ctx.out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    ctx.out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    ctx.err << "error: " << e.what() << "\n\n";
    const CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    ctx.err << sub->help();
    return kUsage;
  }

  if (run->parsed()) return cmd_run(ctx, run_flags);
  if (agg->parsed()) return cmd_aggregate(ctx, agg_dir);
  if (cmp->parsed()) return cmd_compare(ctx, cmp_a, cmp_b, cmp_metric);
  if (role->parsed()) return cmd_role(ctx, role_flags, role_index, role_rep, role_key);
  return kUsage;
}

}  // namespace tsbench
