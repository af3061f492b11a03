#include "tspace/bench/roles.hpp"

#include <algorithm>
#include <bit>
#include <cstdlib>
#include <map>
#include <numeric>
#include <sstream>
#include <thread>

#include "tspace/bench/workloads.hpp"
#include "tspace/errors.hpp"
#include "tspace/md5.hpp"
#include "tspace/profiled_space.hpp"
#include "tspace/rng.hpp"
#include "tspace/search.hpp"

namespace tspace::bench {

namespace handshake {
Tuple ready() { return Tuple{"search", "worker", "worker_ready"}; }
Tuple loaded() { return Tuple{"search", "worker", "data_loaded"}; }
Tuple key(const std::string& run_key) { return Tuple{"search", "master_key", run_key}; }
Template key_template() { return Template{"search", "master_key", TypeOf{ValueTag::Str}}; }
}  // namespace handshake

std::string role_name(int role) {
  return role == 0 ? "master" : "worker" + std::to_string(role - 1);
}

std::filesystem::path dump_path(const std::filesystem::path& dir, const std::string& run_key,
                                int rep, int role) {
  return dir / (run_key + "_rep" + std::to_string(rep) + "_" + role_name(role) + ".csv");
}

void barrier_ready(TupleSpace& master_space, int workers, Timeout timeout) {
  const auto deadline = timeout.deadline_from();
  const Template ready = template_of(handshake::ready());
  const Template loaded = template_of(handshake::loaded());
  try {
    for (int i = 0; i < workers; ++i) master_space.in(ready, remaining(deadline));
    for (int i = 0; i < workers; ++i) master_space.in(loaded, remaining(deadline));
  } catch (const TimeoutError&) {
    throw DeadlineExceeded("not every worker reported ready before the deadline");
  }
}

namespace {

using Clock = std::chrono::steady_clock;

constexpr ValueTag kInt = ValueTag::Int64;
constexpr ValueTag kStr = ValueTag::Str;
constexpr ValueTag kInts = ValueTag::IntArray;
constexpr ValueTag kFloats = ValueTag::FloatArray;

// The role's view of the cluster: its own space and a connection to every
// other node, each timed under the locality-specific labels.
class Node {
 public:
  explicit Node(const RoleEnv& env)
      : env_(env), profiler_(role_name(env.role)), remotes_(env.nodes.size()) {
    profiler_.set_thread_name("main");
    std::shared_ptr<TupleSpace> own(std::shared_ptr<TupleSpace>{}, env.space);
    self_ = std::make_shared<ProfiledSpace>(own, profiler_, Locality::Local);
    ConnectOptions opts;
    opts.client_name = role_name(env.role);
    for (std::size_t r = 0; r < env.nodes.size(); ++r) {
      if (static_cast<int>(r) == env.role) continue;
      std::shared_ptr<TupleSpace> conn = RemoteSpace::connect(env.nodes[r], opts);
      remotes_[r] = std::make_shared<ProfiledSpace>(std::move(conn), profiler_, Locality::Remote);
    }
  }

  const RoleEnv& env() const { return env_; }
  const BenchConfig& cfg() const { return env_.cfg; }
  prof::Profiler& profiler() { return profiler_; }
  ProfiledSpace& self() { return *self_; }
  std::shared_ptr<ProfiledSpace> self_ptr() { return self_; }
  ProfiledSpace& master() { return *remotes_.at(0); }
  ProfiledSpace& worker(int k) { return *remotes_.at(static_cast<std::size_t>(k) + 1); }
  std::shared_ptr<TupleSpace> remote(std::size_t role) { return remotes_.at(role); }

  Timeout left() const {
    return remaining(std::optional<Clock::time_point>(env_.deadline));
  }

  /// Blocking take or read bounded by the repetition deadline. An aborted
  /// repetition shuts the spaces down, which fails the wait.
  Tuple await(TupleSpace& space, const Template& tmpl, bool take) {
    try {
      return take ? space.in(tmpl, left()) : space.rd(tmpl, left());
    } catch (const TimeoutError&) {
      throw DeadlineExceeded("waiting for " + to_string(tmpl) + " timed out");
    }
  }

  void dump() {
    if (env_.out_dir.empty()) {
      profiler_.drain();
      return;
    }
    profiler_.dump(dump_path(env_.out_dir, env_.run_key, env_.rep, env_.role));
  }

 private:
  const RoleEnv& env_;
  prof::Profiler profiler_;
  std::shared_ptr<ProfiledSpace> self_;
  std::vector<std::shared_ptr<ProfiledSpace>> remotes_;  // indexed by role
};

Tuple make_tuple(std::vector<Value> fields) { return Tuple(std::move(fields)); }

// ---------------------------------------------------------------- worker --

class Worker {
 public:
  explicit Worker(Node& node)
      : node_(node), id_(node.env().role - 1), dir_(node.self(), peers()),
        searcher_(dir_, node.cfg().strategy) {}

  int id() const { return id_; }
  Node& node() { return node_; }

  /// One timed search; its first-round probe count is the nodeVisited sample.
  SearchOutcome find(const Template& tmpl, bool destructive,
                     std::function<bool()> stop = nullptr) {
    SearchOptions opts;
    opts.destructive = destructive;
    opts.poll_interval = node_.cfg().poll_interval;
    opts.deadline = node_.left();
    const auto& aborted = node_.env().aborted;
    if (stop || aborted) {
      opts.should_stop = [stop, aborted] {
        return (aborted && aborted()) || (stop && stop());
      };
    }
    SearchOutcome r = [&] {
      prof::Profiler::Scope s(node_.profiler(), labels::kSearch);
      return searcher_.find(tmpl, opts);
    }();
    node_.profiler().record_counter(labels::kNodeVisited,
                                    static_cast<std::int64_t>(r.visited_nodes_first_round));
    ++searches_;
    first_round_ += static_cast<std::int64_t>(r.visited_nodes_first_round);
    total_ += static_cast<std::int64_t>(r.visited_nodes);
    return r;
  }

  Tuple exit_report() const {
    return Tuple{"worker_exit", id_, searches_, first_round_, total_};
  }

 private:
  // Other workers, in an order shuffled per worker so that plain sequential
  // probing has no built-in bias toward any neighbor.
  std::vector<std::shared_ptr<TupleSpace>> peers() {
    const int w = node_.cfg().workers;
    std::vector<std::shared_ptr<TupleSpace>> out;
    for (int k = 0; k < w; ++k) {
      if (k != id_) out.push_back(node_.remote(static_cast<std::size_t>(k) + 1));
    }
    SplitMix64 rng(derive_seed(node_.cfg().seed, static_cast<std::uint64_t>(id_)));
    for (std::size_t i = out.size(); i > 1; --i) {
      std::swap(out[i - 1], out[rng.below(i)]);
    }
    return out;
  }

  Node& node_;
  int id_;
  PeerDirectory dir_;
  Searcher searcher_;
  std::int64_t searches_ = 0;
  std::int64_t first_round_ = 0;
  std::int64_t total_ = 0;
};

void password_load(Worker& wk) {
  const auto& cfg = wk.node().cfg();
  auto [b, e] = partition_range(cfg.size, cfg.workers, wk.id());
  for (std::int64_t i = b; i < e; ++i) {
    wk.node().self().out(Tuple{"hashSet", password_hash(i), password_of(i)});
  }
}

void password_work(Worker& wk) {
  Node& node = wk.node();
  const Template task{"search_task", TypeOf{kStr}, TypeOf{kStr}};
  for (;;) {
    Tuple t = node.await(node.master(), task, true);
    if (t[2].as_str() == handshake::kDoneStatus) return;
    const std::string& hash = t[1].as_str();
    SearchOutcome r = wk.find(Template{"hashSet", hash, Any{}}, false);
    node.master().out(Tuple{"foundValue", hash, r.tuple[2].as_str()});
  }
}

void send_sorted(Worker& wk, std::vector<std::int64_t> run, std::int64_t& next_run) {
  TupleSpace& master = wk.node().master();
  if (run.size() <= kMaxArrayElements) {
    master.out(make_tuple({"sorted", std::move(run)}));
    return;
  }
  const std::int64_t run_id = (static_cast<std::int64_t>(wk.id()) << 32) | next_run++;
  const auto parts = static_cast<std::int64_t>((run.size() + kMaxArrayElements - 1) /
                                               kMaxArrayElements);
  for (std::int64_t p = 0; p < parts; ++p) {
    const auto b = run.begin() + p * static_cast<std::int64_t>(kMaxArrayElements);
    const auto e = p + 1 == parts ? run.end() : b + static_cast<std::int64_t>(kMaxArrayElements);
    master.out(make_tuple({"sorted_part", run_id, p, parts, std::vector<std::int64_t>(b, e)}));
  }
}

void sort_work(Worker& wk) {
  Node& node = wk.node();
  LocalSpace& own = *node.env().space;
  const Template complete{"sort_complete"};
  const Template unsorted{"unsorted", TypeOf{kInts}};
  const auto threshold = static_cast<std::size_t>(node.cfg().sort_threshold);
  std::int64_t next_run = 0;
  for (;;) {
    std::vector<std::int64_t> arr;
    try {
      SearchOutcome r = wk.find(unsorted, true, [&] { return own.rdp(complete).has_value(); });
      arr = r.tuple[1].as_int_array();
    } catch (const SearchStopped&) {
      if (node.env().aborted && node.env().aborted()) throw;
      return;
    }
    while (arr.size() > threshold) {
      const std::size_t half = (arr.size() + 1) / 2;
      node.self().out(make_tuple(
          {"unsorted", std::vector<std::int64_t>(arr.begin(), arr.begin() + half)}));
      arr.erase(arr.begin(), arr.begin() + half);
    }
    std::sort(arr.begin(), arr.end());
    send_sorted(wk, std::move(arr), next_run);
  }
}

void ocean_work(Worker& wk) {
  Node& node = wk.node();
  const int k = wk.id();
  const int w = node.cfg().workers;
  const Tuple panel = node.await(
      node.self(), Template{"panel", k, TypeOf{kInt}, TypeOf{kInt}, TypeOf{kFloats}}, true);
  const int n = static_cast<int>(panel[2].as_int());
  const int width = static_cast<int>(panel[3].as_int());
  const int c0 = panel_columns(n, w, k).first;
  std::vector<double> cur = panel[4].as_float_array();  // column-major, n per column
  std::vector<double> next(cur.size());
  auto col = [&](std::vector<double>& v, int c) { return v.data() + static_cast<std::size_t>(c) * n; };

  for (int t = 1; t <= node.cfg().ocean_iters; ++t) {
    if (k > 0) {
      node.self().out(make_tuple({"border", k, t, "left", std::vector<double>(col(cur, 0), col(cur, 0) + n)}));
    }
    if (k < w - 1) {
      node.self().out(make_tuple(
          {"border", k, t, "right", std::vector<double>(col(cur, width - 1), col(cur, width - 1) + n)}));
    }
    std::vector<double> left_halo, right_halo;
    if (k > 0) {
      left_halo = wk.find(Template{"border", k - 1, t, "right", Any{}}, false).tuple[4].as_float_array();
    }
    if (k < w - 1) {
      right_halo = wk.find(Template{"border", k + 1, t, "left", Any{}}, false).tuple[4].as_float_array();
    }
    for (int c = 0; c < width; ++c) {
      const int gc = c0 + c;
      const double* here = col(cur, c);
      double* out = col(next, c);
      const double* lhs = c > 0 ? col(cur, c - 1) : left_halo.data();
      const double* rhs = c < width - 1 ? col(cur, c + 1) : right_halo.data();
      for (int r = 0; r < n; ++r) {
        if (r == 0 || r == n - 1 || gc == 0 || gc == n - 1) {
          out[r] = here[r];
        } else {
          out[r] = jacobi_cell(here[r - 1], here[r + 1], lhs[r], rhs[r]);
        }
      }
    }
    std::swap(cur, next);
    // Both neighbors have read step t-2 before publishing step t-1, which
    // this worker has just consumed.
    if (t >= 3) {
      if (k > 0) node.self().inp(Template{"border", k, t - 2, "left", Any{}});
      if (k < w - 1) node.self().inp(Template{"border", k, t - 2, "right", Any{}});
    }
  }
  node.master().out(make_tuple({"result_panel", k, std::move(cur)}));
  node.await(node.self(), Template{"ocean_complete"}, true);
}

void matmul_work(Worker& wk) {
  Node& node = wk.node();
  const auto n = static_cast<int>(node.cfg().size);
  for (int i = wk.id(); i < n; i += node.cfg().workers) {
    const Tuple a = node.await(node.self(), Template{"A_row", i, Any{}}, true);
    const auto& a_row = a[2].as_float_array();
    std::vector<double> c(static_cast<std::size_t>(n), 0.0);
    for (int j = 0; j < n; ++j) {
      const Tuple b = wk.find(Template{"B_row", j, Any{}}, false).tuple;
      axpy_row(a_row[static_cast<std::size_t>(j)], b[2].as_float_array(), c);
    }
    node.master().out(make_tuple({"C_row", i, std::move(c)}));
  }
  node.await(node.self(), Template{"matmul_complete"}, true);
}

void maybe_inject_fault(const RoleEnv& env) {
  const char* target = std::getenv(kFaultEnv);
  if (!target || std::to_string(env.role - 1) != target) return;
  if (env.own_process) std::_Exit(86);
  throw std::runtime_error("injected fault in " + role_name(env.role));
}

// ---------------------------------------------------------------- master --

struct Verdict {
  bool correct = false;
  std::string digest;
  std::string detail;
};

Verdict password_master(Node& node) {
  const auto& cfg = node.cfg();
  const auto draws = password_task_draws(cfg.size, cfg.password_tasks, cfg.seed);
  std::vector<std::string> expected;
  for (auto i : draws) {
    expected.push_back(password_hash(i));
    node.self().out(Tuple{"search_task", expected.back(), handshake::kPendingStatus});
  }
  node.self().out(handshake::key(node.env().run_key));

  std::vector<std::pair<std::string, std::string>> found;
  const Template result{"foundValue", TypeOf{kStr}, TypeOf{kStr}};
  for (std::size_t i = 0; i < draws.size(); ++i) {
    Tuple t = node.await(node.self(), result, true);
    found.emplace_back(t[1].as_str(), t[2].as_str());
  }
  node.profiler().end(labels::kTotalRuntime);

  Verdict v;
  std::size_t wrong = 0;
  std::vector<std::string> answered;
  for (const auto& [hash, pwd] : found) {
    if (md5_hex(pwd) != hash) ++wrong;
    answered.push_back(hash);
  }
  std::sort(expected.begin(), expected.end());
  std::sort(answered.begin(), answered.end());
  std::sort(found.begin(), found.end());
  std::string lines;
  for (const auto& [hash, pwd] : found) lines += hash + "," + pwd + "\n";
  v.digest = md5_hex(lines);
  v.correct = wrong == 0 && expected == answered;
  v.detail = std::to_string(found.size()) + " passwords recovered, " + std::to_string(wrong) +
             " with a wrong hash" + (expected == answered ? "" : ", task multiset mismatch");

  for (int k = 0; k < cfg.workers; ++k) {
    node.self().out(Tuple{"search_task", "", handshake::kDoneStatus});
  }
  return v;
}

Verdict sort_master(Node& node) {
  const auto& cfg = node.cfg();
  const auto input = sort_input(cfg.size, cfg.seed);
  for (std::size_t b = 0; b < input.size(); b += kMaxArrayElements) {
    const auto e = std::min(input.size(), b + kMaxArrayElements);
    node.worker(0).out(make_tuple(
        {"unsorted", std::vector<std::int64_t>(input.begin() + static_cast<std::ptrdiff_t>(b),
                                               input.begin() + static_cast<std::ptrdiff_t>(e))}));
  }
  node.self().out(handshake::key(node.env().run_key));

  std::vector<std::vector<std::int64_t>> runs;
  std::size_t collected = 0;
  const Template sorted{"sorted", TypeOf{kInts}};
  if (static_cast<std::size_t>(cfg.sort_threshold) <= kMaxArrayElements) {
    while (collected < input.size()) {
      Tuple t = node.await(node.self(), sorted, true);
      runs.push_back(t[1].as_int_array());
      collected += runs.back().size();
    }
  } else {
    // Long runs arrive in parts as well, so both shapes are polled.
    const Template part{"sorted_part", TypeOf{kInt}, TypeOf{kInt}, TypeOf{kInt}, TypeOf{kInts}};
    std::map<std::int64_t, std::map<std::int64_t, std::vector<std::int64_t>>> partial;
    while (collected < input.size()) {
      if (Clock::now() >= node.env().deadline) throw DeadlineExceeded("sorted runs missing");
      if (node.env().aborted && node.env().aborted()) throw SearchStopped("repetition aborted");
      if (auto t = node.self().inp(sorted)) {
        runs.push_back((*t)[1].as_int_array());
        collected += runs.back().size();
      } else if (auto p = node.self().inp(part)) {
        auto& pieces = partial[(*p)[1].as_int()];
        pieces[(*p)[2].as_int()] = (*p)[4].as_int_array();
        if (static_cast<std::int64_t>(pieces.size()) == (*p)[3].as_int()) {
          std::vector<std::int64_t> run;
          for (auto& [idx, piece] : pieces) run.insert(run.end(), piece.begin(), piece.end());
          partial.erase((*p)[1].as_int());
          collected += run.size();
          runs.push_back(std::move(run));
        }
      } else {
        std::this_thread::sleep_for(std::max(cfg.poll_interval, std::chrono::milliseconds(1)));
      }
    }
  }
  node.profiler().end(labels::kTotalRuntime);

  auto merged = merge_runs(runs);
  auto reference = input;
  std::sort(reference.begin(), reference.end());
  Verdict v;
  v.correct = merged == reference;
  v.digest = digest_ints(merged);
  v.detail = std::to_string(runs.size()) + " sorted runs, " + std::to_string(merged.size()) +
             " of " + std::to_string(input.size()) + " elements";
  for (int k = 0; k < cfg.workers; ++k) node.worker(k).out(Tuple{"sort_complete"});
  return v;
}

Verdict ocean_master(Node& node) {
  const auto& cfg = node.cfg();
  const int n = static_cast<int>(cfg.size);
  const int w = cfg.workers;
  const Grid initial = ocean_initial(n);
  for (int k = 0; k < w; ++k) {
    auto [c0, width] = panel_columns(n, w, k);
    std::vector<double> panel;
    panel.reserve(static_cast<std::size_t>(width) * n);
    for (int c = c0; c < c0 + width; ++c) {
      for (int r = 0; r < n; ++r) panel.push_back(initial.at(r, c));
    }
    node.worker(k).out(make_tuple({"panel", k, n, width, std::move(panel)}));
  }
  node.self().out(handshake::key(node.env().run_key));

  Grid grid{n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0)};
  const Template result{"result_panel", TypeOf{kInt}, TypeOf{kFloats}};
  for (int i = 0; i < w; ++i) {
    Tuple t = node.await(node.self(), result, true);
    const int k = static_cast<int>(t[1].as_int());
    auto [c0, width] = panel_columns(n, w, k);
    const auto& panel = t[2].as_float_array();
    for (int c = 0; c < width; ++c) {
      for (int r = 0; r < n; ++r) grid.at(r, c0 + c) = panel[static_cast<std::size_t>(c) * n + r];
    }
  }
  node.profiler().end(labels::kTotalRuntime);

  const Grid reference = ocean_reference(n, cfg.ocean_iters);
  Verdict v;
  std::size_t diffs = 0;
  for (std::size_t i = 0; i < grid.cells.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(grid.cells[i]) !=
        std::bit_cast<std::uint64_t>(reference.cells[i])) {
      ++diffs;
    }
  }
  v.correct = diffs == 0;
  v.digest = digest_doubles(grid.cells);
  v.detail = std::to_string(diffs) + " cells differ from the sequential reference";
  for (int k = 0; k < w; ++k) node.worker(k).out(Tuple{"ocean_complete"});
  return v;
}

Verdict matmul_master(Node& node) {
  const auto& cfg = node.cfg();
  const int n = static_cast<int>(cfg.size);
  const int w = cfg.workers;
  auto [a, b] = matmul_inputs(n, cfg.seed);
  for (int i = 0; i < n; ++i) {
    auto row = a.row(i);
    node.worker(a_row_owner(i, w)).out(make_tuple({"A_row", i, std::vector<double>(row.begin(), row.end())}));
  }
  for (int j = 0; j < n; ++j) {
    auto row = b.row(j);
    node.worker(b_row_owner(j, w, cfg.distribution))
        .out(make_tuple({"B_row", j, std::vector<double>(row.begin(), row.end())}));
  }
  node.self().out(handshake::key(node.env().run_key));

  Matrix c{n, std::vector<double>(static_cast<std::size_t>(n) * n, 0.0)};
  const Template result{"C_row", TypeOf{kInt}, TypeOf{kFloats}};
  for (int i = 0; i < n; ++i) {
    Tuple t = node.await(node.self(), result, true);
    const auto& row = t[2].as_float_array();
    std::copy(row.begin(), row.end(), c.v.begin() + t[1].as_int() * n);
  }
  node.profiler().end(labels::kTotalRuntime);

  const Matrix reference = matmul_reference(a, b);
  std::size_t diffs = 0;
  for (std::size_t i = 0; i < c.v.size(); ++i) {
    if (std::bit_cast<std::uint64_t>(c.v[i]) != std::bit_cast<std::uint64_t>(reference.v[i])) {
      ++diffs;
    }
  }
  Verdict v;
  v.correct = diffs == 0;
  v.digest = digest_doubles(c.v);
  v.detail = std::to_string(diffs) + " entries differ from the reference product";
  for (int k = 0; k < w; ++k) node.worker(k).out(Tuple{"matmul_complete"});
  return v;
}

}  // namespace

CaseResult run_master(const RoleEnv& env) {
  Node node(env);
  const int w = env.cfg.workers;

  // Synchronisation tuples go through the timed wrappers like everything
  // else, so every label shows up even in single-worker runs.
  try {
    barrier_ready(node.self(), w, node.left());
  } catch (const DeadlineExceeded&) {
    node.dump();
    throw;
  }
  node.profiler().begin(labels::kTotalRuntime);
  const auto start = Clock::now();

  Verdict v;
  switch (env.cfg.kind) {
    case CaseKind::Password: v = password_master(node); break;
    case CaseKind::Sort: v = sort_master(node); break;
    case CaseKind::Ocean: v = ocean_master(node); break;
    case CaseKind::Matmul: v = matmul_master(node); break;
  }
  CaseResult res;
  res.total_runtime = Clock::now() - start;
  res.correct = v.correct;
  res.digest = v.digest;
  res.detail = v.detail;

  const Template report{"worker_exit", TypeOf{kInt}, TypeOf{kInt}, TypeOf{kInt}, TypeOf{kInt}};
  for (int k = 0; k < w; ++k) {
    Tuple t = node.await(node.self(), report, true);
    res.searches += t[2].as_int();
    res.visited_first_round += t[3].as_int();
    res.visited_total += t[4].as_int();
  }
  // Every worker has finished its searches, so none still polls a peer.
  for (int k = 0; k < w; ++k) node.worker(k).inner().out(Tuple{"release"});
  node.dump();
  if (!env.out_dir.empty()) res.dumps.push_back(dump_path(env.out_dir, env.run_key, env.rep, 0));
  return res;
}

void run_worker(const RoleEnv& env) {
  Node node(env);
  Worker wk(node);

  node.master().out(handshake::ready());
  maybe_inject_fault(env);
  if (env.cfg.kind == CaseKind::Password) password_load(wk);
  node.master().out(handshake::loaded());
  const Tuple key = node.await(node.master(), handshake::key_template(), false);
  if (key[2].as_str() != env.run_key) {
    throw std::runtime_error("worker received run key " + key[2].as_str() + ", expected " +
                             env.run_key);
  }

  switch (env.cfg.kind) {
    case CaseKind::Password: password_work(wk); break;
    case CaseKind::Sort: sort_work(wk); break;
    case CaseKind::Ocean: ocean_work(wk); break;
    case CaseKind::Matmul: matmul_work(wk); break;
  }
  node.master().out(wk.exit_report());
  node.dump();
  // Stay reachable until the master has heard from every worker.
  try {
    env.space->in(Template{"release"}, node.left());
  } catch (const TimeoutError&) {
    throw DeadlineExceeded("master never released " + role_name(env.role));
  }
}

}  // namespace tspace::bench
