// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

#include "generators.hpp"
#include "script_oracle.hpp"
#include "tspace/bench/cluster.hpp"
#include "tspace/codec.hpp"
#include "tspace/local_space.hpp"
#include "tspace/net.hpp"
#include "tspace/profiled_space.hpp"
#include "tspace/profiler.hpp"

using namespace tspace;
using namespace tspace::bench;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = true;
  std::vector<std::string> notes;

  void fail(const std::string& why) {
    pass = false;
    notes.push_back(why);
  }
  void note(const std::string& what) { notes.push_back(what); }
};

int failures = 0;

void report(int id, const std::string& title, const Verdict& v) {
  std::cout << (v.pass ? "PASS" : "FAIL") << " criterion " << id << ": " << title;
  for (const auto& n : v.notes) std::cout << "\n    " << n;
  std::cout << std::endl;
  if (!v.pass) ++failures;
}

BenchConfig config(CaseKind kind, int workers, std::int64_t size, Strategy s = Strategy::Sequential) {
  BenchConfig c;
  c.kind = kind;
  c.workers = workers;
  c.size = size;
  c.strategy = s;
  c.seed = 1;
  c.deadline = std::chrono::seconds(60);
  return c;
}

std::string fmt(double x, int prec = 3) {
  std::ostringstream os;
  os.precision(prec);
  os << std::fixed << x;
  return os.str();
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("tspace_accept_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

// ---------------------------------------------------------------------------

Verdict correctness() {
  struct Run {
    std::string name;
    BenchConfig cfg;
  };
  std::vector<Run> runs;
  for (int w : {1, 4}) runs.push_back({"password N=10000 w=" + std::to_string(w), config(CaseKind::Password, w, 10000)});
  for (int w : {1, 4}) {
    auto c = config(CaseKind::Sort, w, 100000);
    c.sort_threshold = 10000;
    runs.push_back({"sort N=100000 T=10000 w=" + std::to_string(w), c});
  }
  for (int w : {2, 4}) {
    auto c = config(CaseKind::Ocean, w, 64);
    c.ocean_iters = 20;
    runs.push_back({"ocean n=64 w=" + std::to_string(w), c});
  }
  for (int w : {1, 5}) {
    for (auto d : {Distribution::Uniform, Distribution::BOnOne}) {
      auto c = config(CaseKind::Matmul, w, 50);
      c.distribution = d;
      runs.push_back({"matmul n=50 w=" + std::to_string(w) + " " + std::string(distribution_name(d)), c});
    }
  }

  Verdict v;
  for (const auto& run : runs) {
    int ok = 0;
    double worst = 0;
    for (int rep = 0; rep < 10; ++rep) {
      BenchConfig c = run.cfg;
      c.seed = rep_seed(run.cfg.seed, rep);
      const auto start = Clock::now();
      const CaseResult r = run_threads(c);
      const double secs = std::chrono::duration<double>(Clock::now() - start).count();
      worst = std::max(worst, secs);
      if (!r.correct) v.fail(run.name + " rep " + std::to_string(rep) + ": " + r.detail);
      if (secs >= 60.0) v.fail(run.name + " rep " + std::to_string(rep) + " took " + fmt(secs) + " s");
      ok += r.correct ? 1 : 0;
    }
    v.note(run.name + ": " + std::to_string(ok) + "/10 correct, slowest rep " + fmt(worst) + " s");
  }
  return v;
}

Verdict store_semantics() {
  Verdict v;
  tspace::testing::Gen g(20240601);

  // Index vs flat-scan oracle; the oracle is insertion-ordered, so FIFO and
  // multiset conservation are checked on every step.
  constexpr int kScripts = 100000;
  constexpr int kSteps = 20;
  std::size_t violations = 0;
  for (int s = 0; s < kScripts; ++s) {
    LocalSpace space;
    tspace::testing::FlatStore model;
    for (int i = 0; i < kSteps; ++i) {
      if (auto diff = tspace::testing::apply_random_op(g, space, model)) {
        if (violations++ < 3) v.fail("script " + std::to_string(s) + ": " + *diff);
      }
    }
    if (space.size() != model.items.size()) {
      if (violations++ < 3) v.fail("script " + std::to_string(s) + ": size mismatch");
    }
  }
  v.note(std::to_string(kScripts) + " scripts x " + std::to_string(kSteps) + " ops, " +
         std::to_string(violations) + " violations");

  // K concurrent takers racing for fewer tuples: each tuple goes to exactly one.
  for (int k : {2, 8, 16, 32, 64}) {
    for (int round = 0; round < 20; ++round) {
      LocalSpace space;
      const int tuples = std::min(k, k / 2 + round % 3);
      for (int i = 0; i < tuples; ++i) space.out(Tuple{"job", i});
      std::atomic<bool> go{false};
      std::vector<std::optional<Tuple>> got(static_cast<std::size_t>(k));
      std::vector<std::thread> ts;
      for (int t = 0; t < k; ++t) {
        ts.emplace_back([&, t] {
          while (!go) std::this_thread::yield();
          got[static_cast<std::size_t>(t)] = space.inp(Template{"job", Any{}});
        });
      }
      go = true;
      for (auto& t : ts) t.join();
      std::set<std::int64_t> ids;
      int taken = 0;
      for (const auto& x : got) {
        if (!x) continue;
        ++taken;
        ids.insert((*x)[1].as_int());
      }
      if (taken != tuples || static_cast<int>(ids.size()) != tuples || space.size() != 0) {
        v.fail("K=" + std::to_string(k) + ": " + std::to_string(taken) + " takes of " +
               std::to_string(tuples) + " tuples, " + std::to_string(ids.size()) + " distinct");
      }
    }
  }

  // Blocked takers woken by racing writers: none may be left waiting.
  for (int k : {4, 16, 64}) {
    for (int round = 0; round < 10; ++round) {
      LocalSpace space;
      std::vector<std::future<Tuple>> takes;
      for (int t = 0; t < k; ++t) {
        takes.push_back(std::async(std::launch::async, [&] {
          return space.in(Template{"w", Any{}}, Timeout::after(std::chrono::seconds(10)));
        }));
      }
      std::thread writer([&] {
        for (int i = 0; i < k; ++i) space.out(Tuple{"w", i});
      });
      writer.join();
      std::set<std::int64_t> ids;
      try {
        for (auto& f : takes) ids.insert(f.get()[1].as_int());
      } catch (const TimeoutError&) {
        v.fail("lost wake-up with K=" + std::to_string(k));
      }
      if (static_cast<int>(ids.size()) != k) v.fail("K=" + std::to_string(k) + ": duplicate delivery");
    }
  }
  v.note("take races with K up to 64 and blocked-taker wake-ups checked");
  return v;
}

Verdict codec_and_remote() {
  Verdict v;
  tspace::testing::Gen g(777);
  constexpr int kItems = 100000;
  int bad = 0;
  for (int i = 0; i < kItems; ++i) {
    const Tuple t = g.tuple(false, 6);
    if (wire::decode_tuple(wire::encode_tuple(t)) != t && bad++ < 3) v.fail("tuple " + to_string(t));
    const Template p = g.pattern(false, 6);
    if (wire::decode_template(wire::encode_template(p)) != p && bad++ < 3) v.fail("template " + to_string(p));
  }
  v.note(std::to_string(kItems) + " tuples and " + std::to_string(kItems) + " templates round-tripped, " +
         std::to_string(bad) + " mismatches");

  int misdecoded = 0;
  std::size_t prefixes = 0;
  for (int i = 0; i < 2000; ++i) {
    const auto frame = wire::encode_frame(wire::Frame{wire::MsgType::Out, g.u64(), wire::encode_tuple(g.tuple(false, 4))});
    for (std::size_t cut = 0; cut < frame.size(); ++cut, ++prefixes) {
      try {
        wire::decode_frame(std::span<const std::uint8_t>(frame.data(), cut));
        ++misdecoded;
      } catch (const MalformedError&) {
      }
    }
    const auto body = wire::encode_tuple(g.tuple(false, 4));
    for (std::size_t cut = 0; cut < body.size(); ++cut, ++prefixes) {
      try {
        wire::decode_tuple(std::span<const std::uint8_t>(body.data(), cut));
        ++misdecoded;
      } catch (const MalformedError&) {
      }
    }
  }
  if (misdecoded) v.fail(std::to_string(misdecoded) + " truncated inputs decoded");
  v.note(std::to_string(prefixes) + " truncated prefixes, " + std::to_string(misdecoded) + " decoded");

  constexpr int kRemoteScripts = 20;
  int divergences = 0;
  for (int s = 0; s < kRemoteScripts; ++s) {
    LocalSpace served;
    auto server = Server::start(served, NodeAddress{"127.0.0.1", 0, "acceptance"});
    auto remote = RemoteSpace::connect(server->address());
    LocalSpace local;
    tspace::testing::FlatStore remote_model, local_model;
    for (int step = 0; step < 200; ++step) {
      tspace::testing::Gen twin = g;
      const auto a = tspace::testing::apply_random_op(g, *remote, remote_model);
      const auto b = tspace::testing::apply_random_op(twin, local, local_model);
      if ((a || b) && divergences++ < 3) {
        v.fail("script " + std::to_string(s) + " step " + std::to_string(step) + ": " + (a ? *a : *b));
      }
    }
    if (served.size() != local.size() && divergences++ < 3) v.fail("final sizes differ");
  }
  v.note(std::to_string(kRemoteScripts) + " 200-op scripts local vs loopback remote, " +
         std::to_string(divergences) + " divergences");
  return v;
}

// Mean of the nodeVisited counter over all dumps of `reps` repetitions.
double mean_node_visited(BenchConfig cfg, int reps, const std::string& tag, Verdict& v) {
  const auto dir = scratch(tag);
  std::vector<fs::path> dumps;
  for (int rep = 0; rep < reps; ++rep) {
    BenchConfig c = cfg;
    c.seed = rep_seed(cfg.seed, rep);
    RepOptions o;
    o.rep = rep;
    o.run_key = tag;
    o.out_dir = dir;
    const auto r = run_threads(c, o);
    if (!r.correct) v.fail(tag + " rep " + std::to_string(rep) + " incorrect: " + r.detail);
    dumps.insert(dumps.end(), r.dumps.begin(), r.dumps.end());
  }
  const auto stats = prof::aggregate(dumps);
  fs::remove_all(dir);
  const auto it = stats.find(labels::kNodeVisited);
  if (it == stats.end()) {
    v.fail(tag + ": no nodeVisited records");
    return 0;
  }
  return it->second.mean;
}

Verdict ocean_visits() {
  Verdict v;
  auto seq = config(CaseKind::Ocean, 10, 64, Strategy::Sequential);
  auto sf = config(CaseKind::Ocean, 10, 64, Strategy::SuccessFactor);
  const double a = mean_node_visited(seq, 10, "ocean_seq", v);
  const double b = mean_node_visited(sf, 10, "ocean_sf", v);
  const double reduction = a > 0 ? 1.0 - b / a : 0.0;
  v.note("mean nodeVisited sequential " + fmt(a) + ", success_factor " + fmt(b) + ", reduction " +
         fmt(100 * reduction, 1) + "% (need >= 10%)");
  if (!(reduction >= 0.10)) v.fail("success_factor does not visit >= 10% fewer nodes");
  return v;
}

Verdict matmul_distribution() {
  Verdict v;
  auto uniform = config(CaseKind::Matmul, 5, 50, Strategy::SuccessFactor);
  uniform.distribution = Distribution::Uniform;
  auto one = uniform;
  one.distribution = Distribution::BOnOne;
  auto seq = uniform;
  seq.strategy = Strategy::Sequential;
  const double u = mean_node_visited(uniform, 10, "mm_uniform", v);
  const double o = mean_node_visited(one, 10, "mm_bonone", v);
  const double s = mean_node_visited(seq, 10, "mm_seq", v);
  const double reduction = u > 0 ? 1.0 - o / u : 0.0;
  v.note("success_factor mean first-round visits: uniform " + fmt(u) + ", b_on_one " + fmt(o) +
         ", reduction " + fmt(100 * reduction, 1) + "% (need >= 20%)");
  v.note("recorded: uniform success_factor " + fmt(u) + " vs sequential " + fmt(s) +
         (u >= s ? " (success_factor not better)" : " (success_factor better)"));
  if (!(reduction >= 0.20)) v.fail("b_on_one does not lower visits by >= 20%");
  return v;
}

Verdict profiler_math() {
  Verdict v;
  const auto dir = scratch("stats");
  std::mt19937_64 rng(4711);
  int worst_case = -1;
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    std::size_t n;
    bool constant = false;
    if (i % 10 == 0) {
      n = 1;
    } else if (i % 10 == 1) {
      n = 2 + rng() % 50;
      constant = true;
    } else {
      n = 2 + rng() % 200;
    }
    const std::int64_t base = static_cast<std::int64_t>(rng() % 10000000);
    std::vector<std::int64_t> values(n);
    for (auto& x : values) x = constant ? base : static_cast<std::int64_t>(rng() % 1000000000);

    // Split across two dump files so aggregation spans files.
    std::vector<prof::MetricRecord> first, second;
    for (std::size_t j = 0; j < n; ++j) {
      auto& dst = j % 2 ? second : first;
      dst.push_back(prof::MetricRecord{"m", prof::Kind::Interval, values[j], "p", "t", j + 1});
    }
    const fs::path fa = dir / "a.csv", fb = dir / "b.csv";
    {
      std::ofstream a(fa), b(fb);
      prof::write_records(a, first);
      prof::write_records(b, second);
    }
    const std::vector<fs::path> files{fa, fb};
    const auto got = prof::aggregate(files).at("m");

    long double sum = 0;
    for (auto x : values) sum += static_cast<long double>(x);
    const long double mean = sum / static_cast<long double>(n);
    long double sq = 0;
    for (auto x : values) sq += (x - mean) * (x - mean);
    const double sd = n > 1 ? static_cast<double>(std::sqrt(sq / static_cast<long double>(n - 1))) : 0.0;

    auto rel = [](double a, double b) {
      const double scale = std::max(std::abs(a), std::abs(b));
      return scale == 0 ? 0.0 : std::abs(a - b) / scale;
    };
    const double err = std::max(rel(got.mean, static_cast<double>(mean)), rel(got.stddev, sd));
    if (err > worst) {
      worst = err;
      worst_case = i;
    }
    if (got.n != n || err > 1e-9) v.fail("series " + std::to_string(i) + " relative error " + std::to_string(err));
    if ((n == 1 || constant) && got.stddev != 0.0) v.fail("series " + std::to_string(i) + " stddev not 0");
  }
  fs::remove_all(dir);
  v.note("1000 series (n=1 and constant included), worst relative error " + std::to_string(worst) +
         (worst_case >= 0 ? " at series " + std::to_string(worst_case) : ""));
  return v;
}

Verdict reproducibility() {
  Verdict v;
  std::vector<std::pair<std::string, BenchConfig>> runs;
  runs.emplace_back("password w=1", config(CaseKind::Password, 1, 10000, Strategy::SuccessFactor));
  runs.emplace_back("password w=4", config(CaseKind::Password, 4, 10000, Strategy::SuccessFactor));
  auto sort_cfg = config(CaseKind::Sort, 4, 100000, Strategy::SuccessFactor);
  sort_cfg.sort_threshold = 10000;
  runs.emplace_back("sort w=4", sort_cfg);
  runs.emplace_back("ocean w=4", config(CaseKind::Ocean, 4, 64, Strategy::SuccessFactor));
  for (auto s : {Strategy::Sequential, Strategy::SuccessFactor}) {
    for (auto d : {Distribution::Uniform, Distribution::BOnOne}) {
      auto c = config(CaseKind::Matmul, 5, 50, s);
      c.distribution = d;
      runs.emplace_back("matmul w=5 " + std::string(strategy_name(s)) + " " +
                            std::string(distribution_name(d)),
                        c);
    }
  }

  for (auto& [name, cfg] : runs) {
    cfg.seed = 42;
    const auto a = run_threads(cfg);
    const auto b = run_threads(cfg);
    if (!a.correct || !b.correct) v.fail(name + " incorrect");
    if (a.digest != b.digest) v.fail(name + " digests differ");
    if (a.visited_first_round != b.visited_first_round) {
      v.fail(name + " first-round totals differ: " + std::to_string(a.visited_first_round) +
             " vs " + std::to_string(b.visited_first_round));
    } else {
      v.note(name + ": digest and first-round total " + std::to_string(a.visited_first_round) +
             " identical");
    }
  }
  return v;
}

}  // namespace

int main() {
  std::cout << std::unitbuf;
  report(1, "correctness oracles at desk scale", correctness());
  report(2, "store semantics", store_semantics());
  report(3, "codec and remote equivalence", codec_and_remote());
  report(4, "ocean n=64 w=10: success_factor visits fewer nodes", ocean_visits());
  report(5, "matmul n=50 w=5: b_on_one lowers visits", matmul_distribution());
  report(6, "profiler statistics", profiler_math());
  report(7, "reproducibility in threads mode", reproducibility());
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << std::endl;
  return failures == 0 ? 0 : 1;
}
