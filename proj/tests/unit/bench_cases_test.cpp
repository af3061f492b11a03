#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "tspace/bench/cluster.hpp"
#include "tspace/bench/roles.hpp"
#include "tspace/bench/workloads.hpp"
#include "tspace/errors.hpp"
#include "tspace/md5.hpp"
#include "tspace/profiled_space.hpp"
#include "tspace/profiler.hpp"

using namespace tspace;
using namespace tspace::bench;
namespace fs = std::filesystem;

namespace {

BenchConfig small(CaseKind kind, int workers, std::int64_t size) {
  BenchConfig c;
  c.kind = kind;
  c.workers = workers;
  c.size = size;
  c.seed = 7;
  c.deadline = std::chrono::seconds(60);
  return c;
}

// Little-endian bit patterns, hashed; written out independently of the
// library's digest helpers.
std::string le_digest(const std::vector<std::uint64_t>& words) {
  std::string bytes;
  for (auto w : words) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((w >> (8 * i)) & 0xFF));
  }
  return md5_hex(bytes);
}

using Range = std::pair<std::int64_t, std::int64_t>;

fs::path temp_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / ("tspace_cases_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Md5, KnownVectors) {
  const std::map<std::string, std::string> vectors{
      {"", "d41d8cd98f00b204e9800998ecf8427e"},
      {"a", "0cc175b9c0f1b6a831c399e269772661"},
      {"abc", "900150983cd24fb0d6963f7d28e17f72"},
      {"0", "cfcd208495d565ef66e7dff9f98764da"},
      {"1", "c4ca4238a0b923820dcc509a6f75849b"},
      {"9999", "fa246d0262c3925617b0c72bb20eeb1d"},
      {"message digest", "f96b697d7cb7938d525a2f31aaf161d0"},
  };
  for (const auto& [in, want] : vectors) EXPECT_EQ(md5_hex(in), want) << '"' << in << '"';
}

TEST(Workloads, PartitionRange) {
  EXPECT_EQ(partition_range(10, 3, 0), (Range{0, 4}));
  EXPECT_EQ(partition_range(10, 3, 1), (Range{4, 7}));
  EXPECT_EQ(partition_range(10, 3, 2), (Range{7, 10}));
  for (std::int64_t total : {0, 1, 7, 100, 101}) {
    for (int parts = 1; parts <= 9; ++parts) {
      std::int64_t next = 0;
      for (int k = 0; k < parts; ++k) {
        auto [b, e] = partition_range(total, parts, k);
        ASSERT_EQ(b, next);
        ASSERT_LE(e - b, total / parts + 1);
        ASSERT_GE(e - b, total / parts);
        next = e;
      }
      ASSERT_EQ(next, total);
    }
  }
}

TEST(Workloads, PasswordsAreDecimalIndices) {
  EXPECT_EQ(password_of(0), "0");
  EXPECT_EQ(password_of(9999), "9999");
  EXPECT_EQ(password_hash(9999), "fa246d0262c3925617b0c72bb20eeb1d");
  const auto draws = password_task_draws(10, 100, 3);
  ASSERT_EQ(draws.size(), 100u);
  for (auto d : draws) {
    EXPECT_GE(d, 0);
    EXPECT_LT(d, 10);
  }
  EXPECT_EQ(draws, password_task_draws(10, 100, 3));
  EXPECT_NE(draws, password_task_draws(10, 100, 4));
}

TEST(Workloads, MergeRuns) {
  const std::vector<std::int64_t> input{5, 3, 8, 1, 7, 2, 6, 4};
  std::vector<std::vector<std::int64_t>> runs;
  for (std::size_t i = 0; i < input.size(); i += 2) {
    std::vector<std::int64_t> r{input[i], input[i + 1]};
    std::sort(r.begin(), r.end());
    runs.push_back(r);
  }
  EXPECT_EQ(merge_runs(runs), (std::vector<std::int64_t>{1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_EQ(merge_runs({{}, {2}, {}, {1, 1}}), (std::vector<std::int64_t>{1, 1, 2}));
  EXPECT_TRUE(merge_runs({}).empty());
}

TEST(Workloads, SortInputIsSeeded) {
  EXPECT_EQ(sort_input(1000, 5), sort_input(1000, 5));
  EXPECT_NE(sort_input(1000, 5), sort_input(1000, 6));
  EXPECT_EQ(sort_input(1000, 5).size(), 1000u);
}

TEST(Workloads, MatmulByHand) {
  const Matrix a{2, {1, 2, 3, 4}};
  const Matrix b{2, {5, 6, 7, 8}};
  EXPECT_EQ(matmul_reference(a, b).v, (std::vector<double>{19, 22, 43, 50}));
  const Matrix id{2, {1, 0, 0, 1}};
  EXPECT_EQ(matmul_reference(id, b).v, b.v);
  EXPECT_EQ(matmul_reference(a, id).v, a.v);
}

TEST(Workloads, MatmulOwners) {
  EXPECT_EQ(a_row_owner(7, 5), 2);
  EXPECT_EQ(b_row_owner(7, 5, Distribution::Uniform), 2);
  EXPECT_EQ(b_row_owner(7, 5, Distribution::BOnOne), 0);
}

TEST(Workloads, OceanOneStepByHand) {
  const Grid g0 = ocean_initial(4);
  for (int c = 0; c < 4; ++c) EXPECT_EQ(g0.at(0, c), 1.0);
  EXPECT_EQ(g0.at(1, 1), 0.0);
  const Grid g1 = ocean_reference(4, 1);
  EXPECT_EQ(g1.at(1, 1), 0.25);
  EXPECT_EQ(g1.at(1, 2), 0.25);
  EXPECT_EQ(g1.at(2, 1), 0.0);
  EXPECT_EQ(g1.at(2, 2), 0.0);
  EXPECT_EQ(g1.at(0, 0), 1.0);
  const Grid g2 = ocean_reference(4, 2);
  // (1,1): up 1, down 0, left 0 (ring), right 0.25.
  EXPECT_EQ(g2.at(1, 1), 0.3125);
  EXPECT_EQ(g2.at(2, 1), 0.0625);
  EXPECT_EQ(panel_columns(10, 3, 0), std::make_pair(0, 4));
  EXPECT_EQ(panel_columns(10, 3, 2), std::make_pair(7, 3));
}

TEST(Workloads, DigestsHashLittleEndianWords) {
  const std::vector<std::int64_t> ints{1, -1, 1234567890123};
  std::vector<std::uint64_t> words;
  for (auto x : ints) words.push_back(static_cast<std::uint64_t>(x));
  EXPECT_EQ(digest_ints(ints), le_digest(words));
  const std::vector<double> ds{0.5, -0.0};
  EXPECT_EQ(digest_doubles(ds),
            le_digest({std::bit_cast<std::uint64_t>(0.5), std::bit_cast<std::uint64_t>(-0.0)}));
  EXPECT_EQ(digest_ints({}), "d41d8cd98f00b204e9800998ecf8427e");
}

TEST(Config, ValidateRejectsBadParameters) {
  EXPECT_NO_THROW(validate(small(CaseKind::Ocean, 2, 3)));
  EXPECT_THROW(validate(small(CaseKind::Ocean, 1, 64)), std::invalid_argument);
  EXPECT_THROW(validate(small(CaseKind::Ocean, 4, 2)), std::invalid_argument);
  EXPECT_THROW(validate(small(CaseKind::Ocean, 5, 4)), std::invalid_argument);
  EXPECT_THROW(validate(small(CaseKind::Matmul, 6, 5)), std::invalid_argument);
  EXPECT_THROW(validate(small(CaseKind::Matmul, 1, 4096)), std::invalid_argument);
  EXPECT_THROW(validate(small(CaseKind::Password, 0, 10)), std::invalid_argument);
  auto c = small(CaseKind::Sort, 2, 10);
  c.sort_threshold = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = small(CaseKind::Sort, 2, 10);
  c.reps = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  EXPECT_EQ(parse_case("matmul"), CaseKind::Matmul);
  EXPECT_EQ(parse_distribution("b_on_one"), Distribution::BOnOne);
  EXPECT_FALSE(parse_case("fft"));
  EXPECT_EQ(rep_seed(10, 3), 13u);
}

TEST(Handshake, BarrierNeedsEveryWorker) {
  LocalSpace s;
  s.out(handshake::ready());
  s.out(handshake::loaded());
  EXPECT_NO_THROW(barrier_ready(s, 1, Timeout::after(std::chrono::milliseconds(100))));
  EXPECT_EQ(s.size(), 0u);

  for (int i = 0; i < 3; ++i) s.out(handshake::ready());
  for (int i = 0; i < 2; ++i) s.out(handshake::loaded());
  EXPECT_THROW(barrier_ready(s, 3, Timeout::after(std::chrono::milliseconds(100))),
               DeadlineExceeded);
}

TEST(Handshake, LoadedMustFollowReady) {
  // A LOADED alone does not satisfy the barrier for that worker.
  LocalSpace s;
  s.out(handshake::loaded());
  EXPECT_THROW(barrier_ready(s, 1, Timeout::after(std::chrono::milliseconds(50))),
               DeadlineExceeded);
  EXPECT_EQ(role_name(0), "master");
  EXPECT_EQ(role_name(3), "worker2");
  EXPECT_EQ(dump_path("d", "k", 2, 1), fs::path("d") / "k_rep2_worker0.csv");
}

TEST(Cases, PasswordSingleWorkerVisitsOnlyItself) {
  auto cfg = small(CaseKind::Password, 1, 10);
  cfg.password_tasks = 20;
  const auto r = run_password(cfg);
  ASSERT_TRUE(r.correct) << r.detail;
  EXPECT_EQ(r.searches, 20);
  EXPECT_EQ(r.visited_first_round, 20);
  EXPECT_EQ(r.visited_total, 20);

  std::vector<std::string> lines;
  for (auto i : password_task_draws(10, 20, cfg.seed)) lines.push_back(md5_hex(std::to_string(i)) + "," + std::to_string(i) + "\n");
  std::sort(lines.begin(), lines.end());
  std::string joined;
  for (const auto& l : lines) joined += l;
  EXPECT_EQ(r.digest, md5_hex(joined));
}

TEST(Cases, PasswordFourWorkersWithDumps) {
  const auto dir = temp_dir("pw");
  auto cfg = small(CaseKind::Password, 4, 10000);
  RepOptions o;
  o.out_dir = dir;
  o.run_key = "pw";
  const auto r = run_password(cfg, o);
  ASSERT_TRUE(r.correct) << r.detail;
  EXPECT_EQ(r.searches, cfg.password_tasks);
  EXPECT_GE(r.visited_first_round, r.searches);
  EXPECT_LE(r.visited_first_round, r.searches * 4);
  ASSERT_EQ(r.dumps.size(), 5u);

  std::set<std::string> seen;
  std::int64_t node_visits = 0;
  for (const auto& f : r.dumps) {
    for (const auto& rec : prof::read_dump(f)) {
      seen.insert(rec.label);
      if (rec.label == labels::kNodeVisited) node_visits += rec.value;
    }
  }
  for (const char* l : {labels::kWriteLocal, labels::kReadLocal, labels::kWriteRemote,
                        labels::kReadRemote, labels::kSearch, labels::kTotalRuntime,
                        labels::kNodeVisited}) {
    EXPECT_TRUE(seen.count(l)) << l;
  }
  EXPECT_EQ(node_visits, r.visited_first_round);
  fs::remove_all(dir);
}

TEST(Cases, SortSmallRuns) {
  auto cfg = small(CaseKind::Sort, 2, 8);
  cfg.sort_threshold = 2;
  const auto r = run_sort(cfg);
  ASSERT_TRUE(r.correct) << r.detail;
  auto want = sort_input(8, cfg.seed);
  std::sort(want.begin(), want.end());
  EXPECT_EQ(r.digest, digest_ints(want));
}

TEST(Cases, SortFourWorkers) {
  auto cfg = small(CaseKind::Sort, 4, 20000);
  cfg.sort_threshold = 1000;
  const auto r = run_sort(cfg);
  ASSERT_TRUE(r.correct) << r.detail;
  EXPECT_GT(r.searches, 0);
}

TEST(Cases, OceanMatchesReferenceBitForBit) {
  auto cfg = small(CaseKind::Ocean, 2, 4);
  cfg.ocean_iters = 1;
  auto r = run_ocean(cfg);
  ASSERT_TRUE(r.correct) << r.detail;
  EXPECT_EQ(r.digest, digest_doubles(ocean_reference(4, 1).cells));

  cfg = small(CaseKind::Ocean, 3, 16);
  cfg.ocean_iters = 5;
  r = run_ocean(cfg);
  ASSERT_TRUE(r.correct) << r.detail;
  EXPECT_EQ(r.digest, digest_doubles(ocean_reference(16, 5).cells));
}

TEST(Cases, MatmulBothDistributions) {
  for (auto d : {Distribution::Uniform, Distribution::BOnOne}) {
    auto cfg = small(CaseKind::Matmul, 3, 12);
    cfg.strategy = Strategy::SuccessFactor;
    const auto r = run_matmul(cfg, d);
    ASSERT_TRUE(r.correct) << r.detail;
    const auto [a, b] = matmul_inputs(12, cfg.seed);
    EXPECT_EQ(r.digest, digest_doubles(matmul_reference(a, b).v));
    EXPECT_EQ(r.searches, 12 * 12);
  }
}

TEST(Cases, NotifyStrategyRuns) {
  auto cfg = small(CaseKind::Matmul, 2, 6);
  cfg.strategy = Strategy::Notify;
  EXPECT_TRUE(run_matmul(cfg, Distribution::Uniform).correct);
  auto s = small(CaseKind::Sort, 3, 3000);
  s.sort_threshold = 500;
  s.strategy = Strategy::Notify;
  EXPECT_TRUE(run_sort(s).correct);
}

TEST(Cases, SameSeedSameResult) {
  auto cfg = small(CaseKind::Matmul, 3, 9);
  cfg.strategy = Strategy::Sequential;
  const auto a = run_matmul(cfg, Distribution::BOnOne);
  const auto b = run_matmul(cfg, Distribution::BOnOne);
  EXPECT_EQ(a.digest, b.digest);
  cfg.seed = 8;
  EXPECT_NE(run_matmul(cfg, Distribution::BOnOne).digest, a.digest);
}

TEST(Cases, WrongKindIsRejected) {
  EXPECT_THROW(run_sort(small(CaseKind::Password, 1, 10)), std::invalid_argument);
  EXPECT_THROW(run_threads(small(CaseKind::Ocean, 1, 10)), std::invalid_argument);
}

TEST(Cases, FaultedWorkerStopsTheRepetition) {
  ::setenv(kFaultEnv, "1", 1);
  const auto r = run_ocean(small(CaseKind::Ocean, 3, 16));
  ::unsetenv(kFaultEnv);
  EXPECT_FALSE(r.correct);
  EXPECT_EQ(r.fault, CaseResult::Fault::Infrastructure);
  EXPECT_NE(r.detail.find("injected"), std::string::npos) << r.detail;
}
