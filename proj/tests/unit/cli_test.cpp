#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "tspace/bench/roles.hpp"
#include "tspace/profiler.hpp"

namespace fs = std::filesystem;
using namespace tsbench;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  Context ctx{out, err, fs::path(TSBENCH_EXE)};
  const int code = run_cli(args, ctx);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("tsbench_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) +
           "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
  }
  void TearDown() override { fs::remove_all(dir); }

  fs::path only_manifest(const fs::path& d) const {
    fs::path found;
    for (const auto& e : fs::directory_iterator(d)) {
      if (e.path().filename().string().starts_with("manifest_")) found = e.path();
    }
    return found;
  }

  fs::path dir;
};

}  // namespace

TEST_F(CliTest, UsageErrorsExitTwo) {
  EXPECT_EQ(cli({}).code, kUsage);
  EXPECT_EQ(cli({"run"}).code, kUsage);  // --case is required
  EXPECT_EQ(cli({"run", "--case", "fft"}).code, kUsage);
  auto r = cli({"run", "--case", "ocean", "--workers", "1", "--out", dir.string()});
  EXPECT_EQ(r.code, kUsage);
  EXPECT_NE(r.err.find("worker"), std::string::npos) << r.err;
  EXPECT_EQ(cli({"run", "--case", "sort", "--strategy", "psychic"}).code, kUsage);
  EXPECT_EQ(cli({"--help"}).code, kOk);
}

TEST_F(CliTest, RunWritesManifestAndStats) {
  const auto out = dir / "o";
  auto r = cli({"run", "--case", "matmul", "--workers", "2", "--size", "6", "--reps", "2",
                "--seed", "11", "--strategy", "success_factor", "--distribution", "b_on_one",
                "--out", out.string()});
  ASSERT_EQ(r.code, kOk) << r.out << r.err;
  EXPECT_NE(r.out.find("rep 0 seed 11: correct"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("rep 1 seed 12: correct"), std::string::npos) << r.out;

  const auto m = read_key_values(only_manifest(out));
  EXPECT_EQ(m.at("case"), "matmul");
  EXPECT_EQ(m.at("group"), "matmul_w2_n6_success_factor_b_on_one");
  EXPECT_EQ(m.at("reps"), "2");
  EXPECT_EQ(m.at("rep.1.seed"), "12");
  EXPECT_EQ(m.at("rep.0.correct"), "1");
  EXPECT_EQ(m.at("rep.0.fault"), "none");
  EXPECT_EQ(m.at("rep.0.searches"), "36");
  EXPECT_EQ(m.at("rep.0.digest").size(), 32u);
  ASSERT_TRUE(m.count("aggregate"));

  std::vector<fs::path> dumps;
  for (int rep = 0; rep < 2; ++rep) {
    std::stringstream ss(m.at("rep." + std::to_string(rep) + ".dumps"));
    std::string name;
    while (std::getline(ss, name, ';')) dumps.push_back(out / name);
  }
  EXPECT_EQ(dumps.size(), 6u);
  const auto want = tspace::prof::aggregate(dumps);
  const auto got = tspace::prof::read_stats(out / m.at("aggregate"));
  ASSERT_EQ(got.size(), want.size());
  for (const auto& [label, s] : want) {
    EXPECT_EQ(got.at(label).n, s.n) << label;
    EXPECT_DOUBLE_EQ(got.at(label).mean, s.mean) << label;
    EXPECT_DOUBLE_EQ(got.at(label).stddev, s.stddev) << label;
  }
}

TEST_F(CliTest, AggregateAndCompare) {
  const auto out = dir / "o";
  ASSERT_EQ(cli({"run", "--case", "ocean", "--workers", "2", "--size", "8", "--reps", "2",
                 "--out", out.string()}).code,
            kOk);
  auto r = cli({"aggregate", out.string()});
  ASSERT_EQ(r.code, kOk) << r.err;
  const auto stats = tspace::prof::read_stats(out / "stats.csv");
  EXPECT_EQ(stats.at("Master::TotalRuntime").n, 2u);

  r = cli({"compare", out.string(), out.string(), "--metric", "Master::TotalRuntime"});
  ASSERT_EQ(r.code, kOk) << r.err;
  EXPECT_NE(r.out.find("ratio A/B 1\n"), std::string::npos) << r.out;

  EXPECT_EQ(cli({"compare", out.string(), out.string(), "--metric", "no::such"}).code, kIncorrect);
  fs::create_directories(dir / "empty");
  r = cli({"aggregate", (dir / "empty").string()});
  EXPECT_EQ(r.code, kIncorrect);
  EXPECT_NE(r.err.find("no dumps found"), std::string::npos);
}

TEST_F(CliTest, AggregateWithoutManifestAndBadDump) {
  {
    std::ofstream(dir / "a.csv") << tspace::prof::kDumpHeader << "\nm,interval,4,p,t,1\n";
    std::ofstream(dir / "b.csv") << tspace::prof::kDumpHeader << "\nm,interval,6,p,t,1\n";
    std::ofstream(dir / "notes.csv") << "something,else\n";
  }
  ASSERT_EQ(cli({"aggregate", dir.string()}).code, kOk);
  const auto s = tspace::prof::read_stats(dir / "stats.csv");
  EXPECT_EQ(s.at("m").n, 2u);
  EXPECT_EQ(s.at("m").mean, 5.0);

  std::ofstream(dir / "c.csv") << tspace::prof::kDumpHeader << "\nm,interval,x,p,t,1\n";
  EXPECT_EQ(cli({"aggregate", dir.string()}).code, kIncorrect);
}

TEST_F(CliTest, ProcsModeAgreesWithThreads) {
  const std::vector<std::string> common{"--case", "sort", "--workers", "2", "--size", "3000",
                                        "--threshold", "500", "--seed", "5"};
  auto args = common;
  args.insert(args.begin(), "run");
  auto threads = args;
  threads.insert(threads.end(), {"--out", (dir / "t").string()});
  auto procs = args;
  procs.insert(procs.end(), {"--out", (dir / "p").string(), "--mode", "procs"});
  auto a = cli(threads);
  auto b = cli(procs);
  ASSERT_EQ(a.code, kOk) << a.err;
  ASSERT_EQ(b.code, kOk) << b.out << b.err;
  const auto ma = read_key_values(only_manifest(dir / "t"));
  const auto mb = read_key_values(only_manifest(dir / "p"));
  EXPECT_EQ(ma.at("rep.0.digest"), mb.at("rep.0.digest"));
  EXPECT_EQ(mb.at("mode"), "procs");
}

TEST_F(CliTest, KilledWorkerIsAnInfrastructureFailure) {
  ::setenv(tspace::bench::kFaultEnv, "0", 1);
  auto r = cli({"run", "--case", "ocean", "--workers", "2", "--size", "8", "--mode", "procs",
                "--deadline-s", "20", "--out", (dir / "p").string()});
  auto t = cli({"run", "--case", "ocean", "--workers", "2", "--size", "8", "--out",
                (dir / "t").string()});
  ::unsetenv(tspace::bench::kFaultEnv);
  EXPECT_EQ(r.code, kInfrastructure) << r.out << r.err;
  EXPECT_NE(r.out.find("FAILED"), std::string::npos);
  EXPECT_EQ(t.code, kInfrastructure) << t.out << t.err;
  EXPECT_EQ(read_key_values(only_manifest(dir / "t")).at("rep.0.fault"), "infrastructure");
}

TEST_F(CliTest, HostFileRoundTrip) {
  const std::vector<tspace::NodeAddress> nodes{{"127.0.0.1", 7000, "master"},
                                               {"10.0.0.5", 7001, "worker0"}};
  write_host_file(dir / "hosts.txt", nodes);
  EXPECT_EQ(read_host_file(dir / "hosts.txt"), nodes);
  std::ofstream(dir / "bad.txt") << "# comment\n\nmaster nohostport\n";
  EXPECT_THROW(read_host_file(dir / "bad.txt"), std::invalid_argument);
}

TEST_F(CliTest, BusyBasePortIsReported) {
  tspace::LocalSpace s;
  auto srv = tspace::Server::start(s, tspace::NodeAddress{"127.0.0.1", 0, "squat"});
  const auto port = std::to_string(srv->address().port);
  auto r = cli({"run", "--case", "ocean", "--workers", "2", "--size", "8", "--base-port", port,
                "--out", (dir / "o").string()});
  EXPECT_EQ(r.code, kInfrastructure) << r.out << r.err;
}
