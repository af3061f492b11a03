#include "tspace/profiler.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace tspace::prof {

std::string_view kind_name(Kind k) { return k == Kind::Interval ? "interval" : "counter"; }

struct Profiler::ThreadBuffer {
  std::mutex mu;
  std::string name;
  std::uint64_t seq = 0;
  std::vector<MetricRecord> records;
  std::unordered_map<std::string, std::vector<std::chrono::steady_clock::time_point>> open;
  std::map<std::string, std::int64_t> counters;

  void push(std::string_view label, Kind kind, std::int64_t value, const std::string& process) {
    records.push_back(MetricRecord{std::string(label), kind, value, process, name, ++seq});
  }
};

namespace {

std::atomic<std::uint64_t> g_next_profiler_id{1};

}  // namespace

Profiler::Profiler(std::string process)
    : id_(g_next_profiler_id.fetch_add(1)), process_(std::move(process)) {}

Profiler::~Profiler() = default;

Profiler::ThreadBuffer& Profiler::local() {
  // Profiler ids are never reused, so stale entries are never looked up.
  thread_local std::unordered_map<std::uint64_t, ThreadBuffer*> cache;
  if (auto it = cache.find(id_); it != cache.end()) return *it->second;
  std::lock_guard lk(mu_);
  auto buf = std::make_unique<ThreadBuffer>();
  buf->name = "t" + std::to_string(threads_.size());
  ThreadBuffer* raw = buf.get();
  threads_.push_back(std::move(buf));
  cache.emplace(id_, raw);
  return *raw;
}

void Profiler::set_thread_name(std::string name) {
  auto& b = local();
  std::lock_guard lk(b.mu);
  b.name = std::move(name);
}

void Profiler::begin(std::string_view label) {
  auto& b = local();
  const auto now = std::chrono::steady_clock::now();
  std::lock_guard lk(b.mu);
  b.open[std::string(label)].push_back(now);
}

void Profiler::end(std::string_view label) {
  const auto now = std::chrono::steady_clock::now();
  auto& b = local();
  std::unique_lock lk(b.mu);
  auto it = b.open.find(std::string(label));
  if (it == b.open.end() || it->second.empty()) {
    const std::string thread = b.name;
    lk.unlock();
    std::lock_guard glk(mu_);
    diagnostics_.push_back("UnmatchedEnd: end(\"" + std::string(label) +
                           "\") without begin on thread " + thread);
    return;
  }
  const auto started = it->second.back();
  it->second.pop_back();
  const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(now - started).count();
  b.push(label, Kind::Interval, std::max<std::int64_t>(ns, 0), process_);
}

void Profiler::inc_counter(std::string_view label) {
  auto& b = local();
  std::lock_guard lk(b.mu);
  ++b.counters[std::string(label)];
}

void Profiler::record_counter(std::string_view label, std::int64_t value) {
  auto& b = local();
  std::lock_guard lk(b.mu);
  b.push(label, Kind::Counter, value, process_);
}

void Profiler::record_interval(std::string_view label, std::chrono::nanoseconds elapsed) {
  auto& b = local();
  std::lock_guard lk(b.mu);
  b.push(label, Kind::Interval, std::max<std::int64_t>(elapsed.count(), 0), process_);
}

std::vector<MetricRecord> Profiler::drain() {
  std::vector<MetricRecord> out;
  std::lock_guard lk(mu_);
  for (auto& b : threads_) {
    std::lock_guard blk(b->mu);
    for (const auto& [label, value] : b->counters) {
      b->push(label, Kind::Counter, value, process_);
    }
    b->counters.clear();
    std::move(b->records.begin(), b->records.end(), std::back_inserter(out));
    b->records.clear();
  }
  return out;
}

void Profiler::dump(const std::filesystem::path& sink) {
  auto records = drain();
  std::ofstream os(sink, std::ios::binary | std::ios::trunc);
  if (!os) throw IoFailure("cannot open " + sink.string() + " for writing");
  write_records(os, records);
  os.flush();
  if (!os) throw IoFailure("write failed: " + sink.string());
}

std::vector<std::string> Profiler::diagnostics() const {
  std::lock_guard lk(mu_);
  return diagnostics_;
}

// --- CSV -------------------------------------------------------------------

namespace {

void write_field(std::ostream& os, std::string_view f) {
  if (f.find_first_of(",\"\n\r") == std::string_view::npos) {
    os << f;
    return;
  }
  os << '"';
  for (char c : f) {
    if (c == '"') os << '"';
    os << c;
  }
  os << '"';
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

// Splits one CSV line; supports double-quoted fields.
std::vector<std::string> split_csv(const std::string& line, bool& ok) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  ok = true;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) ok = false;
  out.push_back(std::move(cur));
  return out;
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

}  // namespace

void write_records(std::ostream& os, std::span<const MetricRecord> records) {
  os << kDumpHeader << '\n';
  for (const auto& r : records) {
    write_field(os, r.label);
    os << ',' << kind_name(r.kind) << ',' << r.value << ',';
    write_field(os, r.process);
    os << ',';
    write_field(os, r.thread);
    os << ',' << r.seq << '\n';
  }
}

std::vector<MetricRecord> parse_records(std::istream& is, const std::string& source) {
  std::vector<MetricRecord> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != kDumpHeader) throw ParseError(source, lineno, "missing dump header");
      header_seen = true;
      continue;
    }
    bool ok = true;
    auto fields = split_csv(line, ok);
    if (!ok || fields.size() != 6) throw ParseError(source, lineno, "expected 6 fields");
    MetricRecord r;
    r.label = fields[0];
    if (fields[1] == "interval") {
      r.kind = Kind::Interval;
    } else if (fields[1] == "counter") {
      r.kind = Kind::Counter;
    } else {
      throw ParseError(source, lineno, "unknown kind '" + fields[1] + "'");
    }
    if (!parse_number(fields[2], r.value)) throw ParseError(source, lineno, "bad value");
    if (r.kind == Kind::Interval && r.value < 0) {
      throw ParseError(source, lineno, "negative interval");
    }
    r.process = fields[3];
    r.thread = fields[4];
    if (!parse_number(fields[5], r.seq)) throw ParseError(source, lineno, "bad seq");
    out.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError(source, lineno, "empty dump (no header)");
  return out;
}

std::vector<MetricRecord> read_dump(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoFailure("cannot open " + file.string());
  return parse_records(is, file.string());
}

MetricStats compute_stats(std::string label, std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("statistics of an empty series");
  MetricStats s;
  s.label = std::move(label);
  s.n = values.size();
  long double sum = 0;
  for (double v : values) sum += v;
  const long double mean = sum / static_cast<long double>(s.n);
  s.mean = static_cast<double>(mean);
  if (s.n > 1) {
    long double sq = 0;
    for (double v : values) sq += (v - mean) * (v - mean);
    s.stddev = static_cast<double>(std::sqrt(sq / static_cast<long double>(s.n - 1)));
  }
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  s.min = *lo;
  s.max = *hi;
  // rounding can push the mean just outside [min, max] for constant series
  s.mean = std::clamp(s.mean, s.min, s.max);
  return s;
}

std::map<std::string, MetricStats> aggregate_records(std::span<const MetricRecord> records) {
  std::map<std::string, std::vector<double>> series;
  for (const auto& r : records) series[r.label].push_back(static_cast<double>(r.value));
  std::map<std::string, MetricStats> out;
  for (auto& [label, values] : series) out.emplace(label, compute_stats(label, values));
  return out;
}

std::map<std::string, MetricStats> aggregate(std::span<const std::filesystem::path> files) {
  std::vector<MetricRecord> all;
  for (const auto& f : files) {
    auto recs = read_dump(f);
    std::move(recs.begin(), recs.end(), std::back_inserter(all));
  }
  return aggregate_records(all);
}

void write_stats(std::ostream& os, const std::map<std::string, MetricStats>& stats) {
  os << "# stddev is the sample standard deviation (n-1 denominator)\n";
  os << kStatsHeader << '\n';
  for (const auto& [label, s] : stats) {
    write_field(os, label);
    os << ',' << s.n << ',' << format_double(s.mean) << ',' << format_double(s.stddev) << ','
       << format_double(s.min) << ',' << format_double(s.max) << '\n';
  }
}

std::map<std::string, MetricStats> read_stats(const std::filesystem::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw IoFailure("cannot open " + file.string());
  std::map<std::string, MetricStats> out;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != kStatsHeader) throw ParseError(file.string(), lineno, "missing stats header");
      header_seen = true;
      continue;
    }
    bool ok = true;
    auto f = split_csv(line, ok);
    MetricStats s;
    if (!ok || f.size() != 6) throw ParseError(file.string(), lineno, "expected 6 fields");
    s.label = f[0];
    if (!parse_number(f[1], s.n) || !parse_number(f[2], s.mean) ||
        !parse_number(f[3], s.stddev) || !parse_number(f[4], s.min) ||
        !parse_number(f[5], s.max)) {
      throw ParseError(file.string(), lineno, "bad number");
    }
    out.emplace(s.label, s);
  }
  return out;
}

}  // namespace tspace::prof
