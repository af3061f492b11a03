#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "tspace/errors.hpp"

namespace tspace::prof {

enum class Kind { Interval, Counter };

std::string_view kind_name(Kind k);

/// One raw measurement. Interval values are nanoseconds.
struct MetricRecord {
  std::string label;
  Kind kind = Kind::Interval;
  std::int64_t value = 0;
  std::string process;
  std::string thread;
  std::uint64_t seq = 0;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

struct MetricStats {
  std::string label;
  std::size_t n = 0;
  double mean = 0;
  double stddev = 0;  // sample (n-1); 0 when n == 1
  double min = 0;
  double max = 0;
};

class IoFailure : public TupleSpaceError {
 public:
  using TupleSpaceError::TupleSpaceError;
};

class ParseError : public TupleSpaceError {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : TupleSpaceError(file + ":" + std::to_string(line) + ": " + what),
        file_(file), line_(line) {}
  const std::string& file() const { return file_; }
  std::size_t line() const { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

inline constexpr std::string_view kDumpHeader = "label,kind,value,process,thread,seq";
inline constexpr std::string_view kStatsHeader = "label,n,mean,stddev,min,max";

/// Labeled interval timer and counters.
///
/// begin/end pairs nest per thread and per label; distinct labels may
/// overlap freely. Records are buffered per thread and written by dump().
class Profiler {
 public:
  explicit Profiler(std::string process = "proc");
  ~Profiler();
  Profiler(const Profiler&) = delete;
  Profiler& operator=(const Profiler&) = delete;

  const std::string& process() const { return process_; }

  /// Names the calling thread in this profiler's records.
  void set_thread_name(std::string name);

  void begin(std::string_view label);
  void end(std::string_view label);
  void inc_counter(std::string_view label);
  /// Emits a counter record with an explicit value.
  void record_counter(std::string_view label, std::int64_t value);
  void record_interval(std::string_view label, std::chrono::nanoseconds elapsed);

  /// Buffered records of all threads, counters flushed. Clears the buffers.
  std::vector<MetricRecord> drain();
  /// Writes drain() as CSV. Throws IoFailure.
  void dump(const std::filesystem::path& sink);

  /// Unmatched end() calls and similar misuse, in order of occurrence.
  std::vector<std::string> diagnostics() const;

  /// RAII begin/end.
  class Scope {
   public:
    Scope(Profiler& p, std::string_view label) : p_(p), label_(label) { p_.begin(label_); }
    ~Scope() { p_.end(label_); }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Profiler& p_;
    std::string label_;
  };

 private:
  struct ThreadBuffer;
  ThreadBuffer& local();

  const std::uint64_t id_;
  std::string process_;
  mutable std::mutex mu_;
  std::vector<std::unique_ptr<ThreadBuffer>> threads_;
  std::vector<std::string> diagnostics_;
};

void write_records(std::ostream& os, std::span<const MetricRecord> records);
std::vector<MetricRecord> parse_records(std::istream& is, const std::string& source = "<stream>");
std::vector<MetricRecord> read_dump(const std::filesystem::path& file);

/// n, mean, sample stddev, min, max of a series. Requires a non-empty series.
MetricStats compute_stats(std::string label, std::span<const double> values);

/// Per-label statistics over every record of every file.
std::map<std::string, MetricStats> aggregate(std::span<const std::filesystem::path> files);
std::map<std::string, MetricStats> aggregate_records(std::span<const MetricRecord> records);

void write_stats(std::ostream& os, const std::map<std::string, MetricStats>& stats);
std::map<std::string, MetricStats> read_stats(const std::filesystem::path& file);

}  // namespace tspace::prof
