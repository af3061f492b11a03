#pragma once

#include <memory>
#include <string>

#include "tspace/profiler.hpp"
#include "tspace/space.hpp"

namespace tspace {

/// Metric labels shared by every workload.
namespace labels {
inline constexpr const char* kWriteLocal = "write::local";
inline constexpr const char* kReadLocal = "read::local";
inline constexpr const char* kWriteRemote = "write::remote";
inline constexpr const char* kReadRemote = "read::remote";
inline constexpr const char* kSearch = "read::l-r";
inline constexpr const char* kTotalRuntime = "Master::TotalRuntime";
inline constexpr const char* kNodeVisited = "nodeVisited";
}  // namespace labels

enum class Locality { Local, Remote };

/// Decorator that times every out under write::<locality> and every read or
/// take under read::<locality>.
class ProfiledSpace final : public TupleSpace {
 public:
  ProfiledSpace(std::shared_ptr<TupleSpace> inner, prof::Profiler& profiler, Locality where)
      : inner_(std::move(inner)),
        profiler_(profiler),
        write_label_(where == Locality::Local ? labels::kWriteLocal : labels::kWriteRemote),
        read_label_(where == Locality::Local ? labels::kReadLocal : labels::kReadRemote) {}

  void out(const Tuple& t) override {
    prof::Profiler::Scope s(profiler_, write_label_);
    inner_->out(t);
  }
  std::optional<Tuple> rdp(const Template& t) override {
    prof::Profiler::Scope s(profiler_, read_label_);
    return inner_->rdp(t);
  }
  std::optional<Tuple> inp(const Template& t) override {
    prof::Profiler::Scope s(profiler_, read_label_);
    return inner_->inp(t);
  }
  Tuple rd(const Template& t, Timeout timeout) override {
    prof::Profiler::Scope s(profiler_, read_label_);
    return inner_->rd(t, timeout);
  }
  Tuple in(const Template& t, Timeout timeout) override {
    prof::Profiler::Scope s(profiler_, read_label_);
    return inner_->in(t, timeout);
  }
  std::size_t count(const Template& t) override { return inner_->count(t); }
  WatchId watch(const Template& t, WatchCallback cb) override {
    return inner_->watch(t, std::move(cb));
  }
  void cancel_watch(WatchId id) override { inner_->cancel_watch(id); }
  std::string describe() const override { return inner_->describe(); }

  TupleSpace& inner() { return *inner_; }

 private:
  std::shared_ptr<TupleSpace> inner_;
  prof::Profiler& profiler_;
  std::string write_label_;
  std::string read_label_;
};

}  // namespace tspace
