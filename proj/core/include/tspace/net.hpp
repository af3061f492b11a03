#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "tspace/codec.hpp"
#include "tspace/local_space.hpp"
#include "tspace/space.hpp"

namespace tspace {

struct NodeAddress {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  std::string name;

  std::string endpoint() const { return host + ":" + std::to_string(port); }
  friend bool operator==(const NodeAddress&, const NodeAddress&) = default;
};

/// Parses "host:port".
NodeAddress parse_endpoint(const std::string& text, std::string name = {});

namespace detail {
class ServerConnection;
}

/// Serves one LocalSpace over TCP.
///
/// Each connection has a reader thread. Blocking RD/IN requests become
/// waiters on the space and are answered from whichever thread satisfies
/// them, so a parked request never holds up later frames. Finite timeouts are
/// expired by a shared timer thread.
class Server {
 public:
  /// Binds and starts listening. Port 0 picks an ephemeral port.
  /// Throws AddressInUse when the port is taken.
  static std::unique_ptr<Server> start(LocalSpace& space, NodeAddress address);

  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Address with the actually bound port.
  const NodeAddress& address() const { return address_; }

  /// Stops accepting, fails parked requests with shutting_down and closes
  /// every connection. Idempotent.
  void stop();

  std::size_t connection_count() const;

 private:
  friend class detail::ServerConnection;
  Server(LocalSpace& space, NodeAddress address, int listen_fd);

  void accept_loop();
  void timer_loop();
  void schedule_timeout(std::chrono::steady_clock::time_point when,
                        std::weak_ptr<detail::ServerConnection> conn,
                        std::uint64_t request_id);
  void reap_closed();

  LocalSpace& space_;
  NodeAddress address_;
  int listen_fd_;
  std::atomic<bool> stopping_{false};

  mutable std::mutex conns_mu_;
  std::vector<std::shared_ptr<detail::ServerConnection>> conns_;

  struct Expiry {
    std::weak_ptr<detail::ServerConnection> conn;
    std::uint64_t request_id;
  };
  std::mutex timer_mu_;
  std::condition_variable timer_cv_;
  std::multimap<std::chrono::steady_clock::time_point, Expiry> timers_;

  std::thread accept_thread_;
  std::thread timer_thread_;
};

struct ConnectOptions {
  int attempts = 5;
  std::chrono::milliseconds retry_interval{200};
  std::string client_name = "client";
};

/// Client handle for a remote space. One multiplexed connection; replies are
/// routed by request id, so the handle may be used from several threads and
/// blocking requests do not hold up others.
class RemoteSpace final : public TupleSpace {
 public:
  /// Connects and exchanges HELLO. Throws Unreachable after the last retry,
  /// VersionMismatch if the server speaks another protocol version.
  static std::unique_ptr<RemoteSpace> connect(const NodeAddress& address,
                                              const ConnectOptions& options = {});

  ~RemoteSpace() override;

  void out(const Tuple& tuple) override;
  std::optional<Tuple> rdp(const Template& tmpl) override;
  std::optional<Tuple> inp(const Template& tmpl) override;
  Tuple rd(const Template& tmpl, Timeout timeout) override;
  Tuple in(const Template& tmpl, Timeout timeout) override;
  std::size_t count(const Template& tmpl) override;
  WatchId watch(const Template& tmpl, WatchCallback cb) override;
  void cancel_watch(WatchId id) override;
  std::string describe() const override { return "remote:" + address_.endpoint(); }

  const NodeAddress& address() const { return address_; }
  const std::string& server_name() const { return server_name_; }
  bool connected() const { return !lost_.load(); }

  /// Closes the connection; pending requests fail with ConnectionLost.
  void close();

  /// Sends raw bytes on the connection (protocol tests only).
  void send_raw(std::span<const std::uint8_t> bytes);

  struct Reply {
    wire::MsgType type = wire::MsgType::ReplyNone;
    std::vector<std::uint8_t> body;
    bool lost = false;
  };
  using ReplyHandler = std::function<void(Reply)>;

  /// Sends a request and routes its reply to `handler`. Returns the request id.
  std::uint64_t submit(wire::MsgType type, std::vector<std::uint8_t> body,
                       ReplyHandler handler);
  /// Synchronous request/reply.
  Reply call(wire::MsgType type, std::vector<std::uint8_t> body);
  /// Sends CANCEL for a pending request.
  void cancel(std::uint64_t request_id);

 private:
  RemoteSpace(NodeAddress address, int fd);
  void reader_loop();
  void fail_all(const std::string& why);
  void check_reply(const Reply& r);
  void write_frame(const wire::Frame& f);
  std::optional<Tuple> tuple_or_none(const Reply& r);

  NodeAddress address_;
  std::string server_name_;
  int fd_;
  std::atomic<bool> lost_{false};

  std::mutex write_mu_;
  std::uint64_t next_id_ = 1;  // guarded by write_mu_

  std::mutex pending_mu_;
  std::map<std::uint64_t, ReplyHandler> pending_;
  std::string lost_reason_;

  std::thread reader_;
};

}  // namespace tspace
