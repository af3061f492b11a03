#include "tspace/net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <future>

#include "tspace/errors.hpp"

namespace tspace {

using wire::ErrorCode;
using wire::Frame;
using wire::MsgType;

NodeAddress parse_endpoint(const std::string& text, std::string name) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
    throw std::invalid_argument("expected host:port, got '" + text + "'");
  }
  const std::string host = text.substr(0, colon);
  int port = 0;
  try {
    std::size_t used = 0;
    port = std::stoi(text.substr(colon + 1), &used);
    if (used != text.size() - colon - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw std::invalid_argument("bad port in '" + text + "'");
  }
  if (port < 1 || port > 65535) throw std::invalid_argument("port out of range in '" + text + "'");
  return NodeAddress{host, static_cast<std::uint16_t>(port), std::move(name)};
}

namespace {

bool read_exact(int fd, std::uint8_t* buf, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r == 0) return false;
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

bool write_all(int fd, const std::uint8_t* buf, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    const ssize_t r = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    sent += static_cast<std::size_t>(r);
  }
  return true;
}

/// Reads one frame. Returns nullopt on EOF; throws MalformedError on a bad
/// length prefix (the stream cannot be resynchronised after that).
std::optional<Frame> read_frame(int fd) {
  std::uint8_t len_buf[4];
  if (!read_exact(fd, len_buf, 4)) return std::nullopt;
  const std::uint32_t length = static_cast<std::uint32_t>(len_buf[0]) |
                               (static_cast<std::uint32_t>(len_buf[1]) << 8) |
                               (static_cast<std::uint32_t>(len_buf[2]) << 16) |
                               (static_cast<std::uint32_t>(len_buf[3]) << 24);
  wire::check_frame_length(length);
  std::vector<std::uint8_t> rest(length);
  if (!read_exact(fd, rest.data(), length)) return std::nullopt;
  Frame f;
  f.type = static_cast<MsgType>(rest[0]);
  std::uint64_t id = 0;
  for (int i = 0; i < 8; ++i) id |= static_cast<std::uint64_t>(rest[1 + i]) << (8 * i);
  f.request_id = id;
  f.body.assign(rest.begin() + 9, rest.end());
  return f;
}

void set_nodelay(int fd) {
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

[[noreturn]] void throw_remote_error(std::span<const std::uint8_t> body) {
  const auto err = wire::decode_error_body(body);
  switch (static_cast<ErrorCode>(err.code)) {
    case ErrorCode::Timeout: throw TimeoutError(err.message);
    case ErrorCode::ShuttingDown: throw ShuttingDown(err.message);
    case ErrorCode::Malformed: throw MalformedError("remote: " + err.message);
    default: throw RemoteError(err.code, err.message);
  }
}

}  // namespace

namespace detail {

/// One accepted client connection.
class ServerConnection : public std::enable_shared_from_this<ServerConnection> {
 public:
  ServerConnection(Server& server, int fd) : server_(server), fd_(fd) {}
  // The owning Server joins the reader before releasing its reference.
  ~ServerConnection() {
    if (thread_.joinable()) {
      if (thread_.get_id() == std::this_thread::get_id()) {
        thread_.detach();
      } else {
        thread_.join();
      }
    }
    ::close(fd_);
  }

  void start() {
    thread_ = std::thread([this] { reader_loop(); });
  }

  /// Stops reading; a request already being handled still gets its reply.
  void stop_reading() { ::shutdown(fd_, SHUT_RD); }
  void shutdown_socket() { ::shutdown(fd_, SHUT_RDWR); }
  bool finished() const { return finished_.load(); }
  void join() {
    if (thread_.joinable() && thread_.get_id() != std::this_thread::get_id()) thread_.join();
  }

  /// Timer expiry for a parked request.
  void expire(std::uint64_t request_id) {
    std::unique_lock lk(mu_);
    auto it = parked_.find(request_id);
    if (it == parked_.end()) return;
    if (!server_.space_.cancel_waiter(it->second)) return;  // completion in flight
    parked_.erase(it);
    lk.unlock();
    send_error(request_id, ErrorCode::Timeout, "timed out");
  }

  /// Fails every parked request with shutting_down.
  void abandon_parked(ErrorCode code, const char* why) {
    std::map<std::uint64_t, LocalSpace::WaiterId> parked;
    {
      std::lock_guard lk(mu_);
      closed_ = true;
      parked.swap(parked_);
    }
    for (auto& [rid, wid] : parked) {
      if (server_.space_.cancel_waiter(wid)) send_error(rid, code, why);
    }
  }

 private:
  void reader_loop() {
    try {
      while (true) {
        std::optional<Frame> f;
        try {
          f = read_frame(fd_);
        } catch (const MalformedError& e) {
          send_error(0, ErrorCode::Malformed, e.what());
          break;
        }
        if (!f) break;
        handle(*f);
      }
    } catch (...) {
    }
    abandon_parked(ErrorCode::ShuttingDown, "connection closed");
    // The client must see EOF now, not when the connection is reaped.
    shutdown_socket();
    finished_ = true;
  }

  void handle(const Frame& f) {
    const std::uint64_t rid = f.request_id;
    try {
      switch (f.type) {
        case MsgType::Hello: {
          const auto hello = wire::decode_hello_body(f.body);
          client_name_ = hello.name;
          if (hello.version != wire::kProtocolVersion) {
            send_error(rid, ErrorCode::Unsupported, "protocol version mismatch");
            return;
          }
          send(Frame{MsgType::Hello, rid,
                     wire::encode_hello_body(wire::kProtocolVersion,
                                             server_.address_.name)});
          return;
        }
        case MsgType::Out:
          server_.space_.out(wire::decode_tuple(f.body));
          send(Frame{MsgType::ReplyNone, rid, {}});
          return;
        case MsgType::Rdp:
          reply_optional(rid, server_.space_.rdp(wire::decode_template(f.body)));
          return;
        case MsgType::Inp:
          reply_optional(rid, server_.space_.inp(wire::decode_template(f.body)));
          return;
        case MsgType::Count:
          send(Frame{MsgType::CountReply, rid,
                     wire::encode_count_body(server_.space_.count(wire::decode_template(f.body)))});
          return;
        case MsgType::Rd:
        case MsgType::In:
          park(rid, f.type == MsgType::In, wire::decode_blocking_body(f.body));
          return;
        case MsgType::Cancel:
          cancel(rid);
          return;
        default:
          send_error(rid, ErrorCode::Unsupported, "unsupported message type");
          return;
      }
    } catch (const MalformedError& e) {
      send_error(rid, ErrorCode::Malformed, e.what());
    } catch (const ShuttingDown& e) {
      send_error(rid, ErrorCode::ShuttingDown, e.what());
    } catch (const std::invalid_argument& e) {
      send_error(rid, ErrorCode::Malformed, e.what());
    }
  }

  void reply_optional(std::uint64_t rid, const std::optional<Tuple>& t) {
    if (t) {
      send(Frame{MsgType::ReplyTuple, rid, wire::encode_tuple(*t)});
    } else {
      send(Frame{MsgType::ReplyNone, rid, {}});
    }
  }

  void park(std::uint64_t rid, bool destructive, const wire::BlockingBody& req) {
    const Timeout timeout = Timeout::from_wire(req.timeout_ms);
    if (!timeout.is_infinite() && timeout.duration().count() == 0) {
      reply_optional(rid, destructive ? server_.space_.inp(req.tmpl)
                                      : server_.space_.rdp(req.tmpl));
      return;
    }
    std::weak_ptr<ServerConnection> weak = weak_from_this();
    LocalSpace& space = server_.space_;
    auto on_done = [weak, rid, destructive, &space](std::optional<Tuple> t) {
      auto self = weak.lock();
      if (!self) {
        if (t && destructive) space.out(*t);  // nobody left to receive it
        return;
      }
      self->complete(rid, destructive, std::move(t));
    };

    std::unique_lock lk(mu_);
    if (closed_) throw ShuttingDown("connection closing");
    auto reg = space.probe_or_register(req.tmpl, destructive, std::move(on_done));
    if (reg.immediate) {
      lk.unlock();
      reply_optional(rid, reg.immediate);
      return;
    }
    parked_[rid] = reg.waiter;
    lk.unlock();
    if (!timeout.is_infinite()) {
      server_.schedule_timeout(std::chrono::steady_clock::now() + timeout.duration(),
                               weak_from_this(), rid);
    }
  }

  void complete(std::uint64_t rid, bool destructive, std::optional<Tuple> t) {
    {
      std::lock_guard lk(mu_);
      parked_.erase(rid);
    }
    if (!t) {
      send_error(rid, ErrorCode::ShuttingDown, "tuple space is shutting down");
      return;
    }
    if (!send(Frame{MsgType::ReplyTuple, rid, wire::encode_tuple(*t)}) && destructive) {
      server_.space_.out(*t);
    }
  }

  void cancel(std::uint64_t target) {
    std::unique_lock lk(mu_);
    auto it = parked_.find(target);
    if (it == parked_.end()) return;
    if (!server_.space_.cancel_waiter(it->second)) return;
    parked_.erase(it);
    lk.unlock();
    send(Frame{MsgType::ReplyNone, target, {}});
  }

  bool send(const Frame& f) {
    const auto bytes = wire::encode_frame(f);
    std::lock_guard lk(write_mu_);
    if (write_failed_) return false;
    if (!write_all(fd_, bytes.data(), bytes.size())) write_failed_ = true;
    return !write_failed_;
  }

  void send_error(std::uint64_t rid, ErrorCode code, std::string_view msg) {
    send(Frame{MsgType::ReplyErr, rid, wire::encode_error_body(code, msg)});
  }

  Server& server_;
  int fd_;
  std::thread thread_;
  std::atomic<bool> finished_{false};
  std::string client_name_;

  std::mutex mu_;
  bool closed_ = false;
  std::map<std::uint64_t, LocalSpace::WaiterId> parked_;  // request id -> waiter

  std::mutex write_mu_;
  bool write_failed_ = false;
};

}  // namespace detail

std::unique_ptr<Server> Server::start(LocalSpace& space, NodeAddress address) {
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE;
  addrinfo* res = nullptr;
  const std::string port = std::to_string(address.port);
  const char* host = address.host.empty() ? nullptr : address.host.c_str();
  if (int rc = ::getaddrinfo(host, port.c_str(), &hints, &res); rc != 0) {
    throw TupleSpaceError("cannot resolve " + address.endpoint() + ": " + gai_strerror(rc));
  }
  const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
  if (fd < 0) {
    ::freeaddrinfo(res);
    throw TupleSpaceError(std::string("socket: ") + std::strerror(errno));
  }
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  if (::bind(fd, res->ai_addr, res->ai_addrlen) != 0) {
    const int err = errno;
    ::freeaddrinfo(res);
    ::close(fd);
    if (err == EADDRINUSE) throw AddressInUse("address in use: " + address.endpoint());
    throw TupleSpaceError("bind " + address.endpoint() + ": " + std::strerror(err));
  }
  ::freeaddrinfo(res);
  if (::listen(fd, 128) != 0) {
    ::close(fd);
    throw TupleSpaceError(std::string("listen: ") + std::strerror(errno));
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  ::getsockname(fd, reinterpret_cast<sockaddr*>(&bound), &len);
  address.port = ntohs(bound.sin_port);
  return std::unique_ptr<Server>(new Server(space, std::move(address), fd));
}

Server::Server(LocalSpace& space, NodeAddress address, int listen_fd)
    : space_(space), address_(std::move(address)), listen_fd_(listen_fd) {
  accept_thread_ = std::thread([this] { accept_loop(); });
  timer_thread_ = std::thread([this] { timer_loop(); });
}

Server::~Server() { stop(); }

void Server::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  if (accept_thread_.joinable()) accept_thread_.join();
  ::close(listen_fd_);
  {
    std::lock_guard lk(timer_mu_);
    timer_cv_.notify_all();
  }
  if (timer_thread_.joinable()) timer_thread_.join();

  std::vector<std::shared_ptr<detail::ServerConnection>> conns;
  {
    std::lock_guard lk(conns_mu_);
    conns.swap(conns_);
  }
  for (auto& c : conns) c->abandon_parked(ErrorCode::ShuttingDown, "server stopping");
  // Half-close first so that an OUT whose tuple has just woken the local
  // owner is still acknowledged before the socket goes away.
  for (auto& c : conns) c->stop_reading();
  for (auto& c : conns) c->join();
  for (auto& c : conns) c->shutdown_socket();
}

void Server::accept_loop() {
  while (!stopping_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      if (stopping_) break;
      if (errno == EMFILE || errno == ENFILE || errno == ENOBUFS || errno == ENOMEM) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        continue;
      }
      break;
    }
    set_nodelay(fd);
    // Bounds how long stop() can wait on a client that stopped reading.
    timeval send_timeout{30, 0};
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &send_timeout, sizeof(send_timeout));
    reap_closed();
    auto conn = std::make_shared<detail::ServerConnection>(*this, fd);
    {
      std::lock_guard lk(conns_mu_);
      if (stopping_) {
        ::close(fd);
        break;
      }
      conns_.push_back(conn);
    }
    conn->start();
  }
}

void Server::reap_closed() {
  std::vector<std::shared_ptr<detail::ServerConnection>> done;
  {
    std::lock_guard lk(conns_mu_);
    for (auto it = conns_.begin(); it != conns_.end();) {
      if ((*it)->finished()) {
        done.push_back(std::move(*it));
        it = conns_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : done) c->join();
}

std::size_t Server::connection_count() const {
  std::lock_guard lk(conns_mu_);
  std::size_t n = 0;
  for (const auto& c : conns_) n += c->finished() ? 0 : 1;
  return n;
}

void Server::schedule_timeout(std::chrono::steady_clock::time_point when,
                              std::weak_ptr<detail::ServerConnection> conn,
                              std::uint64_t request_id) {
  std::lock_guard lk(timer_mu_);
  timers_.emplace(when, Expiry{std::move(conn), request_id});
  timer_cv_.notify_all();
}

void Server::timer_loop() {
  std::unique_lock lk(timer_mu_);
  while (!stopping_) {
    if (timers_.empty()) {
      timer_cv_.wait(lk);
      continue;
    }
    const auto next = timers_.begin()->first;
    if (std::chrono::steady_clock::now() < next) {
      timer_cv_.wait_until(lk, next);
      continue;
    }
    Expiry e = std::move(timers_.begin()->second);
    timers_.erase(timers_.begin());
    lk.unlock();
    if (auto c = e.conn.lock()) c->expire(e.request_id);
    lk.lock();
  }
}

// ---------------------------------------------------------------------------

RemoteSpace::RemoteSpace(NodeAddress address, int fd) : address_(std::move(address)), fd_(fd) {
  reader_ = std::thread([this] { reader_loop(); });
}

std::unique_ptr<RemoteSpace> RemoteSpace::connect(const NodeAddress& address,
                                                  const ConnectOptions& options) {
  std::string last_error = "no attempts";
  for (int attempt = 0; attempt < std::max(1, options.attempts); ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(options.retry_interval);
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    const std::string port = std::to_string(address.port);
    if (int rc = ::getaddrinfo(address.host.c_str(), port.c_str(), &hints, &res); rc != 0) {
      last_error = gai_strerror(rc);
      continue;
    }
    const int fd = ::socket(res->ai_family, res->ai_socktype, res->ai_protocol);
    if (fd < 0) {
      last_error = std::strerror(errno);
      ::freeaddrinfo(res);
      continue;
    }
    if (::connect(fd, res->ai_addr, res->ai_addrlen) != 0) {
      last_error = std::strerror(errno);
      ::freeaddrinfo(res);
      ::close(fd);
      continue;
    }
    ::freeaddrinfo(res);
    set_nodelay(fd);

    std::unique_ptr<RemoteSpace> handle(new RemoteSpace(address, fd));
    Reply hello = handle->call(MsgType::Hello, wire::encode_hello_body(wire::kProtocolVersion,
                                                                       options.client_name));
    if (hello.lost) throw ConnectionLost("connection lost during handshake with " + address.endpoint());
    if (hello.type == MsgType::ReplyErr) {
      throw VersionMismatch("server rejected handshake: " +
                            wire::decode_error_body(hello.body).message);
    }
    if (hello.type != MsgType::Hello) throw MalformedError("unexpected handshake reply");
    const auto body = wire::decode_hello_body(hello.body);
    if (body.version != wire::kProtocolVersion) {
      throw VersionMismatch("server speaks protocol version " + std::to_string(body.version));
    }
    handle->server_name_ = body.name;
    return handle;
  }
  throw Unreachable("cannot reach " + address.endpoint() + " after " +
                    std::to_string(options.attempts) + " attempts: " + last_error);
}

RemoteSpace::~RemoteSpace() {
  close();
  if (reader_.joinable()) reader_.join();
  ::close(fd_);
}

void RemoteSpace::close() { ::shutdown(fd_, SHUT_RDWR); }

void RemoteSpace::reader_loop() {
  std::string why = "connection closed by peer";
  try {
    while (true) {
      auto f = read_frame(fd_);
      if (!f) break;
      ReplyHandler handler;
      {
        std::lock_guard lk(pending_mu_);
        auto it = pending_.find(f->request_id);
        if (it == pending_.end()) continue;
        handler = std::move(it->second);
        pending_.erase(it);
      }
      handler(Reply{f->type, std::move(f->body), false});
    }
  } catch (const std::exception& e) {
    why = e.what();
  }
  fail_all(why);
}

void RemoteSpace::fail_all(const std::string& why) {
  std::map<std::uint64_t, ReplyHandler> pending;
  {
    std::lock_guard lk(pending_mu_);
    lost_reason_ = why;
    lost_ = true;
    pending.swap(pending_);
  }
  for (auto& [id, h] : pending) h(Reply{MsgType::ReplyErr, {}, true});
}

void RemoteSpace::write_frame(const Frame& f) {
  const auto bytes = wire::encode_frame(f);
  if (!write_all(fd_, bytes.data(), bytes.size())) {
    ::shutdown(fd_, SHUT_RDWR);
  }
}

void RemoteSpace::send_raw(std::span<const std::uint8_t> bytes) {
  std::lock_guard lk(write_mu_);
  write_all(fd_, bytes.data(), bytes.size());
}

std::uint64_t RemoteSpace::submit(MsgType type, std::vector<std::uint8_t> body,
                                  ReplyHandler handler) {
  std::unique_lock wlk(write_mu_);
  const std::uint64_t id = next_id_++;
  {
    std::lock_guard lk(pending_mu_);
    if (lost_) {
      wlk.unlock();
      handler(Reply{MsgType::ReplyErr, {}, true});
      return id;
    }
    pending_.emplace(id, std::move(handler));
  }
  write_frame(Frame{type, id, std::move(body)});
  return id;
}

RemoteSpace::Reply RemoteSpace::call(MsgType type, std::vector<std::uint8_t> body) {
  auto promise = std::make_shared<std::promise<Reply>>();
  auto future = promise->get_future();
  submit(type, std::move(body), [promise](Reply r) { promise->set_value(std::move(r)); });
  return future.get();
}

void RemoteSpace::cancel(std::uint64_t request_id) {
  std::lock_guard wlk(write_mu_);
  if (lost_) return;
  write_frame(Frame{MsgType::Cancel, request_id, {}});
}

void RemoteSpace::check_reply(const Reply& r) {
  if (r.lost) {
    std::lock_guard lk(pending_mu_);
    throw ConnectionLost("connection to " + address_.endpoint() + " lost: " + lost_reason_);
  }
  if (r.type == MsgType::ReplyErr) throw_remote_error(r.body);
}

std::optional<Tuple> RemoteSpace::tuple_or_none(const Reply& r) {
  check_reply(r);
  if (r.type == MsgType::ReplyTuple) return wire::decode_tuple(r.body);
  if (r.type == MsgType::ReplyNone) return std::nullopt;
  throw MalformedError("unexpected reply type");
}

void RemoteSpace::out(const Tuple& tuple) {
  Reply r = call(MsgType::Out, wire::encode_tuple(tuple));
  check_reply(r);
}

std::optional<Tuple> RemoteSpace::rdp(const Template& tmpl) {
  return tuple_or_none(call(MsgType::Rdp, wire::encode_template(tmpl)));
}

std::optional<Tuple> RemoteSpace::inp(const Template& tmpl) {
  return tuple_or_none(call(MsgType::Inp, wire::encode_template(tmpl)));
}

Tuple RemoteSpace::rd(const Template& tmpl, Timeout timeout) {
  auto t = tuple_or_none(call(MsgType::Rd, wire::encode_blocking_body(timeout.to_wire(), tmpl)));
  if (!t) throw TimeoutError();
  return std::move(*t);
}

Tuple RemoteSpace::in(const Template& tmpl, Timeout timeout) {
  auto t = tuple_or_none(call(MsgType::In, wire::encode_blocking_body(timeout.to_wire(), tmpl)));
  if (!t) throw TimeoutError();
  return std::move(*t);
}

std::size_t RemoteSpace::count(const Template& tmpl) {
  Reply r = call(MsgType::Count, wire::encode_template(tmpl));
  check_reply(r);
  if (r.type != MsgType::CountReply) throw MalformedError("unexpected reply type");
  return wire::decode_count_body(r.body);
}

WatchId RemoteSpace::watch(const Template& tmpl, WatchCallback cb) {
  return submit(MsgType::Rd, wire::encode_blocking_body(Timeout::kInfiniteWire, tmpl),
                [cb = std::move(cb)](Reply r) {
                  WatchResult res;
                  if (r.lost) {
                    res.status = WatchResult::Status::Failed;
                    res.error = "connection lost";
                  } else if (r.type == MsgType::ReplyTuple) {
                    try {
                      res.tuple = wire::decode_tuple(r.body);
                      res.status = WatchResult::Status::Found;
                    } catch (const std::exception& e) {
                      res.status = WatchResult::Status::Failed;
                      res.error = e.what();
                    }
                  } else if (r.type == MsgType::ReplyNone) {
                    res.status = WatchResult::Status::Cancelled;
                  } else {
                    res.status = WatchResult::Status::Failed;
                    res.error = "remote error";
                  }
                  cb(std::move(res));
                });
}

void RemoteSpace::cancel_watch(WatchId id) { cancel(id); }

}  // namespace tspace
