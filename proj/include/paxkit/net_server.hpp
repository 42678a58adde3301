#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/select.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <csignal>
#include <map>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "paxkit/roles/acceptor.hpp"
#include "paxkit/roles/batcher.hpp"
#include "paxkit/roles/proposer.hpp"
#include "paxkit/roles/proxy_leader.hpp"
#include "paxkit/roles/replica.hpp"
#include "paxkit/wire.hpp"

namespace paxkit {

struct SockAddr {
  std::string host = "127.0.0.1";
  int port = 0;
};

inline SockAddr parse_addr(const std::string& s) {
  auto colon = s.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("address must be host:port");
  SockAddr a;
  a.host = s.substr(0, colon);
  a.port = std::stoi(s.substr(colon + 1));
  return a;
}

// Hosts every role of a plan in one process behind the length-prefixed frame
// transport. Clients are remote; their NodeIds are bound to the connection a
// frame last arrived on. Smoke-level: proves the role machines run unchanged
// outside the simulator.
class Server {
 public:
  Server(DeploymentPlan plan, const SockAddr& addr, std::uint64_t seed = 1)
      : plan_(std::move(plan)) {
    env_.plan = &plan_;
    env_.trace = &trace_;
    auto salt = [&](NodeId n) { return mix_seed(seed, node_salt(n)); };
    for (int i = 0; i < plan_.num_proposers; ++i)
      proposers_.emplace_back(NodeId{Role::Proposer, i}, env_, salt({Role::Proposer, i}));
    if (plan_.variant == Variant::Compartmentalized)
      for (int i = 0; i < plan_.num_proxy_leaders; ++i)
        proxies_.emplace_back(NodeId{Role::ProxyLeader, i}, env_, salt({Role::ProxyLeader, i}));
    for (int i = 0; i < plan_.num_acceptors(); ++i)
      acceptors_.emplace_back(NodeId{Role::Acceptor, i}, env_);
    for (int i = 0; i < plan_.num_replicas; ++i)
      replicas_.emplace_back(NodeId{Role::Replica, i}, env_, salt({Role::Replica, i}));
    for (int i = 0; i < plan_.num_batchers; ++i)
      batchers_.emplace_back(NodeId{Role::Batcher, i}, env_, salt({Role::Batcher, i}));
    for (int i = 0; i < plan_.num_unbatchers; ++i)
      unbatchers_.emplace_back(NodeId{Role::Unbatcher, i}, env_);

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw std::runtime_error("socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in sa{};
    sa.sin_family = AF_INET;
    sa.sin_port = htons(static_cast<std::uint16_t>(addr.port));
    if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) != 1)
      throw std::runtime_error("bad listen address: " + addr.host);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0)
      throw std::runtime_error("bind failed on " + addr.host + ":" + std::to_string(addr.port));
    if (::listen(listen_fd_, 16) != 0) throw std::runtime_error("listen failed");
    socklen_t len = sizeof(sa);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&sa), &len);
    port_ = ntohs(sa.sin_port);
  }

  ~Server() {
    for (auto& [fd, c] : conns_) ::close(fd);
    if (listen_fd_ >= 0) ::close(listen_fd_);
  }

  int port() const { return port_; }

  // Runs until *stop becomes true (e.g. set by a SIGTERM handler).
  void run(const std::atomic<bool>* stop) {
    while (!stop->load()) {
      fd_set rd;
      FD_ZERO(&rd);
      FD_SET(listen_fd_, &rd);
      int maxfd = listen_fd_;
      for (const auto& [fd, c] : conns_) {
        FD_SET(fd, &rd);
        maxfd = std::max(maxfd, fd);
      }
      timeval tv = next_timeout();
      int n = ::select(maxfd + 1, &rd, nullptr, nullptr, &tv);
      if (n < 0) {
        if (errno == EINTR) continue;
        break;
      }
      fire_due_timers();
      if (FD_ISSET(listen_fd_, &rd)) accept_conn();
      std::vector<int> dead;
      for (auto& [fd, c] : conns_)
        if (FD_ISSET(fd, &rd) && !read_conn(fd, c)) dead.push_back(fd);
      for (int fd : dead) drop_conn(fd);
    }
  }

 private:
  struct Conn {
    std::string buf;
  };

  static std::int64_t now_ms() {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
  }

  void accept_conn() {
    int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd >= 0) conns_[fd];
  }

  void drop_conn(int fd) {
    ::close(fd);
    conns_.erase(fd);
    for (auto it = binding_.begin(); it != binding_.end();)
      it = it->second == fd ? binding_.erase(it) : std::next(it);
  }

  bool read_conn(int fd, Conn& c) {
    char chunk[4096];
    ssize_t got = ::read(fd, chunk, sizeof(chunk));
    if (got <= 0) return false;
    c.buf.append(chunk, static_cast<std::size_t>(got));
    try {
      Envelope env;
      while (decode_frame(c.buf, env)) {
        binding_[env.from] = fd;  // replies to this NodeId go back here
        route(env);
        pump();
      }
    } catch (const std::exception&) {
      return false;  // malformed frame: drop the connection, keep serving
    }
    return true;
  }

  void route(const Envelope& env) {
    auto it = binding_.find(env.to);
    if (it != binding_.end()) {
      auto frame = encode_frame(env);
      ssize_t ignored = ::write(it->second, frame.data(), frame.size());
      (void)ignored;
      return;
    }
    if (env.to.role == Role::Client) return;  // remote client we never heard from
    Effects fx{env.to};
    dispatch(env, fx);
    absorb(fx);
  }

  void pump() {
    while (!inbox_.empty()) {
      Envelope env = std::move(inbox_.front());
      inbox_.pop();
      route(env);
    }
  }

  void absorb(Effects& fx) {
    for (auto& m : fx.msgs) inbox_.push(std::move(m));
    std::int64_t now = now_ms();
    for (auto& t : fx.timers) timers_.push({now + t.delay, fx.self, t.id});
    fx.msgs.clear();
    fx.timers.clear();
  }

  struct PendingTimer {
    std::int64_t due;
    NodeId node;
    std::int64_t id;
    bool operator>(const PendingTimer& o) const { return due > o.due; }
  };

  timeval next_timeout() const {
    std::int64_t wait = 200;
    if (!timers_.empty()) wait = std::clamp<std::int64_t>(timers_.top().due - now_ms(), 0, 200);
    return timeval{wait / 1000, static_cast<suseconds_t>((wait % 1000) * 1000)};
  }

  void fire_due_timers() {
    std::int64_t now = now_ms();
    while (!timers_.empty() && timers_.top().due <= now) {
      auto t = timers_.top();
      timers_.pop();
      Effects fx{t.node};
      dispatch_timer(t.node, t.id, fx);
      absorb(fx);
      pump();
    }
  }

  void dispatch(const Envelope& env, Effects& fx) {
    int i = env.to.idx;
    switch (env.to.role) {
      case Role::Batcher: if (ok(i, batchers_)) batchers_[i].on_message(env, fx); break;
      case Role::Proposer: if (ok(i, proposers_)) proposers_[i].on_message(env, fx); break;
      case Role::ProxyLeader: if (ok(i, proxies_)) proxies_[i].on_message(env, fx); break;
      case Role::Acceptor: if (ok(i, acceptors_)) acceptors_[i].on_message(env, fx); break;
      case Role::Replica: if (ok(i, replicas_)) replicas_[i].on_message(env, fx); break;
      case Role::Unbatcher: if (ok(i, unbatchers_)) unbatchers_[i].on_message(env, fx); break;
      case Role::Client: break;
    }
  }

  void dispatch_timer(NodeId node, std::int64_t id, Effects& fx) {
    int i = node.idx;
    switch (node.role) {
      case Role::Batcher: if (ok(i, batchers_)) batchers_[i].on_timer(id, fx); break;
      case Role::Proposer: if (ok(i, proposers_)) proposers_[i].on_timer(id, fx); break;
      case Role::ProxyLeader: if (ok(i, proxies_)) proxies_[i].on_timer(id, fx); break;
      case Role::Acceptor: if (ok(i, acceptors_)) acceptors_[i].on_timer(id, fx); break;
      case Role::Replica: if (ok(i, replicas_)) replicas_[i].on_timer(id, fx); break;
      case Role::Unbatcher: if (ok(i, unbatchers_)) unbatchers_[i].on_timer(id, fx); break;
      case Role::Client: break;
    }
  }

  template <class V>
  static bool ok(int i, const V& v) {
    return i >= 0 && static_cast<std::size_t>(i) < v.size();
  }

  DeploymentPlan plan_;
  Trace trace_;
  RoleEnv env_;
  std::vector<Batcher> batchers_;
  std::vector<Proposer> proposers_;
  std::vector<ProxyLeader> proxies_;
  std::vector<Acceptor> acceptors_;
  std::vector<Replica> replicas_;
  std::vector<Unbatcher> unbatchers_;

  int listen_fd_ = -1;
  int port_ = 0;
  std::map<int, Conn> conns_;
  std::map<NodeId, int> binding_;
  std::queue<Envelope> inbox_;
  std::priority_queue<PendingTimer, std::vector<PendingTimer>, std::greater<>> timers_;
};

// Closed-loop smoke driver: `ops` writes per client, sequential, over one
// connection. Returns the number of OK replies received. client_base offsets
// the client ids so repeated drives don't collide with the server's dedup
// tables (a reused (client, seq) pair is silently ignored as a retransmit).
inline int drive_writes(const SockAddr& addr, int num_clients, int ops_per_client,
                        std::int64_t timeout_ms = 10'000, int client_base = 0) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("socket() failed");
  timeval rcv{timeout_ms / 1000, static_cast<suseconds_t>((timeout_ms % 1000) * 1000)};
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &rcv, sizeof(rcv));
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(static_cast<std::uint16_t>(addr.port));
  if (::inet_pton(AF_INET, addr.host.c_str(), &sa.sin_addr) != 1 ||
      ::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) != 0) {
    ::close(fd);
    throw std::runtime_error("connect failed");
  }
  int okays = 0;
  std::string buf;
  auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
  for (int c = client_base; c < client_base + num_clients; ++c) {
    for (int s = 0; s < ops_per_client; ++s) {
      Command cmd = make_write(c, s, "k" + std::to_string(c), "v" + std::to_string(s));
      Envelope env{NodeId{Role::Client, c}, NodeId{Role::Proposer, 0}, ClientRequest{cmd}};
      auto frame = encode_frame(env);
      if (::write(fd, frame.data(), frame.size()) < 0) break;
      bool replied = false;
      while (!replied && std::chrono::steady_clock::now() < deadline) {
        Envelope in;
        while (decode_frame(buf, in)) {
          if (const auto* r = std::get_if<Reply>(&in.msg);
              r && r->entry.client == c && r->entry.seq == s) {
            ++okays;
            replied = true;
          }
        }
        if (replied) break;
        char chunk[4096];
        ssize_t got = ::read(fd, chunk, sizeof(chunk));
        if (got <= 0) break;
        buf.append(chunk, static_cast<std::size_t>(got));
      }
      if (!replied) {
        ::close(fd);
        return okays;
      }
    }
  }
  ::close(fd);
  return okays;
}

}  // namespace paxkit
