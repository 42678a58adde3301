#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <vector>

#include "paxkit/roles/acceptor.hpp"
#include "paxkit/roles/batcher.hpp"
#include "paxkit/roles/client.hpp"
#include "paxkit/roles/proposer.hpp"
#include "paxkit/roles/proxy_leader.hpp"
#include "paxkit/roles/replica.hpp"
#include "paxkit/workload.hpp"

namespace paxkit {

struct NetModel {
  SimTime delay_min = 1;
  SimTime delay_max = 10;
  double drop_probability = 0.0;
  double duplicate_probability = 0.0;
  bool reordering = true;  // off = FIFO per (from, to) channel
};

// Service ticks a node is busy per delivered message; absent role = free.
struct CapacityModel {
  std::map<Role, SimTime> service;

  SimTime of(Role r) const {
    auto it = service.find(r);
    return it == service.end() ? 0 : it->second;
  }
  bool empty() const { return service.empty(); }
};

struct CrashSpec {
  NodeId node;
  SimTime at = 0;
};
struct ElectSpec {
  int proposer = 0;
  Ballot ballot;
  SimTime at = 0;
};
// While active, isolated nodes exchange no messages with the rest.
struct PartitionSpec {
  SimTime start = 0;
  SimTime end = 0;
  std::set<NodeId> isolated;
};
struct FaultPlan {
  std::vector<CrashSpec> crashes;
  std::vector<ElectSpec> elects;
  std::vector<PartitionSpec> partitions;
};

struct Metrics {
  std::int64_t completed = 0;
  double throughput = 0.0;  // completions per tick over the steady window
  double p50 = 0.0;
  double p99 = 0.0;
  SimTime makespan = 0;
};

struct RunResult {
  Trace trace;
  TraceCounters counters;
  Metrics metrics;
  bool all_clients_done = false;
  std::int64_t total_ops = 0;
  std::vector<Slot> replica_watermarks;
};

inline Metrics metrics_from_history(const History& h, SimTime duration) {
  Metrics m;
  std::map<std::pair<ClientId, std::int64_t>, SimTime> inv;
  std::vector<double> lat;
  SimTime last = 0;
  for (const auto& e : h.events) {
    if (e.inv) {
      inv[{e.client, e.seq}] = e.t;
      continue;
    }
    ++m.completed;
    last = std::max(last, e.t);
    auto it = inv.find({e.client, e.seq});
    if (it != inv.end()) lat.push_back(static_cast<double>(e.t - it->second));
  }
  m.makespan = last;
  // Steady-state window: skip the first fifth of the run as warmup.
  SimTime warm = std::min(last, duration) / 5;
  std::int64_t windowed = 0;
  for (const auto& e : h.events)
    if (!e.inv && e.t >= warm) ++windowed;
  SimTime window_end = std::max(last, warm + 1);
  m.throughput = static_cast<double>(windowed) / static_cast<double>(window_end - warm);
  if (!lat.empty()) {
    std::sort(lat.begin(), lat.end());
    auto pct = [&](double p) {
      auto i = static_cast<std::size_t>(p * static_cast<double>(lat.size() - 1));
      return lat[i];
    };
    m.p50 = pct(0.5);
    m.p99 = pct(0.99);
  }
  return m;
}

// Deterministic discrete-event execution of one deployment. Events are
// ordered by (time, insertion sequence); all randomness flows from `seed`.
class Simulation {
 public:
  Simulation(DeploymentPlan plan, NetModel net, CapacityModel cap, FaultPlan faults,
             std::uint64_t seed, Timeouts timeouts = {})
      : plan_(std::move(plan)),
        net_(net),
        cap_(cap),
        net_rng_(mix_seed(seed, 0x6e65745fULL)) {
    env_.plan = &plan_;
    env_.trace = &trace_;
    env_.timeouts = timeouts;
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
    if (plan_.workload) {
      for (int i = 0; i < plan_.workload->num_clients; ++i) {
        OpStream stream(*plan_.workload, i);
        total_ops_ += stream.total();
        clients_.emplace_back(NodeId{Role::Client, i}, env_, salt({Role::Client, i}),
                              std::move(stream));
      }
    }
    for (const auto& c : faults.crashes) push(c.at, Event::Crash, {}, c.node, 0);
    for (const auto& e : faults.elects) {
      Event ev{};
      ev.kind = Event::Elect;
      ev.node = NodeId{Role::Proposer, e.proposer};
      ev.ballot = e.ballot;
      push_event(e.at, ev);
    }
    partitions_ = std::move(faults.partitions);
  }

  RunResult run(SimTime duration) {
    for (std::size_t i = 0; i < clients_.size(); ++i) {
      Effects fx{NodeId{Role::Client, static_cast<int>(i)}};
      clients_[i].start(0, fx);
      absorb(0, fx);
    }
    while (!pq_.empty()) {
      Event e = pq_.top();
      if (e.t > duration) break;
      pq_.pop();
      switch (e.kind) {
        case Event::Deliver: deliver(e); break;
        case Event::Timer: fire_timer(e); break;
        case Event::Crash: crashed_.insert(e.node); break;
        case Event::Elect: elect(e); break;
      }
    }
    RunResult r;
    r.trace = std::move(trace_);
    r.counters = std::move(counters_);
    r.trace.history.sort();
    r.metrics = metrics_from_history(r.trace.history, duration);
    r.all_clients_done = true;
    for (const auto& c : clients_) r.all_clients_done = r.all_clients_done && c.done();
    r.total_ops = total_ops_;
    for (const auto& rep : replicas_) r.replica_watermarks.push_back(rep.executed_watermark());
    return r;
  }

  // State peeks for tests and diagnostics.
  const LeaderState& proposer_state(int i) const { return proposers_[i].state(); }
  const AcceptorState& acceptor_state(int i) const { return acceptors_[i].state(); }
  const ProxyLeader& proxy_leader(int i) const { return proxies_[i]; }

 private:
  struct Event {
    enum Kind { Deliver, Timer, Crash, Elect };
    SimTime t = 0;
    std::uint64_t seq = 0;
    Kind kind = Deliver;
    Envelope env;
    NodeId node;
    std::int64_t timer_id = 0;
    Ballot ballot;

    bool operator>(const Event& o) const { return std::tie(t, seq) > std::tie(o.t, o.seq); }
  };

  void push_event(SimTime t, Event e) {
    e.t = t;
    e.seq = next_seq_++;
    pq_.push(std::move(e));
  }

  void push(SimTime t, typename Event::Kind kind, Envelope env, NodeId node, std::int64_t timer) {
    Event e{};
    e.kind = kind;
    e.env = std::move(env);
    e.node = node;
    e.timer_id = timer;
    push_event(t, e);
  }

  bool severed(SimTime t, NodeId a, NodeId b) const {
    for (const auto& p : partitions_)
      if (p.start <= t && t < p.end && p.isolated.count(a) != p.isolated.count(b)) return true;
    return false;
  }

  void absorb(SimTime now, Effects& fx) {
    for (auto& env : fx.msgs) {
      ++counters_.messages_out[env.from];
      ++counters_.typed_out[{env.from, message_type(env.msg)}];
      int copies = 1;
      if (net_.drop_probability > 0 && net_rng_.unit() < net_.drop_probability) copies = 0;
      else if (net_.duplicate_probability > 0 && net_rng_.unit() < net_.duplicate_probability)
        copies = 2;
      for (int c = 0; c < copies; ++c) {
        SimTime arrive = now + net_rng_.between(net_.delay_min, net_.delay_max);
        if (!net_.reordering) {
          auto& last = fifo_[{env.from, env.to}];
          arrive = std::max(arrive, last);
          last = arrive;
        }
        push(arrive, Event::Deliver, env, {}, 0);
      }
    }
    for (auto& tr : fx.timers) push(now + tr.delay, Event::Timer, {}, fx.self, tr.id);
    fx.msgs.clear();
    fx.timers.clear();
  }

  void deliver(const Event& e) {
    NodeId to = e.env.to;
    if (crashed_.count(to) || severed(e.t, e.env.from, to)) return;
    SimTime service = cap_.of(to.role);
    SimTime& busy = busy_until_[to];
    if (busy > e.t) {
      Event re = e;
      push_event(busy, re);  // queue behind the node's backlog
      return;
    }
    busy = e.t + service;
    ++counters_.messages_in[to];
    ++counters_.typed_in[{to, message_type(e.env.msg)}];
    Effects fx{to};
    dispatch_message(e.t, e.env, fx);
    absorb(e.t, fx);
  }

  void fire_timer(const Event& e) {
    if (crashed_.count(e.node)) return;
    Effects fx{e.node};
    dispatch_timer(e.t, e.node, e.timer_id, fx);
    absorb(e.t, fx);
  }

  void elect(const Event& e) {
    if (crashed_.count(e.node)) return;
    Effects fx{e.node};
    proposers_[e.node.idx].on_message(Envelope{e.node, e.node, Elect{e.ballot}}, fx);
    absorb(e.t, fx);
  }

  void dispatch_message(SimTime now, const Envelope& env, Effects& fx) {
    int i = env.to.idx;
    switch (env.to.role) {
      case Role::Client: if (in_range(i, clients_)) clients_[i].on_message(now, env, fx); break;
      case Role::Batcher: if (in_range(i, batchers_)) batchers_[i].on_message(env, fx); break;
      case Role::Proposer: if (in_range(i, proposers_)) proposers_[i].on_message(env, fx); break;
      case Role::ProxyLeader: if (in_range(i, proxies_)) proxies_[i].on_message(env, fx); break;
      case Role::Acceptor: if (in_range(i, acceptors_)) acceptors_[i].on_message(env, fx); break;
      case Role::Replica: if (in_range(i, replicas_)) replicas_[i].on_message(env, fx); break;
      case Role::Unbatcher: if (in_range(i, unbatchers_)) unbatchers_[i].on_message(env, fx); break;
    }
  }

  void dispatch_timer(SimTime now, NodeId node, std::int64_t id, Effects& fx) {
    int i = node.idx;
    switch (node.role) {
      case Role::Client: if (in_range(i, clients_)) clients_[i].on_timer(now, id, fx); break;
      case Role::Batcher: if (in_range(i, batchers_)) batchers_[i].on_timer(id, fx); break;
      case Role::Proposer: if (in_range(i, proposers_)) proposers_[i].on_timer(id, fx); break;
      case Role::ProxyLeader: if (in_range(i, proxies_)) proxies_[i].on_timer(id, fx); break;
      case Role::Acceptor: if (in_range(i, acceptors_)) acceptors_[i].on_timer(id, fx); break;
      case Role::Replica: if (in_range(i, replicas_)) replicas_[i].on_timer(id, fx); break;
      case Role::Unbatcher: if (in_range(i, unbatchers_)) unbatchers_[i].on_timer(id, fx); break;
    }
  }

  template <class V>
  static bool in_range(int i, const V& v) {
    return i >= 0 && static_cast<std::size_t>(i) < v.size();
  }

  DeploymentPlan plan_;
  NetModel net_;
  CapacityModel cap_;
  Rng net_rng_;
  Trace trace_;
  TraceCounters counters_;
  RoleEnv env_;

  std::vector<Client> clients_;
  std::vector<Batcher> batchers_;
  std::vector<Proposer> proposers_;
  std::vector<ProxyLeader> proxies_;
  std::vector<Acceptor> acceptors_;
  std::vector<Replica> replicas_;
  std::vector<Unbatcher> unbatchers_;

  std::priority_queue<Event, std::vector<Event>, std::greater<>> pq_;
  std::uint64_t next_seq_ = 0;
  std::set<NodeId> crashed_;
  std::vector<PartitionSpec> partitions_;
  std::map<NodeId, SimTime> busy_until_;
  std::map<std::pair<NodeId, NodeId>, SimTime> fifo_;
  std::int64_t total_ops_ = 0;
};

inline RunResult run_simulation(const DeploymentPlan& plan, const NetModel& net,
                                const CapacityModel& cap, const FaultPlan& faults,
                                std::uint64_t seed, SimTime duration, Timeouts timeouts = {}) {
  return Simulation(plan, net, cap, faults, seed, timeouts).run(duration);
}

// Retries exist to mask faults; in a lossless capacity experiment they would
// only add queue pressure, so push every timeout past the horizon.
inline Timeouts quiescent_timeouts(SimTime duration) {
  Timeouts t;
  t.client_retry = duration;
  t.proxy_retry = duration;
  t.chosen_resend = duration;
  t.phase1_retry = duration;
  t.preread_retry = duration;
  return t;
}

}  // namespace paxkit
