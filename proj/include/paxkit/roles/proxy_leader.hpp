#pragma once

#include <map>
#include <set>

#include "paxkit/roles/common.hpp"

namespace paxkit {

// Tracks Chosen broadcasts until every replica has acked, resending on a timer.
// Shared by proxy leaders and the coupled-variant leader.
struct ChosenBroadcaster {
  struct Entry {
    Batch value;
    std::set<int> unacked;
    int resends = 0;
  };
  std::map<Slot, Entry> entries;

  void broadcast(Slot slot, const Batch& value, int num_replicas, SimTime resend_after,
                 std::int64_t timer_id, Effects& fx) {
    Entry e;
    e.value = value;
    for (int r = 0; r < num_replicas; ++r) {
      e.unacked.insert(r);
      fx.send(NodeId{Role::Replica, r}, Chosen{slot, value});
    }
    entries[slot] = std::move(e);
    fx.timer(resend_after, timer_id);
  }

  void on_ack(Slot slot, int replica) {
    auto it = entries.find(slot);
    if (it == entries.end()) return;
    it->second.unacked.erase(replica);
    if (it->second.unacked.empty()) entries.erase(it);
  }

  void on_timer(Slot slot, int max_resends, SimTime resend_after, std::int64_t timer_id,
                Effects& fx) {
    auto it = entries.find(slot);
    if (it == entries.end()) return;
    if (++it->second.resends > max_resends) {
      entries.erase(it);  // crashed replicas never ack; stop trying
      return;
    }
    for (int r : it->second.unacked) fx.send(NodeId{Role::Replica, r}, Chosen{slot, it->second.value});
    fx.timer(resend_after, timer_id);
  }
};

// Relays Phase2a to one acceptor column (thrifty), gathers Phase2b until the
// acked set certifies a write quorum, then broadcasts Chosen to the replicas.
class ProxyLeader {
 public:
  ProxyLeader(NodeId self, RoleEnv env, std::uint64_t seed)
      : self_(self), env_(env), rng_(seed) {}

  struct Pending {
    Ballot ballot;
    Batch value;
    AcceptorSet contacted;
    AcceptorSet acked;
    std::set<int> tried_columns;
    int retries = 0;
  };

  const std::map<Slot, Pending>& pending() const { return pending_; }

  void on_message(const Envelope& env, Effects& fx) {
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Phase2a>) on_phase2a(m, fx);
          else if constexpr (std::is_same_v<T, Phase2b>) on_phase2b(m, fx);
          else if constexpr (std::is_same_v<T, Nack>) on_nack(m);
          else if constexpr (std::is_same_v<T, ChosenAck>) chosen_.on_ack(m.slot, env.from.idx);
        },
        env.msg);
  }

  void on_timer(std::int64_t id, Effects& fx) {
    Slot slot = id / 2;
    if (id % 2 == 1) {
      chosen_.on_timer(slot, env_.timeouts.max_chosen_resends, env_.timeouts.chosen_resend,
                       resend_timer(slot), fx);
    } else {
      on_retry_timeout(slot, fx);
    }
  }

  void on_phase2a(const Phase2a& m, Effects& fx) {
    auto it = pending_.find(m.slot);
    if (it != pending_.end()) {
      if (m.ballot <= it->second.ballot) return;  // duplicate or stale
      pending_.erase(it);
    }
    Pending p;
    p.ballot = m.ballot;
    p.value = m.value;
    contact_column(m.slot, p, fx);
    pending_[m.slot] = std::move(p);
    fx.timer(env_.timeouts.proxy_retry, retry_timer(m.slot));
  }

  void on_phase2b(const Phase2b& m, Effects& fx) {
    auto it = pending_.find(m.slot);
    if (it == pending_.end() || it->second.ballot != m.ballot) return;
    auto& p = it->second;
    p.acked.insert(m.acceptor);
    if (env_.grid().is_write_quorum(p.acked)) {
      env_.trace->record_chosen(m.slot, p.value);
      chosen_.broadcast(m.slot, p.value, env_.plan->num_replicas, env_.timeouts.chosen_resend,
                        resend_timer(m.slot), fx);
      pending_.erase(it);
    }
  }

  void on_nack(const Nack& m) {
    // A higher ballot is active; drop entries the new leader will re-propose.
    for (auto it = pending_.begin(); it != pending_.end();) {
      if (it->second.ballot < m.promised) it = pending_.erase(it);
      else ++it;
    }
  }

  void on_retry_timeout(Slot slot, Effects& fx) {
    auto it = pending_.find(slot);
    if (it == pending_.end()) return;
    auto& p = it->second;
    auto grid = env_.grid();
    if (static_cast<int>(p.tried_columns.size()) >= grid.cols()) {
      // Every column failed a round; drops are transient, so start over.
      // Recovery noops have no client to retry them, so giving up here could
      // leave a permanent hole in the log.
      env_.trace->proxy_give_ups += 1;
      if (++p.retries > env_.timeouts.max_phase2_cycles) {
        pending_.erase(it);
        return;
      }
      p.tried_columns.clear();
    }
    contact_column(slot, p, fx);
    fx.timer(env_.timeouts.proxy_retry, retry_timer(slot));
  }

 private:
  static std::int64_t retry_timer(Slot slot) { return slot * 2; }
  static std::int64_t resend_timer(Slot slot) { return slot * 2 + 1; }

  // Draw a not-yet-tried column uniformly and relay Phase2a to its members.
  void contact_column(Slot slot, Pending& p, Effects& fx) {
    auto grid = env_.grid();
    std::vector<int> untried;
    for (int c = 0; c < grid.cols(); ++c)
      if (!p.tried_columns.count(c)) untried.push_back(c);
    if (untried.empty()) return;
    int col = untried[rng_.below_int(static_cast<int>(untried.size()))];
    p.tried_columns.insert(col);
    for (int a : grid.column_members(col)) {
      p.contacted.insert(a);
      fx.send(NodeId{Role::Acceptor, a}, Phase2a{slot, p.ballot, p.value});
    }
  }

  NodeId self_;
  RoleEnv env_;
  Rng rng_;
  std::map<Slot, Pending> pending_;
  ChosenBroadcaster chosen_;
};

}  // namespace paxkit
