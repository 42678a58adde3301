#pragma once

#include <map>
#include <optional>
#include <set>
#include <vector>

#include "paxkit/roles/common.hpp"
#include "paxkit/roles/proxy_leader.hpp"

namespace paxkit {

enum class Phase { Phase1, Phase2 };

struct LeaderState {
  bool active = false;
  Phase phase = Phase::Phase2;
  Ballot ballot;
  Slot next_slot = 0;
};

// Proposer: sequences batches into slots. The active proposer (leader) runs
// Phase 2 through proxy leaders (compartmentalized) or directly against the
// acceptors (coupled). Phase 1 runs only on an externally triggered election.
class Proposer {
 public:
  Proposer(NodeId self, RoleEnv env, std::uint64_t seed)
      : self_(self), env_(env), rng_(seed) {
    // Proposer 0 is the initial leader at ballot (0, 0): an implicit Phase 1
    // over an empty log.
    if (self.idx == 0) {
      st_.active = true;
      st_.phase = Phase::Phase2;
      st_.ballot = Ballot{0, 0};
    }
  }

  const LeaderState& state() const { return st_; }

  void on_message(const Envelope& env, Effects& fx) {
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, ClientRequest>) on_client_request(m, fx);
          else if constexpr (std::is_same_v<T, BatchProposal>) on_batch(m.batch, fx);
          else if constexpr (std::is_same_v<T, Phase1b>) on_phase1b(m, fx);
          else if constexpr (std::is_same_v<T, Phase2b>) on_phase2b(m, fx);
          else if constexpr (std::is_same_v<T, Nack>) on_nack(m);
          else if constexpr (std::is_same_v<T, Elect>) on_elect(m, fx);
          else if constexpr (std::is_same_v<T, ChosenAck>) chosen_.on_ack(m.slot, env.from.idx);
        },
        env.msg);
  }

  void on_timer(std::int64_t id, Effects& fx) {
    if (id == kPhase1Timer) {
      on_phase1_timeout(fx);
      return;
    }
    if (id == kRecoveryTimer) {
      on_recovery_resend(fx);
      return;
    }
    Slot slot = (id - 2) / 2;
    if ((id - 2) % 2 == 1) {
      chosen_.on_timer(slot, env_.timeouts.max_chosen_resends, env_.timeouts.chosen_resend,
                       resend_timer(slot), fx);
    } else {
      on_coupled_retry(slot, fx);
    }
  }

  void on_client_request(const ClientRequest& m, Effects& fx) {
    if (!st_.active) return;
    const auto& cmd = m.cmd;
    auto it = dedup_.find(cmd.client);
    if (it != dedup_.end()) {
      if (cmd.seq < it->second.seq) return;  // stale retry
      if (cmd.seq == it->second.seq) {
        // Client retransmission: re-propose the original slot so a lost
        // Phase2a cannot leave a permanent hole in the log. slot is kNoSlot
        // while the command is still buffered behind an ongoing Phase 1.
        if (st_.phase == Phase::Phase2 && it->second.slot != kNoSlot)
          propose_at(it->second.slot, it->second.value, fx);
        return;
      }
    }
    Batch batch{{cmd}};
    if (st_.phase == Phase::Phase1) {
      // Park it in the dedup table so the retransmission path above keeps
      // working once the buffered command gets its slot at takeover.
      dedup_[cmd.client] = DedupEntry{cmd.seq, kNoSlot, std::move(batch)};
      buffered_clients_.push_back(cmd.client);
      return;
    }
    Slot slot = st_.next_slot++;
    dedup_[cmd.client] = DedupEntry{cmd.seq, slot, batch};
    propose_at(slot, batch, fx);
  }

  void on_batch(const Batch& batch, Effects& fx) {
    if (!st_.active) return;
    if (st_.phase == Phase::Phase1) {
      buffered_.push_back(batch);
      return;
    }
    propose_at(st_.next_slot++, batch, fx);
  }

  void on_elect(const Elect& m, Effects& fx) {
    if (m.ballot <= st_.ballot) return;
    start_phase1(m.ballot, fx);
  }

  void on_phase1b(const Phase1b& m, Effects& fx) {
    if (st_.phase != Phase::Phase1 || m.ballot != st_.ballot) return;
    if (!phase1_quorum_.count(m.acceptor)) return;
    phase1_responses_[m.acceptor] = m.votes;
    if (phase1_responses_.size() < phase1_quorum_.size()) return;

    // Full read quorum: re-propose the highest-ballot vote per slot, noop-fill
    // the holes, and resume at max reported slot + 1.
    std::map<Slot, Vote> merged;
    for (const auto& [acc, votes] : phase1_responses_) {
      for (const auto& [slot, vote] : votes) {
        auto it = merged.find(slot);
        if (it == merged.end() || it->second.ballot < vote.ballot) merged[slot] = vote;
      }
    }
    Slot max_slot = merged.empty() ? kNoSlot : merged.rbegin()->first;
    st_.phase = Phase::Phase2;
    st_.next_slot = max_slot + 1;
    for (Slot s = 0; s <= max_slot; ++s) {
      auto it = merged.find(s);
      Batch value = it == merged.end() ? noop_batch() : it->second.value;
      // Recovery proposals have no client behind them to retry a lost message,
      // so a single dropped leader-to-proxy Phase2a would hole the log forever.
      // Blind resends are safe: proxies dedup by ballot, replicas dedup Chosen.
      // (The coupled path already retries through coupled_pending_.)
      if (!env_.coupled()) recovery_pending_[s] = value;
      propose_at(s, value, fx);
    }
    recovery_resends_ = 0;
    for (auto& b : buffered_) {  // batches parked by on_batch; nobody retries these
      Slot s = st_.next_slot++;
      if (!env_.coupled()) recovery_pending_[s] = b;
      propose_at(s, b, fx);
    }
    buffered_.clear();
    for (ClientId c : buffered_clients_) {
      auto& e = dedup_[c];
      if (e.slot != kNoSlot) continue;
      e.slot = st_.next_slot++;
      // The client retries too — but only until it gets a reply, which can
      // come from the same command recovered under its pre-takeover slot.
      if (!env_.coupled()) recovery_pending_[e.slot] = e.value;
      propose_at(e.slot, e.value, fx);
    }
    buffered_clients_.clear();
    if (!recovery_pending_.empty()) fx.timer(env_.timeouts.phase1_retry, kRecoveryTimer);
    announce_leadership(fx);
  }

  void on_recovery_resend(Effects& fx) {
    if (!st_.active || st_.phase != Phase::Phase2 || recovery_pending_.empty()) return;
    if (++recovery_resends_ > kMaxRecoveryResends) {
      recovery_pending_.clear();
      return;
    }
    for (const auto& [slot, value] : recovery_pending_) propose_at(slot, value, fx);
    fx.timer(env_.timeouts.phase1_retry, kRecoveryTimer);
  }

  void on_phase2b(const Phase2b& m, Effects& fx) {
    // Coupled variant only: the leader gathers acks itself.
    auto it = coupled_pending_.find(m.slot);
    if (it == coupled_pending_.end() || it->second.ballot != m.ballot) return;
    auto& p = it->second;
    p.acked.insert(m.acceptor);
    if (env_.majority().is_quorum(p.acked)) {
      env_.trace->record_chosen(m.slot, p.value);
      chosen_.broadcast(m.slot, p.value, env_.plan->num_replicas, env_.timeouts.chosen_resend,
                        resend_timer(m.slot), fx);
      coupled_pending_.erase(it);
    }
  }

  void on_nack(const Nack& m) {
    if (st_.active && m.promised > st_.ballot) st_.active = false;  // deposed
  }

  void on_phase1_timeout(Effects& fx) {
    if (!st_.active || st_.phase != Phase::Phase1) return;
    // Lost Phase1a/Phase1b: bump the round and start over.
    start_phase1(Ballot{st_.ballot.round + 1, self_.idx}, fx);
  }

  void on_coupled_retry(Slot slot, Effects& fx) {
    auto it = coupled_pending_.find(slot);
    if (it == coupled_pending_.end()) return;
    auto& p = it->second;
    if (++p.retries > env_.timeouts.max_phase2_cycles) {
      coupled_pending_.erase(it);
      return;
    }
    for (int a = 0; a < env_.majority().size(); ++a)  // widen to all acceptors
      fx.send(NodeId{Role::Acceptor, a}, Phase2a{slot, p.ballot, p.value});
    fx.timer(env_.timeouts.proxy_retry, retry_timer(slot));
  }

 private:
  static constexpr std::int64_t kPhase1Timer = 0;
  static constexpr std::int64_t kRecoveryTimer = 1;
  static constexpr int kMaxRecoveryResends = 10;
  static std::int64_t retry_timer(Slot slot) { return 2 + slot * 2; }
  static std::int64_t resend_timer(Slot slot) { return 2 + slot * 2 + 1; }

  struct DedupEntry {
    std::int64_t seq = -1;
    Slot slot = kNoSlot;
    Batch value;
  };

  struct CoupledPending {
    Ballot ballot;
    Batch value;
    AcceptorSet acked;
    int retries = 0;
  };

  void start_phase1(Ballot b, Effects& fx) {
    st_.active = true;
    st_.phase = Phase::Phase1;
    st_.ballot = b;
    phase1_responses_.clear();
    phase1_quorum_.clear();
    recovery_pending_.clear();
    // Pre-takeover slot assignments are void (the merge decides those slots);
    // commands still buffered for this takeover (slot == kNoSlot) stay parked.
    for (auto it = dedup_.begin(); it != dedup_.end();)
      it = it->second.slot != kNoSlot ? dedup_.erase(it) : std::next(it);
    coupled_pending_.clear();
    for (int a : pick_read_quorum()) {
      phase1_quorum_.insert(a);
      fx.send(NodeId{Role::Acceptor, a}, Phase1a{b, 0});
    }
    fx.timer(env_.timeouts.phase1_retry, kPhase1Timer);
  }

  std::vector<int> pick_read_quorum() {
    if (env_.coupled()) {
      // Any f+1 of the 2f+1 acceptors.
      return pick_subset(env_.majority().size(), env_.majority().quorum_size());
    }
    auto grid = env_.grid();
    return grid.row_members(rng_.below_int(grid.rows()));
  }

  std::vector<int> pick_subset(int n, int k) {
    std::vector<int> ids(n);
    for (int i = 0; i < n; ++i) ids[i] = i;
    for (int i = 0; i < k; ++i) std::swap(ids[i], ids[i + rng_.below_int(n - i)]);
    ids.resize(k);
    return ids;
  }

  void propose_at(Slot slot, const Batch& value, Effects& fx) {
    if (env_.coupled()) {
      CoupledPending p;
      p.ballot = st_.ballot;
      p.value = value;
      coupled_pending_[slot] = p;
      for (int a : pick_subset(env_.majority().size(), env_.majority().quorum_size()))
        fx.send(NodeId{Role::Acceptor, a}, Phase2a{slot, st_.ballot, value});
      fx.timer(env_.timeouts.proxy_retry, retry_timer(slot));
      return;
    }
    int proxy = env_.plan->selection == SelectionPolicy::RoundRobin
                    ? static_cast<int>(proxy_rotation_++ % env_.plan->num_proxy_leaders)
                    : rng_.below_int(env_.plan->num_proxy_leaders);
    fx.send(NodeId{Role::ProxyLeader, proxy}, Phase2a{slot, st_.ballot, value});
  }

  void announce_leadership(Effects& fx) {
    LeaderHint hint{self_.idx};
    if (env_.plan->workload)
      for (int c = 0; c < env_.plan->workload->num_clients; ++c)
        fx.send(NodeId{Role::Client, c}, hint);
    for (int b = 0; b < env_.plan->num_batchers; ++b) fx.send(NodeId{Role::Batcher, b}, hint);
  }

  NodeId self_;
  RoleEnv env_;
  Rng rng_;
  LeaderState st_;
  std::uint64_t proxy_rotation_ = 0;
  std::vector<Batch> buffered_;
  std::vector<ClientId> buffered_clients_;  // flush order for parked commands
  std::map<ClientId, DedupEntry> dedup_;
  std::set<int> phase1_quorum_;
  std::map<int, std::map<Slot, Vote>> phase1_responses_;
  std::map<Slot, CoupledPending> coupled_pending_;
  std::map<Slot, Batch> recovery_pending_;
  int recovery_resends_ = 0;
  ChosenBroadcaster chosen_;
};

}  // namespace paxkit
