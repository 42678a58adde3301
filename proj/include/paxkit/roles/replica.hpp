#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "paxkit/roles/common.hpp"

namespace paxkit {

// Executes the chosen log in slot order against an in-memory KV map and
// answers reads. Replica (slot mod n) replies for slot s; other replicas
// execute silently.
class Replica {
 public:
  Replica(NodeId self, RoleEnv env, std::uint64_t seed)
      : self_(self), env_(env), rng_(seed) {}

  Slot executed_watermark() const { return executed_; }
  const std::map<std::string, std::string>& kv() const { return kv_; }

  void on_message(const Envelope& env, Effects& fx) {
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Chosen>) on_chosen(env.from, m, fx);
          else if constexpr (std::is_same_v<T, ReadRequest>) on_read(m, fx);
        },
        env.msg);
  }

  void on_timer(std::int64_t, Effects&) {}

  void on_chosen(NodeId from, const Chosen& m, Effects& fx) {
    fx.send(from, ChosenAck{m.slot});
    auto [it, inserted] = log_.emplace(m.slot, m.value);
    if (!inserted) {
      // Duplicate Chosen: a client retry re-ran Phase 2 for this slot, so the
      // original reply may have been lost. Re-send from the dedup cache.
      if (m.slot <= executed_ && responsible(m.slot)) resend_cached(m.value, fx);
      return;
    }
    env_.trace->record_chosen(m.slot, m.value);
    while (true) {
      auto next = log_.find(executed_ + 1);
      if (next == log_.end()) break;
      execute_slot(executed_ + 1, next->second, fx);
      ++executed_;
    }
    drain_pending_reads(fx);
  }

  void on_read(const ReadRequest& m, Effects& fx) {
    if (m.level == ReadConsistency::Eventual || m.required <= executed_) {
      answer_read(m, fx);
    } else {
      pending_reads_.push_back(m);
    }
  }

 private:
  struct ClientEntry {
    std::int64_t seq = -1;
    std::optional<std::string> out;
    Slot slot = kNoSlot;
  };

  bool responsible(Slot s) const {
    return s % env_.plan->num_replicas == self_.idx;
  }

  void execute_slot(Slot slot, const Batch& batch, Effects& fx) {
    std::vector<ReplyEntry> replies;
    for (const auto& cmd : batch.commands) {
      if (cmd.type != OpType::Write) continue;  // noop or stray read
      auto& ce = table_[cmd.client];
      if (cmd.seq <= ce.seq) continue;  // already applied via an earlier slot
      kv_[cmd.key] = cmd.value;
      ce = ClientEntry{cmd.seq, cmd.value, slot};
      if (responsible(slot)) replies.push_back(ReplyEntry{cmd.client, cmd.seq, cmd.value, slot});
    }
    if (replies.empty()) return;
    env_.trace->responders[slot].insert(self_.idx);
    if (env_.plan->batching_enabled) {
      fx.send(pick_unbatcher(), ResultBatch{std::move(replies)});
    } else {
      for (auto& e : replies)
        fx.send(NodeId{Role::Client, static_cast<int>(e.client)},
                Reply{ReadId{e.client, e.seq, 0}, e});
    }
  }

  void resend_cached(const Batch& batch, Effects& fx) {
    std::vector<ReplyEntry> replies;
    for (const auto& cmd : batch.commands) {
      if (cmd.type != OpType::Write) continue;
      auto it = table_.find(cmd.client);
      if (it == table_.end() || it->second.seq != cmd.seq) continue;
      replies.push_back(ReplyEntry{cmd.client, cmd.seq, it->second.out, it->second.slot});
    }
    if (replies.empty()) return;
    if (env_.plan->batching_enabled) {
      fx.send(pick_unbatcher(), ResultBatch{std::move(replies)});
    } else {
      for (auto& e : replies)
        fx.send(NodeId{Role::Client, static_cast<int>(e.client)},
                Reply{ReadId{e.client, e.seq, 0}, e});
    }
  }

  void answer_read(const ReadRequest& m, Effects& fx) {
    std::vector<ReplyEntry> entries;
    for (const auto& cmd : m.reads) {
      auto it = kv_.find(cmd.key);
      std::optional<std::string> out;
      if (it != kv_.end()) out = it->second;
      entries.push_back(ReplyEntry{cmd.client, cmd.seq, out, executed_});
      if (m.level == ReadConsistency::Eventual)
        env_.trace->eventual_obs.push_back({executed_, cmd.key, out});
    }
    if (m.reply_via_unbatcher) {
      fx.send(pick_unbatcher(), ResultBatch{std::move(entries)});
    } else {
      for (auto& e : entries)
        fx.send(NodeId{Role::Client, static_cast<int>(e.client)}, Reply{m.id, e});
    }
  }

  void drain_pending_reads(Effects& fx) {
    std::vector<ReadRequest> still_waiting;
    for (auto& r : pending_reads_) {
      if (r.required <= executed_) answer_read(r, fx);
      else still_waiting.push_back(std::move(r));
    }
    pending_reads_ = std::move(still_waiting);
  }

  NodeId pick_unbatcher() {
    return NodeId{Role::Unbatcher, rng_.below_int(env_.plan->num_unbatchers)};
  }

  NodeId self_;
  RoleEnv env_;
  Rng rng_;
  std::map<Slot, Batch> log_;
  Slot executed_ = kNoSlot;
  std::map<std::string, std::string> kv_;
  std::map<ClientId, ClientEntry> table_;
  std::vector<ReadRequest> pending_reads_;
};

}  // namespace paxkit
