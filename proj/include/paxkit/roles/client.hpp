#pragma once

#include <map>
#include <optional>
#include <vector>

#include "paxkit/roles/common.hpp"
#include "paxkit/workload.hpp"

namespace paxkit {

// Closed-loop client: one outstanding operation at a time, retried until a
// reply arrives. Writes go to the leader (or a batcher); reads take the
// configured consistency path.
class Client {
 public:
  Client(NodeId self, RoleEnv env, std::uint64_t seed, OpStream stream)
      : self_(self), env_(env), rng_(seed), stream_(std::move(stream)) {}

  bool done() const { return next_op_ >= stream_.total(); }
  std::int64_t completed() const { return next_op_; }
  Slot seq_watermark() const { return seq_watermark_; }

  void start(SimTime now, Effects& fx) { issue_next(now, fx); }

  void on_message(SimTime now, const Envelope& env, Effects& fx) {
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Reply>) on_reply(now, m, fx);
          else if constexpr (std::is_same_v<T, PreReadAck>) on_preread_ack(now, m, fx);
          else if constexpr (std::is_same_v<T, LeaderHint>) leader_ = m.proposer;
        },
        env.msg);
  }

  void on_timer(SimTime now, std::int64_t id, Effects& fx) {
    if (done() || id != attempt_) return;  // superseded or finished
    retry(now, fx);
  }

 private:
  const Command& current() const { return cmd_; }

  void issue_next(SimTime now, Effects& fx) {
    if (done()) return;
    cmd_ = stream_.next(next_op_);
    env_.trace->invoke(now, current());
    dispatch(now, fx, /*fresh=*/true);
  }

  void retry(SimTime now, Effects& fx) {
    const auto& cmd = current();
    if (cmd.type == OpType::Write && !env_.plan->batching_enabled && ++write_retries_ % 2 == 0)
      leader_ = (leader_ + 1) % env_.plan->num_proposers;  // maybe it crashed
    dispatch(now, fx, /*fresh=*/false);
  }

  void dispatch(SimTime now, Effects& fx, bool fresh) {
    const auto& cmd = current();
    ++attempt_;
    if (env_.plan->batching_enabled) {
      // Sticky batcher so size-triggered flushes stay deterministic.
      int b = static_cast<int>(self_.idx % env_.plan->num_batchers);
      fx.send(NodeId{Role::Batcher, b}, ClientRequest{cmd});
      fx.timer(env_.timeouts.client_retry, attempt_);
      return;
    }
    if (cmd.type == OpType::Write) {
      if (fresh) write_retries_ = 0;
      fx.send(NodeId{Role::Proposer, leader_}, ClientRequest{cmd});
      fx.timer(env_.timeouts.client_retry, attempt_);
      return;
    }
    switch (env_.plan->workload ? env_.plan->workload->read_consistency
                                : ReadConsistency::Linearizable) {
      case ReadConsistency::Linearizable: start_preread(now, fx); break;
      case ReadConsistency::Sequential:
        send_read(seq_watermark_, ReadConsistency::Sequential, fx);
        break;
      case ReadConsistency::Eventual:
        send_read(kNoSlot, ReadConsistency::Eventual, fx);
        break;
    }
  }

  // Linearizable read, step 1: ask one full acceptor row for vote watermarks.
  void start_preread(SimTime now, Effects& fx) {
    auto grid = env_.grid();
    ++read_round_;
    preread_.emplace();
    preread_->start = now;
    preread_->row = grid.row_members(rng_.below_int(grid.rows()));
    ReadId id{self_.idx, current().seq, read_round_};
    for (int a : preread_->row) fx.send(NodeId{Role::Acceptor, a}, PreRead{id});
    fx.timer(env_.timeouts.preread_retry, attempt_);
  }

  void on_preread_ack(SimTime, const PreReadAck& m, Effects& fx) {
    if (done() || !preread_) return;
    ReadId expect{self_.idx, current().seq, read_round_};
    if (m.id != expect) return;  // stale round
    preread_->acks[m.acceptor] = m.vote_watermark;
    for (int a : preread_->row)
      if (!preread_->acks.count(a)) return;
    Slot required = kNoSlot;
    for (const auto& [a, wm] : preread_->acks) required = std::max(required, wm);
    env_.trace->lin_reads.push_back({preread_->start, required});
    preread_.reset();
    ++attempt_;  // the preread timer no longer applies
    send_read(required, ReadConsistency::Linearizable, fx);
  }

  void send_read(Slot required, ReadConsistency level, Effects& fx) {
    ReadId id{self_.idx, current().seq, read_round_};
    int r = env_.plan->selection == SelectionPolicy::RoundRobin
                ? static_cast<int>(replica_rotation_++ % env_.plan->num_replicas)
                : rng_.below_int(env_.plan->num_replicas);
    fx.send(NodeId{Role::Replica, r}, ReadRequest{id, {current()}, required, level, false});
    fx.timer(env_.timeouts.client_retry, attempt_);
  }

  void on_reply(SimTime now, const Reply& m, Effects& fx) {
    if (done()) return;
    const auto& cmd = current();
    if (m.entry.client != self_.idx || m.entry.seq != cmd.seq) return;  // stale
    if (cmd.type == OpType::Read && !env_.plan->batching_enabled &&
        m.id.round != read_round_)
      return;  // answer to an abandoned read round
    env_.trace->respond(now, cmd, m.entry.out);
    if (cmd.type == OpType::Write) {
      env_.trace->write_completions.push_back({self_.idx, cmd.seq, m.entry.slot, now});
    } else {
      seq_watermark_ = std::max(seq_watermark_, m.entry.slot);
      if (env_.plan->workload &&
          env_.plan->workload->read_consistency == ReadConsistency::Sequential)
        env_.trace->seq_obs.push_back({self_.idx, m.entry.slot});
    }
    preread_.reset();
    ++next_op_;
    ++attempt_;
    issue_next(now, fx);
  }

  struct PreReadState {
    SimTime start = 0;
    std::vector<int> row;
    std::map<int, Slot> acks;
  };

  NodeId self_;
  RoleEnv env_;
  Rng rng_;
  OpStream stream_;
  Command cmd_;
  std::int64_t next_op_ = 0;
  int leader_ = 0;
  int write_retries_ = 0;
  std::int64_t attempt_ = 0;
  std::int32_t read_round_ = 0;
  std::uint64_t replica_rotation_ = 0;
  Slot seq_watermark_ = kNoSlot;
  std::optional<PreReadState> preread_;
};

}  // namespace paxkit
