#pragma once

#include <map>
#include <vector>

#include "paxkit/roles/common.hpp"

namespace paxkit {

// Aggregates client commands into batches. Write batches go to the leader as
// one BatchProposal; read batches get a single shared PreRead round and then
// one ReadRequest, with replies fanned back out by an unbatcher.
class Batcher {
 public:
  Batcher(NodeId self, RoleEnv env, std::uint64_t seed)
      : self_(self), env_(env), rng_(seed) {}

  void on_message(const Envelope& env, Effects& fx) {
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, ClientRequest>) on_request(m.cmd, fx);
          else if constexpr (std::is_same_v<T, PreReadAck>) on_preread_ack(m, fx);
          else if constexpr (std::is_same_v<T, LeaderHint>) leader_ = m.proposer;
        },
        env.msg);
  }

  void on_timer(std::int64_t id, Effects& fx) {
    std::int64_t epoch = id / 4;
    switch (id % 4) {
      case kWriteFlush:
        if (epoch == write_epoch_ && !write_buf_.empty()) flush_writes(fx);
        break;
      case kReadFlush:
        if (epoch == read_epoch_ && !read_buf_.empty()) flush_reads(fx);
        break;
      case kPreReadRetry:
        restart_preread(epoch, fx);
        break;
    }
  }

  void on_request(const Command& cmd, Effects& fx) {
    auto& buf = cmd.type == OpType::Read ? read_buf_ : write_buf_;
    for (const auto& c : buf)
      if (c.client == cmd.client && c.seq == cmd.seq) return;  // retried while buffered
    bool first = buf.empty();
    buf.push_back(cmd);
    bool is_read = cmd.type == OpType::Read;
    if (static_cast<int>(buf.size()) >= env_.plan->batch_size) {
      is_read ? flush_reads(fx) : flush_writes(fx);
    } else if (first) {
      std::int64_t epoch = is_read ? read_epoch_ : write_epoch_;
      fx.timer(env_.plan->batch_timeout, epoch * 4 + (is_read ? kReadFlush : kWriteFlush));
    }
  }

  void on_preread_ack(const PreReadAck& m, Effects& fx) {
    auto it = inflight_.find(m.id.seq);
    if (it == inflight_.end() || m.id.round != it->second.round) return;
    auto& rb = it->second;
    rb.acks[m.acceptor] = m.vote_watermark;
    for (int a : rb.row)
      if (!rb.acks.count(a)) return;
    Slot required = kNoSlot;
    for (const auto& [a, wm] : rb.acks) required = std::max(required, wm);
    int replica = rng_.below_int(env_.plan->num_replicas);
    ReadId id{-(static_cast<std::int64_t>(self_.idx) + 1), it->first, rb.round};
    fx.send(NodeId{Role::Replica, replica},
            ReadRequest{id, rb.reads, required, ReadConsistency::Linearizable, true});
    inflight_.erase(it);
  }

 private:
  static constexpr int kWriteFlush = 0, kReadFlush = 1, kPreReadRetry = 2;

  void flush_writes(Effects& fx) {
    fx.send(NodeId{Role::Proposer, leader_}, BatchProposal{Batch{std::move(write_buf_)}});
    write_buf_.clear();
    ++write_epoch_;
  }

  void flush_reads(Effects& fx) {
    std::int64_t seq = next_read_batch_++;
    auto& rb = inflight_[seq];
    rb.reads = std::move(read_buf_);
    read_buf_.clear();
    ++read_epoch_;
    start_preread(seq, rb, fx);
  }

  struct ReadBatch {
    std::vector<Command> reads;
    std::int32_t round = 0;
    std::vector<int> row;
    std::map<int, Slot> acks;
  };

  void start_preread(std::int64_t seq, ReadBatch& rb, Effects& fx) {
    auto grid = env_.grid();
    ++rb.round;
    rb.row = grid.row_members(rng_.below_int(grid.rows()));
    rb.acks.clear();
    ReadId id{-(static_cast<std::int64_t>(self_.idx) + 1), seq, rb.round};
    for (int a : rb.row) fx.send(NodeId{Role::Acceptor, a}, PreRead{id});
    fx.timer(env_.timeouts.preread_retry, seq * 4 + kPreReadRetry);
  }

  void restart_preread(std::int64_t seq, Effects& fx) {
    auto it = inflight_.find(seq);
    if (it == inflight_.end()) return;  // already answered
    start_preread(seq, it->second, fx);
  }

  NodeId self_;
  RoleEnv env_;
  Rng rng_;
  int leader_ = 0;
  std::vector<Command> write_buf_;
  std::vector<Command> read_buf_;
  std::int64_t write_epoch_ = 0;
  std::int64_t read_epoch_ = 0;
  std::int64_t next_read_batch_ = 0;
  std::map<std::int64_t, ReadBatch> inflight_;
};

// Fans a ResultBatch back out to the originating clients.
class Unbatcher {
 public:
  Unbatcher(NodeId self, RoleEnv env) : self_(self), env_(env) {}

  void on_message(const Envelope& env, Effects& fx) {
    if (const auto* rb = std::get_if<ResultBatch>(&env.msg)) on_results(*rb, fx);
  }

  void on_timer(std::int64_t, Effects&) {}

  void on_results(const ResultBatch& rb, Effects& fx) {
    if (rb.entries.empty()) {
      env_.trace->violation("EmptyResultBatch at " + self_.str());
      return;
    }
    env_.trace->unbatcher_entries[self_.idx] += static_cast<std::int64_t>(rb.entries.size());
    for (const auto& e : rb.entries)
      fx.send(NodeId{Role::Client, static_cast<int>(e.client)},
              Reply{ReadId{e.client, e.seq, 0}, e});
  }

 private:
  NodeId self_;
  RoleEnv env_;
};

}  // namespace paxkit
