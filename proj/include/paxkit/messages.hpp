#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "paxkit/core.hpp"

namespace paxkit {

enum class Role : std::int8_t {
  Client,
  Batcher,
  Proposer,
  ProxyLeader,
  Acceptor,
  Replica,
  Unbatcher,
};

inline const char* role_name(Role r) {
  switch (r) {
    case Role::Client: return "client";
    case Role::Batcher: return "batcher";
    case Role::Proposer: return "proposer";
    case Role::ProxyLeader: return "proxy";
    case Role::Acceptor: return "acceptor";
    case Role::Replica: return "replica";
    case Role::Unbatcher: return "unbatcher";
  }
  return "?";
}

struct NodeId {
  Role role = Role::Client;
  int idx = 0;

  friend auto operator<=>(const NodeId&, const NodeId&) = default;

  std::string str() const { return std::string(role_name(role)) + "/" + std::to_string(idx); }
};

// Identity of one read orchestration. origin < 0 encodes a batcher
// (origin = -(batcher index + 1)); otherwise a client id. round distinguishes
// restarted PreRead rounds so stale acks are discarded.
struct ReadId {
  std::int64_t origin = 0;
  std::int64_t seq = 0;
  std::int32_t round = 0;

  friend auto operator<=>(const ReadId&, const ReadId&) = default;
};

struct Vote {
  Ballot ballot;
  Batch value;

  friend bool operator==(const Vote&, const Vote&) = default;
};

// -- wire vocabulary --

struct ClientRequest {  // client -> proposer (write) or client -> batcher (any op)
  Command cmd;
};
struct BatchProposal {  // batcher -> leader
  Batch batch;
};
struct Phase1a {
  Ballot ballot;
  Slot from_slot = 0;
};
struct Phase1b {
  Ballot ballot;
  int acceptor = 0;
  std::map<Slot, Vote> votes;  // every vote with slot >= Phase1a.from_slot
};
struct Phase2a {
  Slot slot = 0;
  Ballot ballot;
  Batch value;
};
struct Phase2b {
  Slot slot = 0;
  Ballot ballot;
  int acceptor = 0;
};
struct Nack {
  Ballot promised;
};
struct Chosen {
  Slot slot = 0;
  Batch value;
};
struct ChosenAck {
  Slot slot = 0;
};
struct PreRead {
  ReadId id;
};
struct PreReadAck {
  ReadId id;
  int acceptor = 0;
  Slot vote_watermark = kNoSlot;
};
struct ReadRequest {
  ReadId id;
  std::vector<Command> reads;
  Slot required = kNoSlot;
  ReadConsistency level = ReadConsistency::Linearizable;
  bool reply_via_unbatcher = false;
};
struct ReplyEntry {
  ClientId client = 0;
  std::int64_t seq = 0;
  std::optional<std::string> out;  // nullopt = absent key
  Slot slot = kNoSlot;             // log index the reply reflects
};
struct Reply {  // to a client; carries the slot index for watermark bookkeeping
  ReadId id;    // round is meaningful for read replies only
  ReplyEntry entry;
};
struct ResultBatch {  // replica -> unbatcher
  std::vector<ReplyEntry> entries;
};
struct Elect {  // harness -> proposer: take over leadership at this ballot
  Ballot ballot;
};
struct LeaderHint {  // new leader -> clients and batchers
  int proposer = 0;
};

using Message =
    std::variant<ClientRequest, BatchProposal, Phase1a, Phase1b, Phase2a, Phase2b, Nack, Chosen,
                 ChosenAck, PreRead, PreReadAck, ReadRequest, Reply, ResultBatch, Elect, LeaderHint>;

inline const char* message_type(const Message& m) {
  static constexpr const char* names[] = {
      "client_request", "batch_proposal", "phase1a", "phase1b", "phase2a", "phase2b",
      "nack",           "chosen",         "chosen_ack", "pre_read", "pre_read_ack",
      "read_request",   "reply",          "result_batch", "elect", "leader_hint"};
  return names[m.index()];
}

struct Envelope {
  NodeId from;
  NodeId to;
  Message msg;
};

struct TimerRequest {
  SimTime delay = 0;
  std::int64_t id = 0;
};

// Outputs of one handler invocation: messages to send and timers to arm.
struct Effects {
  explicit Effects(NodeId s = {}) : self(s) {}

  NodeId self;
  std::vector<Envelope> msgs;
  std::vector<TimerRequest> timers;

  void send(NodeId to, Message m) { msgs.push_back(Envelope{self, to, std::move(m)}); }
  void timer(SimTime delay, std::int64_t id) { timers.push_back(TimerRequest{delay, id}); }
};

// Seeded RNG with stable draws across platforms (avoids distribution objects).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }
  std::uint64_t below(std::uint64_t n) { return n ? gen_() % n : 0; }
  int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  SimTime between(SimTime lo, SimTime hi) {  // inclusive
    return lo + static_cast<SimTime>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

 private:
  std::mt19937_64 gen_;
};

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t node_salt(NodeId n) {
  return (static_cast<std::uint64_t>(n.role) << 32) | static_cast<std::uint32_t>(n.idx);
}

}  // namespace paxkit
