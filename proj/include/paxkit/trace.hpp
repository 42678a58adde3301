#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "paxkit/history.hpp"
#include "paxkit/messages.hpp"

namespace paxkit {

// Per-node and per-message-type counters collected while a run executes.
struct TraceCounters {
  std::map<NodeId, std::int64_t> messages_in;
  std::map<NodeId, std::int64_t> messages_out;
  std::map<std::pair<NodeId, std::string>, std::int64_t> typed_in;
  std::map<std::pair<NodeId, std::string>, std::int64_t> typed_out;
  std::int64_t proxy_give_ups = 0;

  std::int64_t in(NodeId n) const {
    auto it = messages_in.find(n);
    return it == messages_in.end() ? 0 : it->second;
  }
  std::int64_t out(NodeId n) const {
    auto it = messages_out.find(n);
    return it == messages_out.end() ? 0 : it->second;
  }
  std::int64_t in_of(NodeId n, const std::string& type) const {
    auto it = typed_in.find({n, type});
    return it == typed_in.end() ? 0 : it->second;
  }
  std::int64_t out_of(NodeId n, const std::string& type) const {
    auto it = typed_out.find({n, type});
    return it == typed_out.end() ? 0 : it->second;
  }
};

// Audit-relevant facts recorded during a run; consumed by audit_trace.
struct Trace {
  History history;

  // slot -> first value observed chosen; conflicts are violations
  std::map<Slot, Batch> chosen_log;

  // executed slot -> replicas that emitted the reply / result batch for it
  std::map<Slot, std::set<int>> responders;

  struct WriteCompletion {
    ClientId client = 0;
    std::int64_t seq = 0;
    Slot slot = kNoSlot;
    SimTime response = 0;
  };
  std::vector<WriteCompletion> write_completions;

  struct LinReadAudit {
    SimTime preread_start = 0;
    Slot watermark = kNoSlot;
  };
  std::vector<LinReadAudit> lin_reads;

  struct SeqReadObs {
    ClientId client = 0;
    Slot index = kNoSlot;
  };
  std::vector<SeqReadObs> seq_obs;  // in per-client observation order

  struct EventualReadObs {
    Slot index = kNoSlot;
    std::string key;
    std::optional<std::string> out;
  };
  std::vector<EventualReadObs> eventual_obs;

  std::vector<std::string> violations;

  // Unavailability signals: a proxy leader exhausted every column for a slot.
  std::int64_t proxy_give_ups = 0;

  // unbatcher idx -> total result entries received (fan-out accounting)
  std::map<int, std::int64_t> unbatcher_entries;

  void violation(std::string what) { violations.push_back(std::move(what)); }

  void record_chosen(Slot s, const Batch& value) {
    auto [it, inserted] = chosen_log.emplace(s, value);
    if (!inserted && !(it->second == value))
      violation("AgreementViolation at slot " + std::to_string(s));
  }

  void invoke(SimTime t, const Command& cmd) {
    HistEvent e;
    e.t = t;
    e.inv = true;
    e.client = cmd.client;
    e.seq = cmd.seq;
    e.type = cmd.type;
    e.key = cmd.key;
    if (cmd.type == OpType::Write) e.value = cmd.value;
    history.events.push_back(std::move(e));
  }

  void respond(SimTime t, const Command& cmd, std::optional<std::string> out) {
    HistEvent e;
    e.t = t;
    e.inv = false;
    e.client = cmd.client;
    e.seq = cmd.seq;
    e.type = cmd.type;
    e.key = cmd.key;
    if (cmd.type == OpType::Write) e.value = cmd.value;
    e.out = std::move(out);
    history.events.push_back(std::move(e));
  }
};

}  // namespace paxkit
