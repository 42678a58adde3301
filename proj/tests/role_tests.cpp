#include <doctest.h>

#include <algorithm>

#include "paxkit/roles/acceptor.hpp"
#include "paxkit/roles/batcher.hpp"
#include "paxkit/roles/proposer.hpp"
#include "paxkit/roles/proxy_leader.hpp"
#include "paxkit/roles/replica.hpp"

using namespace paxkit;

namespace {

struct Fixture {
  DeploymentPlan plan;
  Trace trace;
  RoleEnv env;

  explicit Fixture(Variant v = Variant::Compartmentalized) {
    plan.variant = v;
    if (v == Variant::Coupled) plan.num_proxy_leaders = 0;
    env.plan = &plan;
    env.trace = &trace;
  }
};

template <class M>
std::vector<std::pair<NodeId, M>> sent(const Effects& fx) {
  std::vector<std::pair<NodeId, M>> out;
  for (const auto& e : fx.msgs)
    if (const auto* m = std::get_if<M>(&e.msg)) out.emplace_back(e.to, *m);
  return out;
}

Envelope from(NodeId who, Message m) { return Envelope{who, {}, std::move(m)}; }

Batch wbatch(ClientId c, std::int64_t seq, const std::string& k, const std::string& v) {
  return Batch{{make_write(c, seq, k, v)}};
}

}  // namespace

TEST_CASE("acceptor promises only increasing ballots") {
  Fixture f;
  Acceptor a({Role::Acceptor, 0}, f.env);
  Effects fx({Role::Acceptor, 0});

  a.on_message(from({Role::Proposer, 0}, Phase1a{{5, 0}, 0}), fx);
  REQUIRE(sent<Phase1b>(fx).size() == 1);
  CHECK(a.state().promised == Ballot{5, 0});

  fx.msgs.clear();
  a.on_message(from({Role::Proposer, 1}, Phase1a{{3, 1}, 0}), fx);
  REQUIRE(sent<Nack>(fx).size() == 1);
  CHECK(sent<Nack>(fx)[0].second.promised == Ballot{5, 0});
  CHECK(a.state().promised == Ballot{5, 0});

  fx.msgs.clear();
  a.on_message(from({Role::ProxyLeader, 0}, Phase2a{0, {4, 0}, wbatch(1, 0, "k", "v")}), fx);
  CHECK(sent<Nack>(fx).size() == 1);  // below the promise
  CHECK(a.state().votes.empty());
}

TEST_CASE("acceptor phase1b reports exactly the votes at or above from_slot") {
  Fixture f;
  Acceptor a({Role::Acceptor, 2}, f.env);
  Effects fx({Role::Acceptor, 2});
  Rng rng(3);

  for (int i = 0; i < 60; ++i) {
    Slot s = static_cast<Slot>(rng.below(30));
    Ballot b{static_cast<std::int64_t>(rng.below(4)), 0};
    a.on_message(from({Role::ProxyLeader, 0}, Phase2a{s, b, wbatch(0, i, "k" + std::to_string(i), "v")}), fx);
  }
  // independent scan oracle for the filter
  Ballot high{100, 1};
  for (Slot cut : {0, 7, 15, 29, 40}) {
    fx.msgs.clear();
    a.on_message(from({Role::Proposer, 1}, Phase1a{high, cut}), fx);
    auto p1b = sent<Phase1b>(fx);
    REQUIRE(p1b.size() == 1);
    std::map<Slot, Vote> expect;
    for (const auto& [s, v] : a.state().votes)
      if (s >= cut) expect.emplace(s, v);
    CHECK(p1b[0].second.votes.size() == expect.size());
    for (const auto& [s, v] : expect) {
      REQUIRE(p1b[0].second.votes.count(s));
      CHECK(p1b[0].second.votes.at(s) == v);
    }
    high.round += 1;  // keep later iterations from being nacked
  }
}

TEST_CASE("vote watermark equals the max voted slot") {
  Fixture f;
  Acceptor a({Role::Acceptor, 1}, f.env);
  Effects fx({Role::Acceptor, 1});
  CHECK(a.state().vote_watermark == kNoSlot);

  Slot max_seen = kNoSlot;
  Rng rng(9);
  for (int i = 0; i < 40; ++i) {
    Slot s = static_cast<Slot>(rng.below(100));
    a.on_message(from({Role::ProxyLeader, 0}, Phase2a{s, {1, 0}, wbatch(0, i, "k", "v")}), fx);
    max_seen = std::max(max_seen, s);
    CHECK(a.state().vote_watermark == max_seen);
  }

  // pre-reads observe but never move the watermark
  auto votes_before = a.state().votes;
  fx.msgs.clear();
  a.on_message(from({Role::Client, 0}, PreRead{ReadId{0, 0, 1}}), fx);
  auto acks = sent<PreReadAck>(fx);
  REQUIRE(acks.size() == 1);
  CHECK(acks[0].second.vote_watermark == max_seen);
  CHECK(a.state().votes.size() == votes_before.size());
  CHECK(a.state().vote_watermark == max_seen);
}

TEST_CASE("proxy leader relays to one full column and certifies on a column of acks") {
  Fixture f;
  f.plan.grid_rows = 2;
  f.plan.grid_cols = 3;
  f.plan.num_replicas = 3;
  ProxyLeader p({Role::ProxyLeader, 0}, f.env, 77);
  Effects fx({Role::ProxyLeader, 0});

  auto value = wbatch(4, 0, "x", "1");
  p.on_message(from({Role::Proposer, 0}, Phase2a{9, {0, 0}, value}), fx);
  auto out = sent<Phase2a>(fx);
  REQUIRE(out.size() == 2);  // one column of a 2x3 grid
  GridQuorumSystem g(2, 3);
  int col = out[0].first.idx % 3;
  std::set<int> expect(g.column_members(col).begin(), g.column_members(col).end());
  for (const auto& [to, m] : out) {
    CHECK(expect.count(to.idx));
    CHECK(m.slot == 9);
    CHECK(m.value == value);
  }

  fx.msgs.clear();
  auto members = g.column_members(col);
  p.on_message(from({Role::Acceptor, members[0]}, Phase2b{9, {0, 0}, members[0]}), fx);
  CHECK(sent<Chosen>(fx).empty());  // half a column is not chosen
  p.on_message(from({Role::Acceptor, members[1]}, Phase2b{9, {0, 0}, members[1]}), fx);
  auto chosen = sent<Chosen>(fx);
  REQUIRE(chosen.size() == 3);  // broadcast to every replica
  for (const auto& [to, m] : chosen) {
    CHECK(to.role == Role::Replica);
    CHECK(m.slot == 9);
    CHECK(m.value == value);
  }
  CHECK(f.trace.chosen_log.at(9) == value);
}

TEST_CASE("proxy leader drops stale ballots and clears pending on nack") {
  Fixture f;
  ProxyLeader p({Role::ProxyLeader, 1}, f.env, 5);
  Effects fx({Role::ProxyLeader, 1});

  p.on_message(from({Role::Proposer, 0}, Phase2a{3, {2, 0}, wbatch(0, 0, "a", "1")}), fx);
  REQUIRE(p.pending().count(3));
  std::size_t msgs = fx.msgs.size();
  p.on_message(from({Role::Proposer, 1}, Phase2a{3, {1, 1}, wbatch(0, 0, "a", "2")}), fx);
  CHECK(fx.msgs.size() == msgs);  // stale ballot ignored
  CHECK(p.pending().at(3).ballot == Ballot{2, 0});

  p.on_message(from({Role::Acceptor, 0}, Nack{{5, 1}}), fx);
  CHECK(p.pending().empty());  // a higher ballot took over
}

TEST_CASE("leader assigns consecutive slots and re-proposes the original slot on retry") {
  Fixture f;
  f.plan.num_proxy_leaders = 3;
  Proposer leader({Role::Proposer, 0}, f.env, 1);
  Effects fx({Role::Proposer, 0});

  leader.on_message(from({Role::Client, 0}, ClientRequest{make_write(0, 0, "a", "1")}), fx);
  leader.on_message(from({Role::Client, 1}, ClientRequest{make_write(1, 0, "b", "2")}), fx);
  leader.on_message(from({Role::Client, 0}, ClientRequest{make_write(0, 1, "a", "3")}), fx);
  auto out = sent<Phase2a>(fx);
  REQUIRE(out.size() == 3);
  CHECK(out[0].second.slot == 0);
  CHECK(out[1].second.slot == 1);
  CHECK(out[2].second.slot == 2);
  CHECK(leader.state().next_slot == 3);
  for (const auto& [to, m] : out) CHECK(to.role == Role::ProxyLeader);

  // a client retransmission must not burn a new slot
  fx.msgs.clear();
  leader.on_message(from({Role::Client, 1}, ClientRequest{make_write(1, 0, "b", "2")}), fx);
  auto retry = sent<Phase2a>(fx);
  REQUIRE(retry.size() == 1);
  CHECK(retry[0].second.slot == 1);
  CHECK(retry[0].second.value == wbatch(1, 0, "b", "2"));
  CHECK(leader.state().next_slot == 3);

  // a stale older request is ignored entirely
  fx.msgs.clear();
  leader.on_message(from({Role::Client, 0}, ClientRequest{make_write(0, 0, "a", "1")}), fx);
  CHECK(fx.msgs.empty());
}

TEST_CASE("passive proposer ignores requests until elected; recovery rebuilds the log") {
  Fixture f;
  f.plan.grid_rows = 2;
  f.plan.grid_cols = 2;
  f.plan.num_proxy_leaders = 2;
  Proposer p1({Role::Proposer, 1}, f.env, 2);
  Effects fx({Role::Proposer, 1});

  p1.on_message(from({Role::Client, 0}, ClientRequest{make_write(0, 0, "a", "1")}), fx);
  CHECK(fx.msgs.empty());
  CHECK_FALSE(p1.state().active);

  p1.on_message(from({Role::Proposer, 1}, Elect{{1, 1}}), fx);
  auto p1a = sent<Phase1a>(fx);
  REQUIRE(p1a.size() == 2);  // one full grid row
  CHECK(p1a[0].second.from_slot == 0);
  CHECK(p1a[0].second.ballot == Ballot{1, 1});
  int row = p1a[0].first.idx / 2;
  GridQuorumSystem g(2, 2);
  auto members = g.row_members(row);

  // conflicting vote reports: slot 0 has ballots (0,0) and (0,2); slot 2 only
  // one vote; slot 1 is a hole
  std::map<Slot, Vote> votes_a{{0, {Ballot{0, 0}, wbatch(0, 0, "a", "old")}},
                               {2, {Ballot{0, 0}, wbatch(2, 0, "c", "z")}}};
  std::map<Slot, Vote> votes_b{{0, {Ballot{0, 2}, wbatch(0, 0, "a", "new")}}};
  fx.msgs.clear();
  p1.on_message(from({Role::Acceptor, members[0]}, Phase1b{{1, 1}, members[0], votes_a}), fx);
  CHECK(fx.msgs.empty());  // quorum incomplete
  p1.on_message(from({Role::Acceptor, members[1]}, Phase1b{{1, 1}, members[1], votes_b}), fx);

  auto props = sent<Phase2a>(fx);
  REQUIRE(props.size() == 3);  // slots 0..2
  std::map<Slot, Batch> by_slot;
  for (const auto& [to, m] : props) {
    CHECK(m.ballot == Ballot{1, 1});
    by_slot[m.slot] = m.value;
  }
  CHECK(by_slot.at(0) == wbatch(0, 0, "a", "new"));  // max-ballot vote wins
  CHECK(by_slot.at(1) == noop_batch());              // hole gets a noop
  CHECK(by_slot.at(2) == wbatch(2, 0, "c", "z"));
  CHECK(p1.state().next_slot == 3);
  CHECK(p1.state().phase == Phase::Phase2);
}

TEST_CASE("coupled leader gathers its own phase2b quorum and broadcasts chosen") {
  Fixture f(Variant::Coupled);
  f.plan.f = 1;
  f.plan.num_replicas = 2;
  Proposer leader({Role::Proposer, 0}, f.env, 4);
  Effects fx({Role::Proposer, 0});

  leader.on_message(from({Role::Client, 0}, ClientRequest{make_write(0, 0, "k", "v")}), fx);
  auto p2a = sent<Phase2a>(fx);
  REQUIRE(p2a.size() == 2);  // thrifty: f+1 of the 2f+1 acceptors
  std::set<int> contacted;
  for (const auto& [to, m] : p2a) {
    CHECK(to.role == Role::Acceptor);
    contacted.insert(to.idx);
  }
  CHECK(contacted.size() == 2);

  fx.msgs.clear();
  auto it = contacted.begin();
  leader.on_message(from({Role::Acceptor, *it}, Phase2b{0, {0, 0}, *it}), fx);
  CHECK(sent<Chosen>(fx).empty());
  ++it;
  leader.on_message(from({Role::Acceptor, *it}, Phase2b{0, {0, 0}, *it}), fx);
  auto chosen = sent<Chosen>(fx);
  REQUIRE(chosen.size() == 2);
  for (const auto& [to, m] : chosen) CHECK(to.role == Role::Replica);
  CHECK(f.trace.chosen_log.count(0));
}

TEST_CASE("replica executes in slot order and only the responsible replica replies") {
  Fixture f;
  f.plan.num_replicas = 2;
  Replica r0({Role::Replica, 0}, f.env, 1);
  Replica r1({Role::Replica, 1}, f.env, 2);
  Effects fx0({Role::Replica, 0}), fx1({Role::Replica, 1});

  auto b0 = wbatch(0, 0, "x", "1");
  auto b1 = wbatch(1, 0, "y", "2");

  // slot 1 arrives first: buffered, not executed
  r0.on_message(from({Role::ProxyLeader, 0}, Chosen{1, b1}), fx0);
  CHECK(r0.executed_watermark() == kNoSlot);
  CHECK(sent<ChosenAck>(fx0).size() == 1);

  r0.on_message(from({Role::ProxyLeader, 0}, Chosen{0, b0}), fx0);
  CHECK(r0.executed_watermark() == 1);
  CHECK(r0.kv().at("x") == "1");
  CHECK(r0.kv().at("y") == "2");

  r1.on_message(from({Role::ProxyLeader, 0}, Chosen{1, b1}), fx1);
  r1.on_message(from({Role::ProxyLeader, 0}, Chosen{0, b0}), fx1);

  // slot 0 -> replica 0, slot 1 -> replica 1 (slot mod n)
  auto replies0 = sent<Reply>(fx0);
  auto replies1 = sent<Reply>(fx1);
  REQUIRE(replies0.size() == 1);
  REQUIRE(replies1.size() == 1);
  CHECK(replies0[0].second.entry.client == 0);
  CHECK(replies0[0].second.entry.slot == 0);
  CHECK(replies1[0].second.entry.client == 1);
  CHECK(replies1[0].second.entry.slot == 1);
  CHECK(f.trace.responders.at(0) == std::set<int>{0});
  CHECK(f.trace.responders.at(1) == std::set<int>{1});
}

TEST_CASE("replica holds reads until the required index is executed") {
  Fixture f;
  f.plan.num_replicas = 1;
  Replica r({Role::Replica, 0}, f.env, 3);
  Effects fx({Role::Replica, 0});

  ReadRequest rr{ReadId{7, 0, 1}, {make_read(7, 0, "x")}, 1, ReadConsistency::Linearizable, false};
  r.on_message(from({Role::Client, 7}, rr), fx);
  CHECK(sent<Reply>(fx).empty());  // waiting for slot 1

  r.on_message(from({Role::ProxyLeader, 0}, Chosen{0, wbatch(0, 0, "x", "old")}), fx);
  CHECK(sent<Reply>(fx).size() == 1);  // that's the write reply for slot 0, not the read
  r.on_message(from({Role::ProxyLeader, 0}, Chosen{1, wbatch(0, 1, "x", "new")}), fx);
  auto replies = sent<Reply>(fx);
  REQUIRE(replies.size() == 3);  // slot-0 write, slot-1 write, then the read
  const auto& read_reply = replies.back();
  CHECK(read_reply.second.id == rr.id);
  CHECK(read_reply.second.entry.out == "new");
  CHECK(read_reply.second.entry.slot == 1);
}

TEST_CASE("replica answers eventual reads immediately against its current prefix") {
  Fixture f;
  f.plan.num_replicas = 1;
  Replica r({Role::Replica, 0}, f.env, 3);
  Effects fx({Role::Replica, 0});

  ReadRequest rr{ReadId{2, 0, 1}, {make_read(2, 0, "nope")}, kNoSlot, ReadConsistency::Eventual,
                 false};
  r.on_message(from({Role::Client, 2}, rr), fx);
  auto replies = sent<Reply>(fx);
  REQUIRE(replies.size() == 1);
  CHECK_FALSE(replies[0].second.entry.out.has_value());  // absent key
  CHECK(replies[0].second.entry.slot == kNoSlot);        // no writes observed yet
  REQUIRE(f.trace.eventual_obs.size() == 1);
  CHECK(f.trace.eventual_obs[0].index == kNoSlot);
}

TEST_CASE("replica deduplicates a command chosen in two slots") {
  Fixture f;
  f.plan.num_replicas = 1;
  Replica r({Role::Replica, 0}, f.env, 3);
  Effects fx({Role::Replica, 0});

  auto cmd = wbatch(5, 0, "k", "v");
  r.on_message(from({Role::ProxyLeader, 0}, Chosen{0, cmd}), fx);
  r.on_message(from({Role::ProxyLeader, 1}, Chosen{1, cmd}), fx);  // duplicate via a retry path
  auto replies = sent<Reply>(fx);
  CHECK(replies.size() == 1);  // applied and answered exactly once
  CHECK(r.executed_watermark() == 1);
  CHECK(f.trace.responders.count(1) == 0);
}

TEST_CASE("duplicate chosen for an executed slot re-sends the cached reply") {
  Fixture f;
  f.plan.num_replicas = 1;
  Replica r({Role::Replica, 0}, f.env, 3);
  Effects fx({Role::Replica, 0});

  auto cmd = wbatch(5, 0, "k", "v");
  r.on_message(from({Role::ProxyLeader, 0}, Chosen{0, cmd}), fx);
  REQUIRE(sent<Reply>(fx).size() == 1);
  // the same slot chosen again (client retried; the reply was lost)
  r.on_message(from({Role::ProxyLeader, 1}, Chosen{0, cmd}), fx);
  auto replies = sent<Reply>(fx);
  REQUIRE(replies.size() == 2);
  CHECK(replies[1].second.entry.out == "v");
  CHECK(replies[1].second.entry.slot == 0);
  CHECK(r.executed_watermark() == 0);  // not re-executed
}

TEST_CASE("batcher flushes a write batch at the size threshold, preserving order") {
  Fixture f;
  f.plan.batching_enabled = true;
  f.plan.num_batchers = 1;
  f.plan.num_unbatchers = 1;
  f.plan.batch_size = 3;
  f.plan.batch_timeout = 1000;
  Batcher b({Role::Batcher, 0}, f.env, 6);
  Effects fx({Role::Batcher, 0});

  b.on_message(from({Role::Client, 0}, ClientRequest{make_write(0, 0, "a", "1")}), fx);
  b.on_message(from({Role::Client, 1}, ClientRequest{make_write(1, 0, "b", "2")}), fx);
  CHECK(sent<BatchProposal>(fx).empty());
  // a retried command must not occupy two batch entries
  b.on_message(from({Role::Client, 0}, ClientRequest{make_write(0, 0, "a", "1")}), fx);
  CHECK(sent<BatchProposal>(fx).empty());
  b.on_message(from({Role::Client, 2}, ClientRequest{make_write(2, 0, "c", "3")}), fx);
  auto flushed = sent<BatchProposal>(fx);
  REQUIRE(flushed.size() == 1);
  CHECK(flushed[0].first.role == Role::Proposer);
  const auto& cmds = flushed[0].second.batch.commands;
  REQUIRE(cmds.size() == 3);
  CHECK(cmds[0].client == 0);  // arrival order kept
  CHECK(cmds[1].client == 1);
  CHECK(cmds[2].client == 2);
}

TEST_CASE("batcher gives a read batch one shared pre-read round") {
  Fixture f;
  f.plan.batching_enabled = true;
  f.plan.num_batchers = 1;
  f.plan.num_unbatchers = 1;
  f.plan.batch_size = 2;
  f.plan.grid_rows = 2;
  f.plan.grid_cols = 2;
  Batcher b({Role::Batcher, 0}, f.env, 8);
  Effects fx({Role::Batcher, 0});

  b.on_message(from({Role::Client, 0}, ClientRequest{make_read(0, 0, "a")}), fx);
  b.on_message(from({Role::Client, 1}, ClientRequest{make_read(1, 0, "b")}), fx);
  auto prereads = sent<PreRead>(fx);
  REQUIRE(prereads.size() == 2);  // one full row, one round for the whole batch
  CHECK(prereads[0].second.id == prereads[1].second.id);
  CHECK(prereads[0].second.id.origin == -1);  // batcher 0 encodes as -(idx+1)

  fx.msgs.clear();
  b.on_message(from({Role::Acceptor, prereads[0].first.idx},
                    PreReadAck{prereads[0].second.id, prereads[0].first.idx, 4}),
               fx);
  CHECK(sent<ReadRequest>(fx).empty());
  b.on_message(from({Role::Acceptor, prereads[1].first.idx},
                    PreReadAck{prereads[1].second.id, prereads[1].first.idx, 9}),
               fx);
  auto reads = sent<ReadRequest>(fx);
  REQUIRE(reads.size() == 1);  // a single request carries the whole batch
  CHECK(reads[0].second.required == 9);  // max watermark over the row
  CHECK(reads[0].second.reads.size() == 2);
  CHECK(reads[0].second.reply_via_unbatcher);
}

TEST_CASE("unbatcher fans results out one reply per entry and flags empty batches") {
  Fixture f;
  Unbatcher u({Role::Unbatcher, 0}, f.env);
  Effects fx({Role::Unbatcher, 0});

  ResultBatch rb{{ReplyEntry{3, 0, "x", 5}, ReplyEntry{8, 2, std::nullopt, 5}}};
  u.on_message(from({Role::Replica, 0}, rb), fx);
  auto replies = sent<Reply>(fx);
  REQUIRE(replies.size() == 2);
  CHECK(replies[0].first == NodeId{Role::Client, 3});
  CHECK(replies[1].first == NodeId{Role::Client, 8});
  CHECK(replies[0].second.entry.out == "x");
  CHECK(f.trace.unbatcher_entries.at(0) == 2);

  u.on_message(from({Role::Replica, 0}, ResultBatch{}), fx);
  CHECK(sent<Reply>(fx).size() == 2);  // nothing new
  REQUIRE(f.trace.violations.size() == 1);
}
