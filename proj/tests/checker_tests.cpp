#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "paxkit/checker.hpp"

using namespace paxkit;

namespace {

void inv(History& h, SimTime t, ClientId c, std::int64_t seq, OpType ty, const std::string& k,
         std::optional<std::string> v = std::nullopt) {
  HistEvent e;
  e.t = t;
  e.inv = true;
  e.client = c;
  e.seq = seq;
  e.type = ty;
  e.key = k;
  e.value = std::move(v);
  h.events.push_back(e);
}

void res(History& h, SimTime t, ClientId c, std::int64_t seq, OpType ty, const std::string& k,
         std::optional<std::string> out = std::nullopt) {
  HistEvent e;
  e.t = t;
  e.inv = false;
  e.client = c;
  e.seq = seq;
  e.type = ty;
  e.key = k;
  e.out = std::move(out);
  h.events.push_back(e);
}

void write(History& h, SimTime t0, SimTime t1, ClientId c, std::int64_t seq, const std::string& k,
           const std::string& v) {
  inv(h, t0, c, seq, OpType::Write, k, v);
  res(h, t1, c, seq, OpType::Write, k);
}

void read(History& h, SimTime t0, SimTime t1, ClientId c, std::int64_t seq, const std::string& k,
          std::optional<std::string> out) {
  inv(h, t0, c, seq, OpType::Read, k);
  res(h, t1, c, seq, OpType::Read, k, std::move(out));
}

// Exhaustive oracle: try every permutation of the (complete) operations,
// enforcing real-time order (when asked), program order, and read legality by
// replaying a register map.
bool permutation_oracle(const std::vector<detail::Op>& ops, bool real_time) {
  std::vector<std::size_t> idx(ops.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end());
  do {
    bool ok = true;
    for (std::size_t a = 0; a + 1 < idx.size() && ok; ++a)
      for (std::size_t b = a + 1; b < idx.size() && ok; ++b) {
        const auto& x = ops[idx[a]];
        const auto& y = ops[idx[b]];
        if (real_time && y.res < x.inv) ok = false;  // y finished before x began
        if (x.client == y.client && y.seq < x.seq) ok = false;
      }
    if (!ok) continue;
    std::map<std::string, std::string> kv;
    for (std::size_t i : idx) {
      const auto& op = ops[i];
      if (op.is_read) {
        auto it = kv.find(op.key);
        std::optional<std::string> cur;
        if (it != kv.end()) cur = it->second;
        if (cur != op.out) {
          ok = false;
          break;
        }
      } else {
        kv[op.key] = op.value;
      }
    }
    if (ok) return true;
  } while (std::next_permutation(idx.begin(), idx.end()));
  return false;
}

}  // namespace

TEST_CASE("overlapping writes may linearize in either order") {
  History h;
  write(h, 0, 20, 1, 0, "x", "0");
  write(h, 10, 30, 2, 0, "x", "1");
  read(h, 40, 50, 1, 1, "x", "0");  // legal: w(1) then w(0) then the read
  CHECK(check_linearizable(h).ok());
  CHECK(check_sequential(h).ok());
}

TEST_CASE("sequentially consistent but not linearizable") {
  History h;
  write(h, 0, 10, 1, 0, "x", "0");
  read(h, 20, 30, 1, 1, "x", "1");
  write(h, 15, 55, 2, 0, "x", "1");
  read(h, 65, 75, 2, 1, "x", "1");
  write(h, 40, 50, 3, 0, "x", "0");

  auto lin = check_linearizable(h);
  CHECK(lin.verdict == Verdict::Violation);
  CHECK_FALSE(lin.core.empty());
  CHECK(lin.core.size() <= 5);
  CHECK(check_sequential(h).ok());
}

TEST_CASE("a read of a value never written is a violation with a small core") {
  History h;
  write(h, 0, 5, 1, 0, "x", "a");
  write(h, 10, 15, 1, 1, "y", "b");
  read(h, 20, 25, 2, 0, "x", "zzz");
  auto r = check_linearizable(h);
  REQUIRE(r.verdict == Verdict::Violation);
  // shrinking must keep the impossible read and drop the unrelated write
  CHECK(std::find(r.core.begin(), r.core.end(), std::pair<ClientId, std::int64_t>{2, 0}) !=
        r.core.end());
  CHECK(r.core.size() <= 2);
}

TEST_CASE("a read before any write must observe an absent key") {
  History h;
  read(h, 0, 5, 1, 0, "x", std::nullopt);
  write(h, 10, 15, 2, 0, "x", "v");
  read(h, 20, 25, 1, 1, "x", "v");
  CHECK(check_linearizable(h).ok());

  History bad;
  read(bad, 0, 5, 1, 0, "x", "v");  // observed the write before it was invoked
  write(bad, 10, 15, 2, 0, "x", "v");
  CHECK(check_linearizable(bad).verdict == Verdict::Violation);
  CHECK(check_sequential(bad).ok());  // but fine without real-time order
}

TEST_CASE("a pending write may or may not have taken effect") {
  History h;
  inv(h, 0, 1, 0, OpType::Write, "x", "v");  // no response: the client crashed
  read(h, 10, 15, 2, 0, "x", "v");
  CHECK(check_linearizable(h).ok());  // effect happened

  History h2;
  inv(h2, 0, 1, 0, OpType::Write, "x", "v");
  read(h2, 10, 15, 2, 0, "x", std::nullopt);
  CHECK(check_linearizable(h2).ok());  // effect never happened

  History h3;
  inv(h3, 0, 1, 0, OpType::Write, "x", "v");
  read(h3, 10, 15, 2, 0, "x", std::nullopt);
  read(h3, 20, 25, 2, 1, "x", "v");
  CHECK(check_linearizable(h3).ok());  // effect happened between the reads

  History h4;
  inv(h4, 0, 1, 0, OpType::Write, "x", "v");
  read(h4, 10, 15, 2, 0, "x", "v");
  read(h4, 20, 25, 2, 1, "x", std::nullopt);
  CHECK(check_linearizable(h4).verdict == Verdict::Violation);  // effects don't un-happen
}

TEST_CASE("pending reads constrain nothing") {
  History h;
  write(h, 0, 5, 1, 0, "x", "v");
  inv(h, 10, 2, 0, OpType::Read, "x");  // never answered
  CHECK(check_linearizable(h).ok());
}

TEST_CASE("search verdict agrees with the permutation oracle on random histories") {
  std::mt19937_64 gen(123);
  int lin_violations = 0, seq_violations = 0, disagree_modes = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    History h;
    int nops = 2 + static_cast<int>(gen() % 5);  // 2..6
    std::vector<SimTime> cursor(2, 0);
    std::vector<std::int64_t> seq(2, 0);
    for (int i = 0; i < nops; ++i) {
      ClientId c = static_cast<ClientId>(gen() % 2);
      SimTime t0 = cursor[static_cast<std::size_t>(c)] + 1 + static_cast<SimTime>(gen() % 5);
      SimTime t1 = t0 + 1 + static_cast<SimTime>(gen() % 8);
      cursor[static_cast<std::size_t>(c)] = t1;
      std::string key = (gen() % 2) ? "a" : "b";
      if (gen() % 2) {
        std::optional<std::string> out;
        switch (gen() % 3) {
          case 0: out = "1"; break;
          case 1: out = "2"; break;
          default: break;  // absent
        }
        read(h, t0, t1, c, seq[static_cast<std::size_t>(c)]++, key, out);
      } else {
        write(h, t0, t1, c, seq[static_cast<std::size_t>(c)]++, key, (gen() % 2) ? "1" : "2");
      }
    }
    auto ops = detail::collect_ops(h);
    bool lin_expect = permutation_oracle(ops, true);
    bool seq_expect = permutation_oracle(ops, false);
    auto lin_got = check_linearizable(h);
    auto seq_got = check_sequential(h);
    REQUIRE(lin_got.verdict != Verdict::Capacity);
    REQUIRE(seq_got.verdict != Verdict::Capacity);
    CHECK(lin_got.ok() == lin_expect);
    CHECK(seq_got.ok() == seq_expect);
    lin_violations += !lin_expect;
    seq_violations += !seq_expect;
    disagree_modes += (lin_expect != seq_expect);
  }
  // the generator must actually exercise all verdict combinations
  CHECK(lin_violations > 50);
  CHECK(seq_violations > 50);
  CHECK(disagree_modes > 5);
}

TEST_CASE("oversized histories yield a capacity verdict, not a guess") {
  History h;
  for (int i = 0; i < 10'000; ++i)
    write(h, 2 * i, 2 * i + 1, 0, i, "k", std::to_string(i));
  auto r = check_linearizable(h);
  CHECK(r.verdict == Verdict::Capacity);
  CHECK(r.detail.find("limit") != std::string::npos);
}

TEST_CASE("expansion budget exhaustion is reported as capacity") {
  // many overlapping same-key writes from distinct clients explode the search
  History h;
  for (int c = 0; c < 30; ++c) write(h, 0, 1000, c, 0, "k", std::to_string(c));
  read(h, 2000, 2001, 100, 0, "k", "nope");  // unsatisfiable, forces full search
  CheckLimits tight;
  tight.max_expansions = 500;
  auto r = check_linearizable(h, tight);
  CHECK(r.verdict == Verdict::Capacity);
}

TEST_CASE("audit flags multiple responders for one slot") {
  Trace tr;
  tr.responders[3] = {0, 1};
  auto v = audit_trace(tr);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("MultipleResponders") != std::string::npos);
  CHECK(v[0].find("slot 3") != std::string::npos);
}

TEST_CASE("audit flags a linearizable read whose watermark misses a completed write") {
  Trace tr;
  tr.write_completions.push_back({0, 0, 5, 100});  // slot 5 acked at t=100
  tr.lin_reads.push_back({150, 4});                // PreRead at 150 saw only slot 4
  auto v = audit_trace(tr);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("StaleLinearizableRead") != std::string::npos);

  Trace ok;
  ok.write_completions.push_back({0, 0, 5, 100});
  ok.lin_reads.push_back({150, 5});
  ok.lin_reads.push_back({50, kNoSlot});  // started before the write finished
  CHECK(audit_trace(ok).empty());
}

TEST_CASE("audit flags sequential watermark regressions per client") {
  Trace tr;
  tr.seq_obs.push_back({7, 4});
  tr.seq_obs.push_back({7, 6});
  tr.seq_obs.push_back({7, 5});  // went backwards
  tr.seq_obs.push_back({8, 2});  // other clients are independent
  auto v = audit_trace(tr);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("SequentialRegression for client 7") != std::string::npos);
}

TEST_CASE("audit replays eventual reads against the chosen prefix") {
  Trace tr;
  tr.chosen_log[0] = Batch{{make_write(0, 0, "x", "1")}};
  tr.chosen_log[1] = Batch{{make_write(0, 1, "x", "2")}};
  tr.eventual_obs.push_back({0, "x", "1"});
  tr.eventual_obs.push_back({1, "x", "2"});
  tr.eventual_obs.push_back({kNoSlot, "x", std::nullopt});  // before any write
  CHECK(audit_trace(tr).empty());

  tr.eventual_obs.push_back({0, "x", "2"});  // value from beyond the claimed prefix
  auto v = audit_trace(tr);
  REQUIRE(v.size() == 1);
  CHECK(v[0].find("EventualReadMismatch") != std::string::npos);

  Trace gap;
  gap.chosen_log[0] = Batch{{make_write(0, 0, "x", "1")}};
  gap.eventual_obs.push_back({2, "x", "1"});  // index past the contiguous prefix
  auto g = audit_trace(gap);
  REQUIRE(g.size() == 1);
  CHECK(g[0].find("EventualReadBeyondChosenPrefix") != std::string::npos);
}
