#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "paxkit/history.hpp"
#include "paxkit/trace.hpp"

namespace paxkit {

enum class Verdict { Ok, Violation, Capacity };

struct CheckResult {
  Verdict verdict = Verdict::Ok;
  std::string detail;
  // For violations: a small subset of (client, seq) pairs that already fails.
  std::vector<std::pair<ClientId, std::int64_t>> core;

  bool ok() const { return verdict == Verdict::Ok; }
};

struct CheckLimits {
  std::size_t max_ops = 400;
  std::size_t max_expansions = 4'000'000;
};

namespace detail {

constexpr SimTime kInf = std::numeric_limits<SimTime>::max();

struct Op {
  ClientId client = 0;
  std::int64_t seq = 0;
  bool is_read = false;
  std::string key;
  std::string value;                // writes
  std::optional<std::string> out;   // reads: observed result (nullopt = absent key)
  SimTime inv = 0;
  SimTime res = kInf;               // kInf = pending
  bool optional_write = false;      // pending write: may never have taken effect
};

// Pair up invocations and responses; drop pending reads (they constrain
// nothing), keep pending writes as optional.
inline std::vector<Op> collect_ops(const History& h) {
  std::map<std::pair<ClientId, std::int64_t>, Op> by_id;
  for (const auto& e : h.events) {
    auto key = std::make_pair(e.client, e.seq);
    auto& op = by_id[key];
    op.client = e.client;
    op.seq = e.seq;
    op.is_read = e.type == OpType::Read;
    op.key = e.key;
    if (e.inv) {
      op.inv = e.t;
      if (e.value) op.value = *e.value;
    } else {
      op.res = e.t;
      if (op.is_read) op.out = e.out;
    }
  }
  std::vector<Op> ops;
  for (auto& [k, op] : by_id) {
    if (op.res == kInf) {
      if (op.is_read) continue;
      op.optional_write = true;
    }
    ops.push_back(std::move(op));
  }
  return ops;
}

// Backtracking search for a legal linearization. `respect_real_time` off
// yields the sequential-consistency check (program order only).
class WingGongSearch {
 public:
  WingGongSearch(std::vector<Op> ops, bool respect_real_time, CheckLimits limits)
      : ops_(std::move(ops)), real_time_(respect_real_time), limits_(limits) {}

  CheckResult run() {
    if (ops_.size() > limits_.max_ops) {
      return {Verdict::Capacity,
              "history has " + std::to_string(ops_.size()) + " operations, limit " +
                  std::to_string(limits_.max_ops),
              {}};
    }
    done_.assign(ops_.size(), false);
    required_ = 0;
    for (const auto& op : ops_)
      if (!op.optional_write) ++required_;
    bool found = dfs(0);
    if (expansions_ >= limits_.max_expansions && !found)
      return {Verdict::Capacity, "search budget exhausted", {}};
    if (found) return {Verdict::Ok, "", {}};
    return {Verdict::Violation, "no legal linearization exists", {}};
  }

 private:
  bool dfs(std::size_t linearized_required) {
    if (linearized_required == required_) return true;
    if (++expansions_ >= limits_.max_expansions) return false;
    if (!memo_.insert(state_key()).second) return false;

    // Frontier: ops whose invocation is not after every unlinearized response.
    SimTime min_res = kInf;
    if (real_time_) {
      for (std::size_t i = 0; i < ops_.size(); ++i)
        if (!done_[i]) min_res = std::min(min_res, ops_[i].res);
    }
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      if (done_[i]) continue;
      const auto& op = ops_[i];
      if (real_time_ && op.inv > min_res) continue;  // some op must come first
      if (!program_order_minimal(i)) continue;
      if (op.is_read) {
        auto it = kv_.find(op.key);
        std::optional<std::string> cur;
        if (it != kv_.end()) cur = it->second;
        if (cur != op.out) continue;  // wrong value at this point
        done_[i] = true;
        if (dfs(linearized_required + 1)) return true;
        done_[i] = false;
      } else {
        auto it = kv_.find(op.key);
        std::optional<std::string> prev;
        if (it != kv_.end()) prev = it->second;
        kv_[op.key] = op.value;
        done_[i] = true;
        if (dfs(linearized_required + (op.optional_write ? 0 : 1))) return true;
        done_[i] = false;
        if (prev) kv_[op.key] = *prev;
        else kv_.erase(op.key);
      }
    }
    return false;
  }

  bool program_order_minimal(std::size_t i) const {
    for (std::size_t j = 0; j < ops_.size(); ++j)
      if (!done_[j] && j != i && ops_[j].client == ops_[i].client &&
          ops_[j].seq < ops_[i].seq)
        return false;
    return true;
  }

  std::string state_key() const {
    std::string s;
    s.reserve(done_.size() + kv_.size() * 8);
    for (bool b : done_) s.push_back(b ? '1' : '0');
    for (const auto& [k, v] : kv_) {
      s += '|';
      s += k;
      s += '=';
      s += v;
    }
    return s;
  }

  std::vector<Op> ops_;
  bool real_time_;
  CheckLimits limits_;
  std::vector<bool> done_;
  std::size_t required_ = 0;
  std::map<std::string, std::string> kv_;
  std::size_t expansions_ = 0;
  std::unordered_set<std::string> memo_;
};

inline CheckResult check(const History& h, bool real_time, CheckLimits limits) {
  auto ops = collect_ops(h);
  WingGongSearch search(ops, real_time, limits);
  auto result = search.run();
  if (result.verdict != Verdict::Violation) return result;

  // Greedy shrink: drop one op at a time while the remainder still fails.
  std::vector<detail::Op> core = ops;
  for (std::size_t i = 0; i < core.size() && core.size() > 2;) {
    auto trial = core;
    trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(i));
    if (WingGongSearch(trial, real_time, limits).run().verdict == Verdict::Violation) {
      core = std::move(trial);
    } else {
      ++i;
    }
  }
  for (const auto& op : core) result.core.emplace_back(op.client, op.seq);
  return result;
}

}  // namespace detail

inline CheckResult check_linearizable(const History& h, CheckLimits limits = {}) {
  return detail::check(h, /*real_time=*/true, limits);
}

inline CheckResult check_sequential(const History& h, CheckLimits limits = {}) {
  return detail::check(h, /*real_time=*/false, limits);
}

// Structural audits over a run trace; returns human-readable violations.
inline std::vector<std::string> audit_trace(const Trace& tr) {
  std::vector<std::string> out = tr.violations;

  for (const auto& [slot, who] : tr.responders)
    if (who.size() != 1)
      out.push_back("MultipleResponders at slot " + std::to_string(slot) + " (" +
                    std::to_string(who.size()) + " replicas)");

  // Real-time rule for leaderless reads: the chosen watermark must cover every
  // write whose response preceded the PreRead.
  {
    auto comps = tr.write_completions;
    std::sort(comps.begin(), comps.end(),
              [](const auto& a, const auto& b) { return a.response < b.response; });
    std::vector<Slot> prefix_max(comps.size());
    Slot run = kNoSlot;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      run = std::max(run, comps[i].slot);
      prefix_max[i] = run;
    }
    for (const auto& r : tr.lin_reads) {
      // last completion strictly before the PreRead started
      std::size_t lo = 0, hi = comps.size();
      while (lo < hi) {
        auto mid = (lo + hi) / 2;
        if (comps[mid].response < r.preread_start) lo = mid + 1;
        else hi = mid;
      }
      if (lo == 0) continue;
      if (r.watermark < prefix_max[lo - 1])
        out.push_back("StaleLinearizableRead: watermark " + std::to_string(r.watermark) +
                      " below completed write slot " + std::to_string(prefix_max[lo - 1]));
    }
  }

  {
    std::map<ClientId, Slot> last;
    for (const auto& o : tr.seq_obs) {
      auto it = last.find(o.client);
      if (it != last.end() && o.index < it->second)
        out.push_back("SequentialRegression for client " + std::to_string(o.client) + ": " +
                      std::to_string(o.index) + " after " + std::to_string(it->second));
      last[o.client] = std::max(it == last.end() ? kNoSlot : it->second, o.index);
    }
  }

  // Every eventual read must equal the fold of some contiguous chosen prefix —
  // specifically the one it reported.
  {
    auto obs = tr.eventual_obs;
    std::sort(obs.begin(), obs.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
    std::map<std::string, std::string> kv;
    Slot next = 0;
    for (const auto& o : obs) {
      bool gap = false;
      while (next <= o.index) {
        auto it = tr.chosen_log.find(next);
        if (it == tr.chosen_log.end()) {
          gap = true;
          break;
        }
        for (const auto& cmd : it->second.commands)
          if (cmd.type == OpType::Write) kv[cmd.key] = cmd.value;
        ++next;
      }
      if (gap) {
        out.push_back("EventualReadBeyondChosenPrefix at index " + std::to_string(o.index));
        continue;
      }
      auto it = kv.find(o.key);
      std::optional<std::string> expect;
      if (it != kv.end()) expect = it->second;
      if (expect != o.out)
        out.push_back("EventualReadMismatch key " + o.key + " at prefix " +
                      std::to_string(o.index));
    }
  }

  return out;
}

}  // namespace paxkit
