#pragma once

#include <cstdint>
#include <compare>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace paxkit {

using Slot = std::int64_t;
using SimTime = std::int64_t;
using ClientId = std::int64_t;

constexpr Slot kNoSlot = -1;

// Proposal round identifier, totally ordered by (round, proposer).
struct Ballot {
  std::int64_t round = 0;
  std::int32_t proposer = 0;

  friend auto operator<=>(const Ballot&, const Ballot&) = default;
};

enum class OpType { Write, Read, Noop };

struct Command {
  ClientId client = 0;
  std::int64_t seq = 0;
  OpType type = OpType::Noop;
  std::string key;
  std::string value;  // writes only

  friend bool operator==(const Command&, const Command&) = default;
};

inline Command make_write(ClientId c, std::int64_t seq, std::string key, std::string value) {
  return Command{c, seq, OpType::Write, std::move(key), std::move(value)};
}
inline Command make_read(ClientId c, std::int64_t seq, std::string key) {
  return Command{c, seq, OpType::Read, std::move(key), ""};
}
inline Command make_noop() { return Command{}; }

// The unit placed in a log slot: one or more write commands (or a single noop).
struct Batch {
  std::vector<Command> commands;

  friend bool operator==(const Batch&, const Batch&) = default;
};

inline Batch noop_batch() { return Batch{{make_noop()}}; }

enum class Variant { Coupled, Compartmentalized };
enum class ReadConsistency { Linearizable, Sequential, Eventual };
enum class SelectionPolicy { Random, RoundRobin };

struct WorkloadSpec {
  int num_clients = 1;
  double read_fraction = 0.0;
  double skew_p = 0.0;
  int keyspace = 10000;
  std::int64_t ops_per_client = 100;
  ReadConsistency read_consistency = ReadConsistency::Linearizable;
  std::uint64_t rng_seed = 0;
};

struct DeploymentPlan {
  int f = 1;
  int num_proposers = 2;
  int num_proxy_leaders = 2;
  int grid_rows = 2;
  int grid_cols = 2;
  int num_replicas = 2;
  int num_batchers = 0;
  int num_unbatchers = 0;
  bool batching_enabled = false;
  int batch_size = 10;
  SimTime batch_timeout = 10;
  Variant variant = Variant::Compartmentalized;
  SelectionPolicy selection = SelectionPolicy::Random;
  std::optional<WorkloadSpec> workload;

  int num_acceptors() const {
    return variant == Variant::Coupled ? 2 * f + 1 : grid_rows * grid_cols;
  }
};

// Returns every violated bound, empty when the plan is valid.
inline std::vector<std::string> plan_violations(const DeploymentPlan& p) {
  std::vector<std::string> errs;
  auto fail = [&](const std::string& name, const std::string& field) {
    errs.push_back(name + " (" + field + ")");
  };
  if (p.f < 1) fail("FaultToleranceBelowMinimum", "f");
  if (p.num_proposers < p.f + 1) fail("ProposersBelowMinimum", "num_proposers");
  if (p.num_replicas < p.f + 1) fail("ReplicasBelowMinimum", "num_replicas");
  if (p.variant == Variant::Compartmentalized) {
    if (p.grid_rows < p.f + 1) fail("GridRowsBelowMinimum", "grid_rows");
    if (p.grid_cols < p.f + 1) fail("GridColsBelowMinimum", "grid_cols");
    if (p.num_proxy_leaders < p.f + 1) fail("ProxyLeadersBelowMinimum", "num_proxy_leaders");
    if (p.batching_enabled) {
      if (p.num_batchers < p.f + 1) fail("BatchersBelowMinimum", "num_batchers");
      if (p.num_unbatchers < p.f + 1) fail("UnbatchersBelowMinimum", "num_unbatchers");
    }
  } else {
    // Coupled baseline: 2f+1 acceptors with majority quorums, no proxy
    // leaders or batchers.
    if (p.num_proxy_leaders != 0) fail("CoupledForbidsProxyLeaders", "num_proxy_leaders");
    if (p.batching_enabled) fail("CoupledForbidsBatching", "batching_enabled");
  }
  if (p.batch_size < 1) fail("BatchSizeBelowMinimum", "batch_size");
  if (p.workload) {
    const auto& w = *p.workload;
    if (w.read_fraction < 0.0 || w.read_fraction > 1.0)
      fail("ReadFractionOutOfRange", "read_fraction");
    if (w.skew_p < 0.0 || w.skew_p > 1.0) fail("SkewOutOfRange", "skew_p");
    if (w.num_clients < 1) fail("ClientsBelowMinimum", "num_clients");
  }
  return errs;
}

struct PlanError {
  std::vector<std::string> violations;
  std::string to_string() const {
    std::string s;
    for (const auto& v : violations) {
      if (!s.empty()) s += "; ";
      s += v;
    }
    return s;
  }
};

// Returns the plan unchanged when every invariant holds.
inline std::optional<PlanError> validate_plan(const DeploymentPlan& p) {
  auto errs = plan_violations(p);
  if (errs.empty()) return std::nullopt;
  return PlanError{std::move(errs)};
}

inline int ballot_compare(const Ballot& a, const Ballot& b) {
  if (a < b) return -1;
  if (b < a) return 1;
  return 0;
}

// --- JSON (plan files use snake_case field names) ---

inline std::string to_string(ReadConsistency c) {
  switch (c) {
    case ReadConsistency::Linearizable: return "linearizable";
    case ReadConsistency::Sequential: return "sequential";
    case ReadConsistency::Eventual: return "eventual";
  }
  return "linearizable";
}

inline ReadConsistency read_consistency_from_string(const std::string& s) {
  if (s == "sequential") return ReadConsistency::Sequential;
  if (s == "eventual") return ReadConsistency::Eventual;
  if (s == "linearizable") return ReadConsistency::Linearizable;
  throw std::invalid_argument("unknown read_consistency: " + s);
}

inline void from_json(const nlohmann::json& j, WorkloadSpec& w) {
  w.num_clients = j.value("num_clients", w.num_clients);
  w.read_fraction = j.value("read_fraction", w.read_fraction);
  w.skew_p = j.value("skew_p", w.skew_p);
  w.keyspace = j.value("keyspace", w.keyspace);
  w.ops_per_client = j.value("ops_per_client", w.ops_per_client);
  if (j.contains("read_consistency"))
    w.read_consistency = read_consistency_from_string(j.at("read_consistency").get<std::string>());
  w.rng_seed = j.value("rng_seed", w.rng_seed);
}

inline void to_json(nlohmann::json& j, const WorkloadSpec& w) {
  j = nlohmann::json{{"num_clients", w.num_clients},
                     {"read_fraction", w.read_fraction},
                     {"skew_p", w.skew_p},
                     {"keyspace", w.keyspace},
                     {"ops_per_client", w.ops_per_client},
                     {"read_consistency", to_string(w.read_consistency)},
                     {"rng_seed", w.rng_seed}};
}

inline void from_json(const nlohmann::json& j, DeploymentPlan& p) {
  p.f = j.value("f", p.f);
  p.num_proposers = j.value("num_proposers", p.num_proposers);
  p.num_proxy_leaders = j.value("num_proxy_leaders", p.num_proxy_leaders);
  p.grid_rows = j.value("grid_rows", p.grid_rows);
  p.grid_cols = j.value("grid_cols", p.grid_cols);
  p.num_replicas = j.value("num_replicas", p.num_replicas);
  p.num_batchers = j.value("num_batchers", p.num_batchers);
  p.num_unbatchers = j.value("num_unbatchers", p.num_unbatchers);
  p.batching_enabled = j.value("batching_enabled", p.batching_enabled);
  p.batch_size = j.value("batch_size", p.batch_size);
  p.batch_timeout = j.value("batch_timeout", p.batch_timeout);
  if (j.contains("variant")) {
    auto v = j.at("variant").get<std::string>();
    if (v == "coupled") p.variant = Variant::Coupled;
    else if (v == "compartmentalized") p.variant = Variant::Compartmentalized;
    else throw std::invalid_argument("unknown variant: " + v);
  }
  if (j.contains("selection")) {
    auto v = j.at("selection").get<std::string>();
    if (v == "random") p.selection = SelectionPolicy::Random;
    else if (v == "round_robin") p.selection = SelectionPolicy::RoundRobin;
    else throw std::invalid_argument("unknown selection: " + v);
  }
  if (j.contains("workload")) p.workload = j.at("workload").get<WorkloadSpec>();
}

inline void to_json(nlohmann::json& j, const DeploymentPlan& p) {
  j = nlohmann::json{
      {"f", p.f},
      {"num_proposers", p.num_proposers},
      {"num_proxy_leaders", p.num_proxy_leaders},
      {"grid_rows", p.grid_rows},
      {"grid_cols", p.grid_cols},
      {"num_replicas", p.num_replicas},
      {"num_batchers", p.num_batchers},
      {"num_unbatchers", p.num_unbatchers},
      {"batching_enabled", p.batching_enabled},
      {"batch_size", p.batch_size},
      {"batch_timeout", p.batch_timeout},
      {"variant", p.variant == Variant::Coupled ? "coupled" : "compartmentalized"},
      {"selection", p.selection == SelectionPolicy::Random ? "random" : "round_robin"},
  };
  if (p.workload) j["workload"] = *p.workload;
}

}  // namespace paxkit
