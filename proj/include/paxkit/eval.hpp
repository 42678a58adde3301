#pragma once

#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "paxkit/sim.hpp"

namespace paxkit {

// Peak throughput of n replicas with per-replica rate alpha when a fraction
// f_w of operations are writes (every replica executes every write; reads are
// spread evenly): n*alpha / (n*f_w + f_r).
inline double analytical_peak_throughput(int n, double alpha, double write_fraction) {
  double f_r = 1.0 - write_fraction;
  return static_cast<double>(n) * alpha / (static_cast<double>(n) * write_fraction + f_r);
}

// Limit as n grows: alpha / f_w (unbounded for a read-only workload).
inline double throughput_limit(double alpha, double write_fraction) {
  if (write_fraction <= 0.0) return std::numeric_limits<double>::infinity();
  return alpha / write_fraction;
}

// One closed-loop run under a uniform per-message service cost; returns
// completions per tick over the steady-state window.
inline double measure_peak_throughput(const DeploymentPlan& plan, SimTime service,
                                      std::uint64_t seed, SimTime duration,
                                      const CapacityModel* cap_override = nullptr) {
  CapacityModel cap;
  if (cap_override) {
    cap = *cap_override;
  } else {
    for (Role r : {Role::Client, Role::Batcher, Role::Proposer, Role::ProxyLeader, Role::Acceptor,
                   Role::Replica, Role::Unbatcher})
      cap.service[r] = service;
  }
  return run_simulation(plan, NetModel{}, cap, FaultPlan{}, seed, duration,
                        quiescent_timeouts(duration))
      .metrics.throughput;
}

struct AblationStep {
  std::string label;
  DeploymentPlan plan;
  double throughput = 0.0;
};

// The decoupling walk: coupled baseline, then proxy leaders, then scale the
// stages that are (and are not) the bottleneck.
inline std::vector<AblationStep> default_ablation_steps(int num_clients = 50,
                                                        std::int64_t ops_per_client = 1'000'000) {
  WorkloadSpec w;
  w.num_clients = num_clients;
  w.read_fraction = 0.0;  // write-only: acceptors must never become the bottleneck
  w.ops_per_client = ops_per_client;
  w.rng_seed = 7;

  DeploymentPlan coupled;
  coupled.variant = Variant::Coupled;
  coupled.f = 1;
  coupled.num_proposers = 2;
  coupled.num_proxy_leaders = 0;
  coupled.num_replicas = 2;
  coupled.workload = w;

  DeploymentPlan comp = coupled;
  comp.variant = Variant::Compartmentalized;
  comp.num_proxy_leaders = 2;
  comp.grid_rows = 2;
  comp.grid_cols = 2;

  auto with_proxies = [&](int k) {
    auto p = comp;
    p.num_proxy_leaders = k;
    return p;
  };
  auto extra_replica = with_proxies(7);
  extra_replica.num_replicas = 3;
  auto extra_column = extra_replica;
  extra_column.grid_cols = 3;

  return {
      {"coupled", coupled, 0.0},
      {"proxy_leaders_2", with_proxies(2), 0.0},
      {"proxy_leaders_7", with_proxies(7), 0.0},
      {"extra_replica", extra_replica, 0.0},
      {"extra_acceptor_column", extra_column, 0.0},
  };
}

inline std::vector<AblationStep> run_ablation(std::vector<AblationStep> steps, SimTime service,
                                              std::uint64_t seed, SimTime duration) {
  for (auto& s : steps) s.throughput = measure_peak_throughput(s.plan, service, seed, duration);
  return steps;
}

// --- CSV output (one row per run) ---

inline std::string csv_header() {
  return "variant,clients,readfrac,replicas,rows,cols,proxies,batch,throughput,p50,p99";
}

inline std::string csv_row(const DeploymentPlan& plan, const Metrics& m) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  int clients = plan.workload ? plan.workload->num_clients : 0;
  double readfrac = plan.workload ? plan.workload->read_fraction : 0.0;
  os << (plan.variant == Variant::Coupled ? "coupled" : "compartmentalized") << ',' << clients
     << ',' << readfrac << ',' << plan.num_replicas << ',' << plan.grid_rows << ','
     << plan.grid_cols << ',' << plan.num_proxy_leaders << ','
     << (plan.batching_enabled ? plan.batch_size : 0) << ',' << m.throughput << ',' << m.p50
     << ',' << m.p99;
  return os.str();
}

}  // namespace paxkit
