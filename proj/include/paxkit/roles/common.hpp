#pragma once

#include "paxkit/core.hpp"
#include "paxkit/messages.hpp"
#include "paxkit/quorums.hpp"
#include "paxkit/trace.hpp"

namespace paxkit {

struct Timeouts {
  SimTime client_retry = 150;
  SimTime proxy_retry = 60;
  SimTime chosen_resend = 60;
  SimTime phase1_retry = 120;
  SimTime preread_retry = 120;
  int max_chosen_resends = 30;
  int max_phase2_cycles = 100;  // full passes over the quorums before giving up
};

// Shared read-only context handed to every role instance.
struct RoleEnv {
  const DeploymentPlan* plan = nullptr;
  Timeouts timeouts;
  Trace* trace = nullptr;

  GridQuorumSystem grid() const {
    return GridQuorumSystem(plan->grid_rows, plan->grid_cols);
  }
  MajorityQuorumSystem majority() const { return MajorityQuorumSystem(plan->f); }
  bool coupled() const { return plan->variant == Variant::Coupled; }
};

}  // namespace paxkit
