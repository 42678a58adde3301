#pragma once

#include <map>
#include <optional>

#include "paxkit/roles/common.hpp"

namespace paxkit {

struct AcceptorState {
  std::optional<Ballot> promised;
  std::map<Slot, Vote> votes;
  Slot vote_watermark = kNoSlot;  // max slot voted in, -1 if none
};

class Acceptor {
 public:
  Acceptor(NodeId self, RoleEnv env) : self_(self), env_(env) {}

  const AcceptorState& state() const { return st_; }

  void on_message(const Envelope& env, Effects& fx) {
    std::visit(
        [&](const auto& m) {
          using T = std::decay_t<decltype(m)>;
          if constexpr (std::is_same_v<T, Phase1a>) on_phase1a(env.from, m, fx);
          else if constexpr (std::is_same_v<T, Phase2a>) on_phase2a(env.from, m, fx);
          else if constexpr (std::is_same_v<T, PreRead>) on_preread(env.from, m, fx);
        },
        env.msg);
  }

  void on_timer(std::int64_t, Effects&) {}

  void on_phase1a(NodeId from, const Phase1a& m, Effects& fx) {
    if (!st_.promised || m.ballot > *st_.promised) {
      st_.promised = m.ballot;
      Phase1b resp;
      resp.ballot = m.ballot;
      resp.acceptor = self_.idx;
      for (const auto& [slot, vote] : st_.votes)
        if (slot >= m.from_slot) resp.votes.emplace(slot, vote);
      fx.send(from, std::move(resp));
    } else {
      fx.send(from, Nack{*st_.promised});
    }
  }

  void on_phase2a(NodeId from, const Phase2a& m, Effects& fx) {
    if (st_.promised && m.ballot < *st_.promised) {
      fx.send(from, Nack{*st_.promised});
      return;
    }
    st_.promised = m.ballot;
    auto it = st_.votes.find(m.slot);
    if (it == st_.votes.end() || it->second.ballot <= m.ballot)
      st_.votes[m.slot] = Vote{m.ballot, m.value};
    st_.vote_watermark = std::max(st_.vote_watermark, m.slot);
    fx.send(from, Phase2b{m.slot, m.ballot, self_.idx});
  }

  // Read-only: reports the vote watermark, state unchanged.
  void on_preread(NodeId from, const PreRead& m, Effects& fx) const {
    fx.send(from, PreReadAck{m.id, self_.idx, st_.vote_watermark});
  }

 private:
  NodeId self_;
  RoleEnv env_;
  AcceptorState st_;
};

}  // namespace paxkit
