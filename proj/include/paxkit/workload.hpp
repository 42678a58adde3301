#pragma once

#include <string>
#include <vector>

#include "paxkit/core.hpp"
#include "paxkit/messages.hpp"

namespace paxkit {

// Op-kind and key draws for one client, deterministic in (rng_seed, client).
// Lazily generated: perf runs use millions of ops per client, so the stream
// must not materialize them all.
//
// Key skew: with probability skew_p the op targets hot key "0"; otherwise a
// key drawn uniformly from 2..keyspace (key 1 is deliberately never used, so
// reads of it exercise the absent-key path only via direct tests).
class OpStream {
 public:
  OpStream(const WorkloadSpec& w, ClientId client)
      : w_(w),
        client_(client),
        rng_(mix_seed(w.rng_seed, 0x776b0000ULL + static_cast<std::uint64_t>(client))) {}

  std::int64_t total() const { return w_.ops_per_client; }

  // Must be called once per seq, in order.
  Command next(std::int64_t seq) {
    std::string key;
    if (rng_.unit() < w_.skew_p) {
      key = "0";
    } else {
      key = std::to_string(2 + rng_.below_int(w_.keyspace - 1));
    }
    if (rng_.unit() < w_.read_fraction) return make_read(client_, seq, std::move(key));
    std::string value = "v" + std::to_string(client_) + "." + std::to_string(seq);
    return make_write(client_, seq, std::move(key), std::move(value));
  }

 private:
  WorkloadSpec w_;
  ClientId client_;
  Rng rng_;
};

inline std::vector<Command> generate_client_ops(const WorkloadSpec& w, ClientId client) {
  OpStream stream(w, client);
  std::vector<Command> ops;
  ops.reserve(static_cast<std::size_t>(w.ops_per_client));
  for (std::int64_t seq = 0; seq < w.ops_per_client; ++seq) ops.push_back(stream.next(seq));
  return ops;
}

}  // namespace paxkit
