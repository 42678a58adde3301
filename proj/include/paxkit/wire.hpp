#pragma once

#include <cstring>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "paxkit/messages.hpp"

namespace paxkit {

// JSON encoding of the message vocabulary, used by the socket transport.
// Frames are 4-byte big-endian payload length + {"type","from","to","body"}.

inline void to_json(nlohmann::json& j, const Ballot& b) {
  j = {{"round", b.round}, {"proposer", b.proposer}};
}
inline void from_json(const nlohmann::json& j, Ballot& b) {
  b.round = j.at("round").get<std::int64_t>();
  b.proposer = j.at("proposer").get<std::int32_t>();
}

inline void to_json(nlohmann::json& j, const Command& c) {
  const char* type = c.type == OpType::Write ? "write" : c.type == OpType::Read ? "read" : "noop";
  j = {{"client", c.client}, {"seq", c.seq}, {"type", type}, {"key", c.key}, {"value", c.value}};
}
inline void from_json(const nlohmann::json& j, Command& c) {
  c.client = j.at("client").get<ClientId>();
  c.seq = j.at("seq").get<std::int64_t>();
  auto t = j.at("type").get<std::string>();
  c.type = t == "write" ? OpType::Write : t == "read" ? OpType::Read : OpType::Noop;
  c.key = j.at("key").get<std::string>();
  c.value = j.at("value").get<std::string>();
}

inline void to_json(nlohmann::json& j, const Batch& b) { j = {{"commands", b.commands}}; }
inline void from_json(const nlohmann::json& j, Batch& b) {
  b.commands = j.at("commands").get<std::vector<Command>>();
}

inline void to_json(nlohmann::json& j, const Vote& v) {
  j = {{"ballot", v.ballot}, {"value", v.value}};
}
inline void from_json(const nlohmann::json& j, Vote& v) {
  v.ballot = j.at("ballot").get<Ballot>();
  v.value = j.at("value").get<Batch>();
}

inline void to_json(nlohmann::json& j, const ReadId& r) {
  j = {{"origin", r.origin}, {"seq", r.seq}, {"round", r.round}};
}
inline void from_json(const nlohmann::json& j, ReadId& r) {
  r.origin = j.at("origin").get<std::int64_t>();
  r.seq = j.at("seq").get<std::int64_t>();
  r.round = j.at("round").get<std::int32_t>();
}

inline void to_json(nlohmann::json& j, const ReplyEntry& e) {
  j = {{"client", e.client},
       {"seq", e.seq},
       {"out", e.out ? nlohmann::json(*e.out) : nlohmann::json(nullptr)},
       {"slot", e.slot}};
}
inline void from_json(const nlohmann::json& j, ReplyEntry& e) {
  e.client = j.at("client").get<ClientId>();
  e.seq = j.at("seq").get<std::int64_t>();
  if (!j.at("out").is_null()) e.out = j.at("out").get<std::string>();
  e.slot = j.at("slot").get<Slot>();
}

inline Role role_from_string(const std::string& s) {
  if (s == "client") return Role::Client;
  if (s == "batcher") return Role::Batcher;
  if (s == "proposer") return Role::Proposer;
  if (s == "proxy") return Role::ProxyLeader;
  if (s == "acceptor") return Role::Acceptor;
  if (s == "replica") return Role::Replica;
  if (s == "unbatcher") return Role::Unbatcher;
  throw std::invalid_argument("unknown role: " + s);
}

inline void to_json(nlohmann::json& j, const NodeId& n) {
  j = {{"role", role_name(n.role)}, {"idx", n.idx}};
}
inline void from_json(const nlohmann::json& j, NodeId& n) {
  n.role = role_from_string(j.at("role").get<std::string>());
  n.idx = j.at("idx").get<int>();
}

namespace detail {

inline std::map<Slot, Vote> votes_from_json(const nlohmann::json& j) {
  std::map<Slot, Vote> votes;
  for (const auto& item : j)
    votes[item.at("slot").get<Slot>()] = item.at("vote").get<Vote>();
  return votes;
}

inline nlohmann::json votes_to_json(const std::map<Slot, Vote>& votes) {
  auto arr = nlohmann::json::array();
  for (const auto& [slot, vote] : votes) arr.push_back({{"slot", slot}, {"vote", vote}});
  return arr;
}

}  // namespace detail

inline nlohmann::json message_body(const Message& m) {
  return std::visit(
      [](const auto& v) -> nlohmann::json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ClientRequest>) return {{"cmd", v.cmd}};
        else if constexpr (std::is_same_v<T, BatchProposal>) return {{"batch", v.batch}};
        else if constexpr (std::is_same_v<T, Phase1a>)
          return {{"ballot", v.ballot}, {"from_slot", v.from_slot}};
        else if constexpr (std::is_same_v<T, Phase1b>)
          return {{"ballot", v.ballot}, {"acceptor", v.acceptor},
                  {"votes", detail::votes_to_json(v.votes)}};
        else if constexpr (std::is_same_v<T, Phase2a>)
          return {{"slot", v.slot}, {"ballot", v.ballot}, {"value", v.value}};
        else if constexpr (std::is_same_v<T, Phase2b>)
          return {{"slot", v.slot}, {"ballot", v.ballot}, {"acceptor", v.acceptor}};
        else if constexpr (std::is_same_v<T, Nack>) return {{"promised", v.promised}};
        else if constexpr (std::is_same_v<T, Chosen>)
          return {{"slot", v.slot}, {"value", v.value}};
        else if constexpr (std::is_same_v<T, ChosenAck>) return {{"slot", v.slot}};
        else if constexpr (std::is_same_v<T, PreRead>) return {{"id", v.id}};
        else if constexpr (std::is_same_v<T, PreReadAck>)
          return {{"id", v.id}, {"acceptor", v.acceptor}, {"vote_watermark", v.vote_watermark}};
        else if constexpr (std::is_same_v<T, ReadRequest>)
          return {{"id", v.id}, {"reads", v.reads}, {"required", v.required},
                  {"level", to_string(v.level)}, {"reply_via_unbatcher", v.reply_via_unbatcher}};
        else if constexpr (std::is_same_v<T, Reply>) return {{"id", v.id}, {"entry", v.entry}};
        else if constexpr (std::is_same_v<T, ResultBatch>) return {{"entries", v.entries}};
        else if constexpr (std::is_same_v<T, Elect>) return {{"ballot", v.ballot}};
        else return {{"proposer", v.proposer}};  // LeaderHint
      },
      m);
}

inline Message message_from(const std::string& type, const nlohmann::json& b) {
  if (type == "client_request") return ClientRequest{b.at("cmd").get<Command>()};
  if (type == "batch_proposal") return BatchProposal{b.at("batch").get<Batch>()};
  if (type == "phase1a")
    return Phase1a{b.at("ballot").get<Ballot>(), b.at("from_slot").get<Slot>()};
  if (type == "phase1b")
    return Phase1b{b.at("ballot").get<Ballot>(), b.at("acceptor").get<int>(),
                   detail::votes_from_json(b.at("votes"))};
  if (type == "phase2a")
    return Phase2a{b.at("slot").get<Slot>(), b.at("ballot").get<Ballot>(),
                   b.at("value").get<Batch>()};
  if (type == "phase2b")
    return Phase2b{b.at("slot").get<Slot>(), b.at("ballot").get<Ballot>(),
                   b.at("acceptor").get<int>()};
  if (type == "nack") return Nack{b.at("promised").get<Ballot>()};
  if (type == "chosen") return Chosen{b.at("slot").get<Slot>(), b.at("value").get<Batch>()};
  if (type == "chosen_ack") return ChosenAck{b.at("slot").get<Slot>()};
  if (type == "pre_read") return PreRead{b.at("id").get<ReadId>()};
  if (type == "pre_read_ack")
    return PreReadAck{b.at("id").get<ReadId>(), b.at("acceptor").get<int>(),
                      b.at("vote_watermark").get<Slot>()};
  if (type == "read_request")
    return ReadRequest{b.at("id").get<ReadId>(), b.at("reads").get<std::vector<Command>>(),
                       b.at("required").get<Slot>(),
                       read_consistency_from_string(b.at("level").get<std::string>()),
                       b.at("reply_via_unbatcher").get<bool>()};
  if (type == "reply") return Reply{b.at("id").get<ReadId>(), b.at("entry").get<ReplyEntry>()};
  if (type == "result_batch")
    return ResultBatch{b.at("entries").get<std::vector<ReplyEntry>>()};
  if (type == "elect") return Elect{b.at("ballot").get<Ballot>()};
  if (type == "leader_hint") return LeaderHint{b.at("proposer").get<int>()};
  throw std::invalid_argument("unknown message type: " + type);
}

inline std::string encode_frame(const Envelope& e) {
  nlohmann::json j = {
      {"type", message_type(e.msg)}, {"from", e.from}, {"to", e.to}, {"body", message_body(e.msg)}};
  std::string payload = j.dump();
  std::string frame;
  frame.resize(4 + payload.size());
  auto n = static_cast<std::uint32_t>(payload.size());
  frame[0] = static_cast<char>((n >> 24) & 0xff);
  frame[1] = static_cast<char>((n >> 16) & 0xff);
  frame[2] = static_cast<char>((n >> 8) & 0xff);
  frame[3] = static_cast<char>(n & 0xff);
  std::memcpy(frame.data() + 4, payload.data(), payload.size());
  return frame;
}

// Extracts one complete frame from the front of buf, if present. Throws on a
// malformed payload; callers treat that as a protocol error on the connection.
inline bool decode_frame(std::string& buf, Envelope& out) {
  if (buf.size() < 4) return false;
  std::uint32_t n = (static_cast<std::uint8_t>(buf[0]) << 24) |
                    (static_cast<std::uint8_t>(buf[1]) << 16) |
                    (static_cast<std::uint8_t>(buf[2]) << 8) | static_cast<std::uint8_t>(buf[3]);
  if (n > (1u << 24)) throw std::invalid_argument("frame too large");
  if (buf.size() < 4 + n) return false;
  auto j = nlohmann::json::parse(buf.substr(4, n));
  out.from = j.at("from").get<NodeId>();
  out.to = j.at("to").get<NodeId>();
  out.msg = message_from(j.at("type").get<std::string>(), j.at("body"));
  buf.erase(0, 4 + n);
  return true;
}

}  // namespace paxkit
