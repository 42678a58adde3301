#pragma once

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "paxkit/core.hpp"

namespace paxkit {

// One invocation or response event of a client operation.
struct HistEvent {
  SimTime t = 0;
  bool inv = true;
  ClientId client = 0;
  std::int64_t seq = 0;
  OpType type = OpType::Write;
  std::string key;
  std::optional<std::string> value;  // writes
  std::optional<std::string> out;    // responses; nullopt on reads of absent keys
};

struct History {
  std::vector<HistEvent> events;

  void sort() {
    std::stable_sort(events.begin(), events.end(),
                     [](const HistEvent& a, const HistEvent& b) { return a.t < b.t; });
  }
};

inline nlohmann::ordered_json hist_event_to_json(const HistEvent& e) {
  nlohmann::ordered_json op;
  op["type"] = e.type == OpType::Read ? "read" : "write";
  op["key"] = e.key;
  op["value"] = e.value ? nlohmann::ordered_json(*e.value) : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json j;
  j["t"] = e.t;
  j["kind"] = e.inv ? "inv" : "res";
  j["client"] = e.client;
  j["seq"] = e.seq;
  j["op"] = std::move(op);
  j["out"] = e.out ? nlohmann::ordered_json(*e.out) : nlohmann::ordered_json(nullptr);
  return j;
}

inline std::string history_to_jsonl(const History& h) {
  std::string s;
  for (const auto& e : h.events) {
    s += hist_event_to_json(e).dump();
    s += '\n';
  }
  return s;
}

inline HistEvent hist_event_from_json(const nlohmann::json& j) {
  HistEvent e;
  e.t = j.at("t").get<SimTime>();
  e.inv = j.at("kind").get<std::string>() == "inv";
  e.client = j.at("client").get<ClientId>();
  e.seq = j.at("seq").get<std::int64_t>();
  e.type = j.at("op").at("type").get<std::string>() == "read" ? OpType::Read : OpType::Write;
  e.key = j.at("op").at("key").get<std::string>();
  if (j.at("op").contains("value") && !j.at("op").at("value").is_null())
    e.value = j.at("op").at("value").get<std::string>();
  if (j.contains("out") && !j.at("out").is_null()) e.out = j.at("out").get<std::string>();
  return e;
}

inline History history_from_jsonl(std::istream& in) {
  History h;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    h.events.push_back(hist_event_from_json(nlohmann::json::parse(line)));
  }
  return h;
}

inline History load_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open history file: " + path);
  return history_from_jsonl(in);
}

inline void save_history(const History& h, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write history file: " + path);
  out << history_to_jsonl(h);
}

}  // namespace paxkit
