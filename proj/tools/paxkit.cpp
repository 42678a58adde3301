#include <atomic>
#include <csignal>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "paxkit/checker.hpp"
#include "paxkit/eval.hpp"
#include "paxkit/net_server.hpp"
#include "paxkit/sim.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitAudit = 3;
constexpr int kExitViolation = 4;
constexpr int kExitCapacity = 5;

std::atomic<bool> g_stop{false};
void handle_term(int) { g_stop.store(true); }

paxkit::DeploymentPlan load_plan(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open plan file: " + path);
  return nlohmann::json::parse(in).get<paxkit::DeploymentPlan>();
}

int cmd_run(const std::string& plan_path, std::uint64_t seed, paxkit::SimTime duration,
            const std::string& out_history, const std::string& out_metrics, double drop,
            double dup, bool fifo, paxkit::SimTime service) {
  paxkit::DeploymentPlan plan;
  try {
    plan = load_plan(plan_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  if (auto err = paxkit::validate_plan(plan)) {
    std::cerr << err->to_string() << "\n";
    return kExitConfig;
  }
  paxkit::NetModel net;
  net.drop_probability = drop;
  net.duplicate_probability = dup;
  net.reordering = !fifo;
  paxkit::CapacityModel cap;
  if (service > 0)
    for (paxkit::Role r :
         {paxkit::Role::Client, paxkit::Role::Batcher, paxkit::Role::Proposer,
          paxkit::Role::ProxyLeader, paxkit::Role::Acceptor, paxkit::Role::Replica,
          paxkit::Role::Unbatcher})
      cap.service[r] = service;
  auto result = paxkit::run_simulation(plan, net, cap, paxkit::FaultPlan{}, seed, duration);

  paxkit::save_history(result.trace.history, out_history);
  {
    std::ofstream out(out_metrics, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write metrics file: " << out_metrics << "\n";
      return kExitConfig;
    }
    out << paxkit::csv_header() << "\n" << paxkit::csv_row(plan, result.metrics) << "\n";
  }
  auto problems = paxkit::audit_trace(result.trace);
  if (!problems.empty()) {
    for (const auto& p : problems) std::cerr << p << "\n";
    return kExitAudit;
  }
  return kExitOk;
}

int cmd_check(const std::string& history_path, const std::string& mode) {
  paxkit::History h;
  try {
    h = paxkit::load_history(history_path);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  auto result = mode == "sequential" ? paxkit::check_sequential(h) : paxkit::check_linearizable(h);
  switch (result.verdict) {
    case paxkit::Verdict::Ok:
      std::cout << "OK " << h.events.size() / 2 << "\n";
      return kExitOk;
    case paxkit::Verdict::Capacity:
      std::cerr << result.detail << "\n";
      return kExitCapacity;
    case paxkit::Verdict::Violation:
      std::cout << "VIOLATION";
      for (const auto& [client, seq] : result.core) std::cout << " " << client << ":" << seq;
      std::cout << "\n";
      return kExitViolation;
  }
  return kExitOk;
}

int cmd_model(int n, double alpha, double write_frac) {
  if (n < 1 || alpha <= 0.0 || write_frac < 0.0 || write_frac > 1.0) {
    std::cerr << "invalid model parameters\n";
    return kExitConfig;
  }
  double peak = paxkit::analytical_peak_throughput(n, alpha, write_frac);
  double limit = paxkit::throughput_limit(alpha, write_frac);
  std::cout.precision(10);
  std::cout << "peak_throughput " << peak << "\n";
  if (std::isinf(limit)) std::cout << "limit unbounded\n";
  else std::cout << "limit " << limit << "\n";
  return kExitOk;
}

int cmd_ablation(std::uint64_t seed, paxkit::SimTime duration, paxkit::SimTime service,
                 const std::string& out_path) {
  auto steps = paxkit::run_ablation(paxkit::default_ablation_steps(), service, seed, duration);
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << "step,peak_throughput\n";
  for (const auto& s : steps) os << s.label << "," << s.throughput << "\n";
  if (out_path.empty()) {
    std::cout << os.str();
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) {
      std::cerr << "cannot write: " << out_path << "\n";
      return kExitConfig;
    }
    out << os.str();
  }
  return kExitOk;
}

int cmd_serve(const std::string& plan_path, const std::string& listen) {
  paxkit::DeploymentPlan plan;
  paxkit::SockAddr addr;
  try {
    plan = load_plan(plan_path);
    addr = paxkit::parse_addr(listen);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  if (auto err = paxkit::validate_plan(plan)) {
    std::cerr << err->to_string() << "\n";
    return kExitConfig;
  }
  try {
    paxkit::Server server(std::move(plan), addr);
    std::signal(SIGTERM, handle_term);
    std::signal(SIGINT, handle_term);
    std::cerr << "listening on " << addr.host << ":" << server.port() << "\n";
    server.run(&g_stop);
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"replicated state machine experiment toolkit"};
  app.require_subcommand(1);

  std::string plan_path, out_history = "history.jsonl", out_metrics = "metrics.csv";
  std::uint64_t seed = 1;
  paxkit::SimTime duration = 100'000;
  double drop = 0.0, dup = 0.0;
  bool fifo = false;
  paxkit::SimTime service = 0;

  auto* run = app.add_subcommand("run", "simulate one deployment and write history + metrics");
  run->add_option("--plan", plan_path)->required();
  run->add_option("--seed", seed);
  run->add_option("--duration", duration);
  run->add_option("--out-history", out_history);
  run->add_option("--out-metrics", out_metrics);
  run->add_option("--drop-prob", drop);
  run->add_option("--dup-prob", dup);
  run->add_flag("--fifo", fifo, "disable reordering (per-channel FIFO delivery)");
  run->add_option("--service", service, "per-message service ticks for every role");

  std::string history_path, mode = "linearizable";
  auto* check = app.add_subcommand("check", "check a history file");
  check->add_option("--history", history_path)->required();
  check->add_option("--mode", mode)->check(CLI::IsMember({"linearizable", "sequential"}));

  int n = 1;
  double alpha = 1.0, write_frac = 0.0;
  auto* model = app.add_subcommand("model", "closed-form read-scaling throughput model");
  model->add_option("--n", n)->required();
  model->add_option("--alpha", alpha)->required();
  model->add_option("--write-frac", write_frac)->required();

  std::uint64_t ab_seed = 1;
  paxkit::SimTime ab_duration = 60'000, ab_service = 20;
  std::string ab_out;
  auto* ablation = app.add_subcommand("ablation", "decoupling/scaling throughput walk");
  ablation->add_option("--seed", ab_seed);
  ablation->add_option("--duration", ab_duration);
  ablation->add_option("--service", ab_service);
  ablation->add_option("--out", ab_out);

  std::string listen = "127.0.0.1:0";
  auto* serve = app.add_subcommand("serve", "host all roles over the socket transport");
  serve->add_option("--plan", plan_path)->required();
  serve->add_option("--listen", listen);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  if (run->parsed())
    return cmd_run(plan_path, seed, duration, out_history, out_metrics, drop, dup, fifo, service);
  if (check->parsed()) return cmd_check(history_path, mode);
  if (model->parsed()) return cmd_model(n, alpha, write_frac);
  if (ablation->parsed()) return cmd_ablation(ab_seed, ab_duration, ab_service, ab_out);
  if (serve->parsed()) return cmd_serve(plan_path, listen);
  return kExitConfig;
}
