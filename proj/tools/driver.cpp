// Closed-loop write driver for a `serve` deployment: sends writes over the
// frame transport and reports how many OK replies came back.
#include <iostream>

#include <CLI11.hpp>

#include "paxkit/net_server.hpp"

int main(int argc, char** argv) {
  CLI::App app{"closed-loop client driver for a served deployment"};
  std::string connect = "127.0.0.1:9000";
  int clients = 1, ops = 100;
  std::int64_t timeout_ms = 10'000;
  app.add_option("--connect", connect)->required();
  app.add_option("--clients", clients);
  app.add_option("--ops", ops);
  app.add_option("--timeout-ms", timeout_ms);
  CLI11_PARSE(app, argc, argv);

  try {
    int okays = paxkit::drive_writes(paxkit::parse_addr(connect), clients, ops, timeout_ms);
    std::cout << okays << " OK\n";
    return okays == clients * ops ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
}
