#include <doctest.h>

#include <atomic>
#include <thread>

#include "paxkit/net_server.hpp"

using namespace paxkit;

TEST_CASE("socket server answers closed-loop writes end to end") {
  DeploymentPlan plan;  // compartmentalized defaults: 2 proxies, 2x2 grid, 2 replicas
  REQUIRE(plan_violations(plan).empty());

  Server server(plan, SockAddr{"127.0.0.1", 0});  // ephemeral port
  REQUIRE(server.port() > 0);

  std::atomic<bool> stop{false};
  std::thread th([&] { server.run(&stop); });

  int okays = drive_writes(SockAddr{"127.0.0.1", server.port()}, 5, 20);
  CHECK(okays == 100);

  // a second connection keeps working (fresh bindings, same log); new client
  // ids, because reused (client, seq) pairs are deduplicated as retransmits
  okays = drive_writes(SockAddr{"127.0.0.1", server.port()}, 2, 5, 10'000, 100);
  CHECK(okays == 10);

  stop = true;
  th.join();
}

TEST_CASE("a malformed frame drops only the offending connection") {
  DeploymentPlan plan;
  Server server(plan, SockAddr{"127.0.0.1", 0});
  std::atomic<bool> stop{false};
  std::thread th([&] { server.run(&stop); });

  // open a raw connection and send garbage with a plausible length prefix
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in sa{};
  sa.sin_family = AF_INET;
  sa.sin_port = htons(static_cast<std::uint16_t>(server.port()));
  ::inet_pton(AF_INET, "127.0.0.1", &sa.sin_addr);
  REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&sa), sizeof(sa)) == 0);
  const char junk[] = "\x00\x00\x00\x04haha";
  REQUIRE(::write(fd, junk, 8) == 8);
  ::close(fd);

  // the server must still serve well-formed traffic afterwards
  int okays = drive_writes(SockAddr{"127.0.0.1", server.port()}, 1, 10);
  CHECK(okays == 10);

  stop = true;
  th.join();
}
