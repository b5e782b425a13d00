// Stand-in external oracle speaking the NDJSON protocol on stdio, or on TCP
// with --listen. Used by the tests and the latency harness.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "vlad/external_oracle.hpp"

namespace {

struct Behaviour {
  std::string mode = "rule";
  int sleep_ms = 0;
};

std::string respond(const Behaviour& b, const std::string& line) {
  if (b.sleep_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(b.sleep_ms));
  if (b.mode == "garbage") return "this is not json";
  const auto req = vlad::decode_oracle_request(line);
  if (b.mode == "bad-label") return R"({"v":1,"action":"REVERSE","rationale":"back up","hazard_ids":[]})";
  if (b.mode == "stray-hazard") return R"({"v":1,"action":"GO_STRAIGHT","rationale":"ghost","hazard_ids":[987654]})";
  if (b.mode == "fixed") return R"({"v":1,"action":"TURN_LEFT","rationale":"Fixed answer.","hazard_ids":[]})";
  return vlad::encode_oracle_response(vlad::rule_oracle_decide(req.scenario, req.format), req.format);
}

bool read_line(int fd, std::string& buffer, std::string& line) {
  for (;;) {
    if (auto pos = buffer.find('\n'); pos != std::string::npos) {
      line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      return true;
    }
    char chunk[4096];
    const ssize_t n = ::read(fd, chunk, sizeof chunk);
    if (n <= 0) return false;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
}

void serve(const Behaviour& b, int in_fd, int out_fd) {
  std::string buffer, line;
  while (read_line(in_fd, buffer, line)) {
    std::string reply;
    try {
      reply = respond(b, line);
    } catch (const std::exception& e) {
      std::cerr << "mock_oracle: bad request: " << e.what() << "\n";
      reply = R"({"v":1,"error":"bad request"})";
    }
    reply += "\n";
    if (::write(out_fd, reply.data(), reply.size()) < 0) return;
  }
}

int listen_tcp(const Behaviour& b, int port) {
  const int srv = ::socket(AF_INET, SOCK_STREAM, 0);
  int one = 1;
  ::setsockopt(srv, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::bind(srv, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(srv, 4) != 0) {
    std::perror("mock_oracle: bind/listen");
    return 1;
  }
  socklen_t len = sizeof addr;
  ::getsockname(srv, reinterpret_cast<sockaddr*>(&addr), &len);
  std::cout << "listening " << ntohs(addr.sin_port) << std::endl;
  for (;;) {
    const int conn = ::accept(srv, nullptr, nullptr);
    if (conn < 0) continue;
    serve(b, conn, conn);
    ::close(conn);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mock external meta-action oracle"};
  Behaviour b;
  int port = -1;
  app.add_option("--mode", b.mode, "rule | fixed | bad-label | stray-hazard | garbage")
      ->check(CLI::IsMember({"rule", "fixed", "bad-label", "stray-hazard", "garbage"}));
  app.add_option("--sleep-ms", b.sleep_ms, "Delay before each reply");
  app.add_option("--listen", port, "Serve TCP on this loopback port (0 picks one)");
  CLI11_PARSE(app, argc, argv);
  if (port >= 0) return listen_tcp(b, port);
  serve(b, STDIN_FILENO, STDOUT_FILENO);
  return 0;
}
