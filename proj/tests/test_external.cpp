#include <gtest/gtest.h>

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>

#include "test_support.hpp"
#include "vlad/external_oracle.hpp"
#include "vlad/simgen.hpp"

using namespace vlad;
using namespace std::chrono_literals;

namespace {

std::string mock(const std::string& args = "") { return std::string("exec:") + MOCK_ORACLE_BIN + " " + args; }

Scenario hazard_scene() {
  GenSpec g;
  g.n_scenarios = 1;
  g.seed = 4;
  g.suite = Suite::HazardVru;
  return generate(g).front();
}

OracleError::Kind failure_kind(ExternalOracle& o, const Scenario& s) {
  try {
    o.decide(s, ExplanationFormat::Short);
  } catch (const OracleError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no OracleError";
  return OracleError::Kind::Io;
}

/// mock_oracle --listen 0 as a child process, killed on scope exit.
class TcpMock {
 public:
  explicit TcpMock(const std::string& mode) {
    int fds[2];
    if (::pipe(fds) != 0) throw std::runtime_error("pipe");
    pid_ = ::fork();
    if (pid_ == 0) {
      ::dup2(fds[1], STDOUT_FILENO);
      ::close(fds[0]);
      ::close(fds[1]);
      ::execl(MOCK_ORACLE_BIN, MOCK_ORACLE_BIN, "--listen", "0", "--mode", mode.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    FILE* f = ::fdopen(fds[0], "r");
    if (std::fscanf(f, "listening %d", &port_) != 1) port_ = -1;
    std::fclose(f);
  }
  ~TcpMock() {
    ::kill(pid_, SIGTERM);
    ::waitpid(pid_, nullptr, 0);
  }
  int port() const { return port_; }

 private:
  pid_t pid_ = -1;
  int port_ = -1;
};

}  // namespace

TEST(Protocol, RequestRoundTrip) {
  const auto s = hazard_scene();
  for (auto f : {ExplanationFormat::Short, ExplanationFormat::Long}) {
    const auto line = encode_oracle_request(s, f);
    EXPECT_EQ(line.find('\n'), std::string::npos);
    const auto req = decode_oracle_request(line);
    EXPECT_EQ(req.scenario, s);
    EXPECT_EQ(req.format, f);
  }
}

TEST(Protocol, ResponseRoundTrip) {
  const auto s = hazard_scene();
  const auto d = rule_oracle_decide(s, ExplanationFormat::Long);
  const auto back = decode_oracle_response(encode_oracle_response(d, ExplanationFormat::Long), s);
  EXPECT_EQ(back.action, d.action);
  EXPECT_EQ(back.hazard_ids, d.hazard_ids);
  EXPECT_EQ(back.rationale_long, d.rationale_long);
  EXPECT_EQ(back.rationale_short, d.rationale_long);
}

TEST(Protocol, ResponseValidation) {
  const auto s = hazard_scene();
  auto kind = [&](const std::string& payload) {
    try {
      decode_oracle_response(payload, s);
    } catch (const OracleError& e) {
      return static_cast<int>(e.kind());
    }
    return -1;
  };
  const int malformed = static_cast<int>(OracleError::Kind::Malformed);
  EXPECT_EQ(kind("[]"), malformed);
  EXPECT_EQ(kind("{"), malformed);
  EXPECT_EQ(kind(R"({"action":"GO_STRAIGHT","rationale":"x"})"), malformed);
  EXPECT_EQ(kind(R"({"v":2,"action":"GO_STRAIGHT","rationale":"x"})"), malformed);
  EXPECT_EQ(kind(R"({"v":1,"action":"GO_STRAIGHT","rationale":""})"), malformed);
  EXPECT_EQ(kind(R"({"v":1,"action":"GO_STRAIGHT","rationale":"x","hazard_ids":["a"]})"), malformed);
  EXPECT_EQ(kind(R"({"v":1,"action":"go_straight","rationale":"x"})"), static_cast<int>(OracleError::Kind::UnknownLabel));
  EXPECT_EQ(kind(R"({"v":1,"action":"GO_STRAIGHT","rationale":"x"})"), -1);
}

TEST(ExternalOracle, EndpointParsing) {
  EXPECT_THROW(ExternalOracle("exec:"), ConfigError);
  EXPECT_THROW(ExternalOracle("tcp:localhost"), ConfigError);
  EXPECT_THROW(ExternalOracle("tcp::80"), ConfigError);
  EXPECT_THROW(ExternalOracle("http://x"), ConfigError);
  EXPECT_NO_THROW(ExternalOracle("tcp:127.0.0.1:9"));
}

TEST(ExternalOracle, ExecLoopbackMatchesRule) {
  ExternalOracle o(mock());
  GenSpec g;
  g.n_scenarios = 40;
  g.seed = 11;
  for (const auto& s : generate(g)) {
    for (auto f : {ExplanationFormat::Short, ExplanationFormat::Long}) {
      const auto got = o.decide(s, f);
      const auto want = rule_oracle_decide(s, f);
      EXPECT_EQ(got.action, want.action);
      EXPECT_EQ(got.hazard_ids, want.hazard_ids);
      EXPECT_EQ(got.rationale(f), want.rationale(f));
    }
  }
}

TEST(ExternalOracle, FixedMode) {
  ExternalOracle o(mock("--mode fixed"));
  const auto d = o.decide(hazard_scene(), ExplanationFormat::Long);
  EXPECT_EQ(d.action, MetaAction::TurnLeft);
  EXPECT_EQ(d.rationale_long, "Fixed answer.");
}

TEST(ExternalOracle, BadLabel) {
  ExternalOracle o(mock("--mode bad-label"));
  EXPECT_EQ(failure_kind(o, hazard_scene()), OracleError::Kind::UnknownLabel);
}

TEST(ExternalOracle, GarbageCarriesPayload) {
  ExternalOracle o(mock("--mode garbage"));
  try {
    o.decide(hazard_scene(), ExplanationFormat::Short);
    FAIL();
  } catch (const OracleError& e) {
    EXPECT_EQ(e.kind(), OracleError::Kind::Malformed);
    EXPECT_NE(std::string(e.what()).find("this is not json"), std::string::npos);
  }
}

TEST(ExternalOracle, StrayHazardId) {
  ExternalOracle o(mock("--mode stray-hazard"));
  EXPECT_EQ(failure_kind(o, hazard_scene()), OracleError::Kind::Malformed);
}

TEST(ExternalOracle, MissingCommand) {
  ExternalOracle o("exec:/nonexistent/oracle-binary");
  const auto k = failure_kind(o, hazard_scene());
  EXPECT_TRUE(k == OracleError::Kind::Io || k == OracleError::Kind::Spawn);
}

TEST(ExternalOracle, ShortTimeout) {
  ExternalOracle o(mock("--sleep-ms 800"), 200ms);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(failure_kind(o, hazard_scene()), OracleError::Kind::Timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, 700ms);
}

TEST(ExternalOracle, DefaultTimeoutIsTenSeconds) {
  EXPECT_EQ(kDefaultOracleTimeout, 10s);
  ExternalOracle o(mock("--sleep-ms 11000"));
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(failure_kind(o, hazard_scene()), OracleError::Kind::Timeout);
  const auto waited = std::chrono::steady_clock::now() - t0;
  EXPECT_GE(waited, 10s);
  EXPECT_LT(waited, 11s);
}

TEST(ExternalOracle, TcpLoopback) {
  TcpMock server("rule");
  ASSERT_GT(server.port(), 0);
  ExternalOracle o("tcp:127.0.0.1:" + std::to_string(server.port()));
  const auto s = hazard_scene();
  const auto d = o.decide(s, ExplanationFormat::Short);
  EXPECT_EQ(d.action, rule_oracle_decide(s).action);
  EXPECT_EQ(d.action, MetaAction::GoStraight);
  EXPECT_EQ(o.decide(s, ExplanationFormat::Long).rationale_long, rule_oracle_decide(s, ExplanationFormat::Long).rationale_long);
}

TEST(ExternalOracle, TcpRefused) {
  ExternalOracle o("tcp:127.0.0.1:1");
  const auto k = failure_kind(o, hazard_scene());
  EXPECT_TRUE(k == OracleError::Kind::Spawn || k == OracleError::Kind::Io);
}
