#pragma once

// Adapter for an out-of-process meta-action oracle speaking newline-delimited
// JSON over the stdio of a spawned command or over a TCP stream.
//
//   request:  {"v":1,"format":"short"|"long","scenario":{...}}
//   response: {"v":1,"action":"GO_STRAIGHT"|"TURN_LEFT"|"TURN_RIGHT","rationale":"...","hazard_ids":[...]}

#include <fcntl.h>
#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <memory>
#include <set>
#include <string>
#include <thread>

#include "vlad/json_io.hpp"
#include "vlad/oracle.hpp"
#include "vlad/scene_io.hpp"

namespace vlad {

inline constexpr std::chrono::milliseconds kDefaultOracleTimeout{10'000};

/// One in-flight request at a time; not thread-safe.
class LineTransport {
 public:
  virtual ~LineTransport() = default;
  virtual void send_line(const std::string& line) = 0;
  /// Returns the next line without its terminator, or throws OracleError
  /// (Timeout when nothing complete arrives before the deadline).
  virtual std::string read_line(std::chrono::milliseconds timeout) = 0;
};

namespace detail {

inline void ignore_sigpipe() {
  static const bool once = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return true;
  }();
  (void)once;
}

inline void write_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::write(fd, data.data() + off, data.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw OracleError(OracleError::Kind::Io, std::string("oracle write failed: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(n);
  }
}

/// Buffered line reader over a non-owning file descriptor.
class FdLineReader {
 public:
  std::string read_line(int fd, std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto pos = buffer_.find('\n'); pos != std::string::npos) {
        std::string line = buffer_.substr(0, pos);
        buffer_.erase(0, pos + 1);
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0)
        throw OracleError(OracleError::Kind::Timeout,
                          "oracle timed out after " + std::to_string(timeout.count()) + " ms");
      pollfd p{fd, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw OracleError(OracleError::Kind::Io, std::string("oracle poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) continue;
      char chunk[4096];
      const ssize_t n = ::read(fd, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR || errno == EAGAIN) continue;
        throw OracleError(OracleError::Kind::Io, std::string("oracle read failed: ") + std::strerror(errno));
      }
      if (n == 0)
        throw OracleError(OracleError::Kind::Io, "oracle closed the stream" +
                                                     (buffer_.empty() ? std::string() : "; partial payload: " + buffer_));
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  void clear() { buffer_.clear(); }

 private:
  std::string buffer_;
};

}  // namespace detail

/// Runs `/bin/sh -c command` with piped stdin/stdout; stderr is inherited.
class ProcessTransport final : public LineTransport {
 public:
  explicit ProcessTransport(std::string command) : command_(std::move(command)) {
    detail::ignore_sigpipe();
    spawn();
  }

  ProcessTransport(const ProcessTransport&) = delete;
  ProcessTransport& operator=(const ProcessTransport&) = delete;

  ~ProcessTransport() override { stop(); }

  void send_line(const std::string& line) override {
    if (pid_ <= 0) spawn();
    detail::write_all(to_child_, line + "\n");
  }

  std::string read_line(std::chrono::milliseconds timeout) override {
    try {
      return reader_.read_line(from_child_, timeout);
    } catch (const OracleError&) {
      // The stream position is unknown after a failure; start fresh next time.
      stop();
      throw;
    }
  }

 private:
  void spawn() {
    int in_pipe[2], out_pipe[2];
    if (::pipe(in_pipe) != 0) throw OracleError(OracleError::Kind::Spawn, "pipe() failed");
    if (::pipe(out_pipe) != 0) {
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      throw OracleError(OracleError::Kind::Spawn, "pipe() failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) throw OracleError(OracleError::Kind::Spawn, "fork() failed");
    if (pid == 0) {
      ::dup2(in_pipe[0], STDIN_FILENO);
      ::dup2(out_pipe[1], STDOUT_FILENO);
      ::close(in_pipe[0]);
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      ::close(out_pipe[1]);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    ::fcntl(in_pipe[1], F_SETFD, FD_CLOEXEC);
    ::fcntl(out_pipe[0], F_SETFD, FD_CLOEXEC);
    pid_ = pid;
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
    reader_.clear();
  }

  void stop() noexcept {
    if (pid_ <= 0) return;
    ::close(to_child_);
    ::close(from_child_);
    // Give a well-behaved child a moment to exit on EOF, then kill it.
    int status = 0;
    for (int i = 0; i < 20; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, &status, 0);
    pid_ = -1;
  }

  std::string command_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  detail::FdLineReader reader_;
};

class TcpTransport final : public LineTransport {
 public:
  TcpTransport(std::string host, std::string port) : host_(std::move(host)), port_(std::move(port)) {
    detail::ignore_sigpipe();
    connect();
  }

  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

  ~TcpTransport() override { disconnect(); }

  void send_line(const std::string& line) override {
    if (fd_ < 0) connect();
    detail::write_all(fd_, line + "\n");
  }

  std::string read_line(std::chrono::milliseconds timeout) override {
    try {
      return reader_.read_line(fd_, timeout);
    } catch (const OracleError&) {
      disconnect();
      throw;
    }
  }

 private:
  void connect() {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (const int rc = ::getaddrinfo(host_.c_str(), port_.c_str(), &hints, &res); rc != 0)
      throw OracleError(OracleError::Kind::Spawn, "cannot resolve " + host_ + ":" + port_ + ": " + ::gai_strerror(rc));
    int fd = -1;
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw OracleError(OracleError::Kind::Spawn, "cannot connect to " + host_ + ":" + port_);
    fd_ = fd;
    reader_.clear();
  }

  void disconnect() noexcept {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

  std::string host_;
  std::string port_;
  int fd_ = -1;
  detail::FdLineReader reader_;
};

inline std::string encode_oracle_request(const Scenario& s, ExplanationFormat format) {
  Json j;
  j["v"] = 1;
  j["format"] = std::string(to_string(format));
  j["scenario"] = to_json(s);
  return dump_deterministic(j);
}

struct OracleRequest {
  Scenario scenario;
  ExplanationFormat format = ExplanationFormat::Short;
};

/// Server-side decoding of a request line.
inline OracleRequest decode_oracle_request(const std::string& line) {
  const Json j = Json::parse(line);
  const JsonReader r(j, 1, "");
  if (r.at("v").integer() != 1) r.at("v").fail("unsupported protocol version");
  const auto format = parse_format(r.at("format").string());
  if (!format) r.at("format").fail("expected short or long");
  return {scenario_from_json(r.at("scenario").node()), *format};
}

/// Validates a response line against the scenario it answers. The single
/// rationale string fills both the short and long fields.
inline MetaDecision decode_oracle_response(const std::string& payload, const Scenario& s) {
  auto malformed = [&](const std::string& why) -> OracleError {
    return OracleError(OracleError::Kind::Malformed, "malformed oracle response (" + why + "): " + payload);
  };
  Json j;
  try {
    j = Json::parse(payload);
  } catch (const Json::parse_error&) {
    throw malformed("not JSON");
  }
  if (!j.is_object()) throw malformed("not an object");
  if (!j.contains("v") || !j["v"].is_number_integer() || j["v"].get<int>() != 1) throw malformed("v must be 1");
  if (!j.contains("action") || !j["action"].is_string()) throw malformed("missing action");
  const auto label = j["action"].get<std::string>();
  const auto action = parse_meta_action(label);
  if (!action) throw OracleError(OracleError::Kind::UnknownLabel, "unknown meta-action label '" + label + "': " + payload);
  if (!j.contains("rationale") || !j["rationale"].is_string() || j["rationale"].get<std::string>().empty())
    throw malformed("missing rationale");
  MetaDecision d;
  d.action = *action;
  d.rationale_short = d.rationale_long = j["rationale"].get<std::string>();
  if (j.contains("hazard_ids")) {
    if (!j["hazard_ids"].is_array()) throw malformed("hazard_ids must be an array");
    std::set<std::int64_t> known;
    for (const auto& a : s.agents) known.insert(a.id);
    for (const auto& h : j["hazard_ids"]) {
      if (!h.is_number_integer()) throw malformed("hazard id must be an integer");
      const auto id = h.get<std::int64_t>();
      if (!known.count(id)) throw malformed("hazard id " + std::to_string(id) + " not in scenario");
      d.hazard_ids.push_back(id);
    }
  }
  return d;
}

/// Oracle endpoint: "exec:<shell command>" or "tcp:<host>:<port>".
class ExternalOracle final : public MetaActionOracle {
 public:
  explicit ExternalOracle(std::string endpoint, std::chrono::milliseconds timeout = kDefaultOracleTimeout)
      : endpoint_(std::move(endpoint)), timeout_(timeout) {
    if (endpoint_.starts_with("exec:")) {
      if (endpoint_.size() == 5) throw ConfigError("oracle endpoint 'exec:' needs a command");
    } else if (endpoint_.starts_with("tcp:")) {
      const auto rest = endpoint_.substr(4);
      const auto colon = rest.rfind(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size())
        throw ConfigError("oracle endpoint must look like tcp:HOST:PORT, got '" + endpoint_ + "'");
    } else {
      throw ConfigError("unknown oracle endpoint '" + endpoint_ + "'");
    }
  }

  MetaDecision decide(const Scenario& s, ExplanationFormat format) override {
    if (!transport_) transport_ = open();
    transport_->send_line(encode_oracle_request(s, format));
    return decode_oracle_response(transport_->read_line(timeout_), s);
  }

  std::string name() const override { return endpoint_; }

 private:
  std::unique_ptr<LineTransport> open() const {
    if (endpoint_.starts_with("exec:")) return std::make_unique<ProcessTransport>(endpoint_.substr(5));
    const auto rest = endpoint_.substr(4);
    const auto colon = rest.rfind(':');
    return std::make_unique<TcpTransport>(rest.substr(0, colon), rest.substr(colon + 1));
  }

  std::string endpoint_;
  std::chrono::milliseconds timeout_;
  std::unique_ptr<LineTransport> transport_;
};

/// Answer line for a decision, as an external oracle would send it.
inline std::string encode_oracle_response(const MetaDecision& d, ExplanationFormat format) {
  Json j;
  j["v"] = 1;
  j["action"] = std::string(to_string(d.action));
  j["rationale"] = d.rationale(format);
  j["hazard_ids"] = d.hazard_ids;
  return dump_deterministic(j);
}

}  // namespace vlad
