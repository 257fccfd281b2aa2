#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "loopscope/session/session.hpp"

namespace loopscope {

struct Endpoint {
  std::string host = "127.0.0.1";
  unsigned short port = 7878;

  /// "host:port", ":port" or "port". Throws DomainError.
  static Endpoint parse(std::string_view text);
  std::string str() const;
};

/// The flag if given, else LOOPSCOPE_ADDR, else 127.0.0.1:7878.
Endpoint resolve_endpoint(const std::optional<std::string>& flag);

/// Serves the session protocol on one TCP port. A connection whose first
/// bytes are "GET " is upgraded to WebSocket (one message per text frame);
/// anything else is read as newline-delimited JSON.
class Server {
 public:
  /// Binds at once; port 0 picks a free port.
  Server(SessionManager& manager, const Endpoint& endpoint, unsigned io_threads = 2);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const;
  /// Start serving on background threads.
  void start();
  /// Block until stop() is called (or SIGINT/SIGTERM when `handle_signals`).
  void wait(bool handle_signals = false);
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Blocking client for tests and scripts.
class ProtocolClient {
 public:
  enum class Transport { Ndjson, WebSocket };

  ProtocolClient(const std::string& host, unsigned short port, Transport transport);
  ~ProtocolClient();

  void send(const nlohmann::json& msg);
  /// Next server message; throws Error on timeout or disconnect.
  nlohmann::json receive(int timeout_ms = 5000);
  /// Read messages until one of `type` arrives (inclusive).
  std::vector<nlohmann::json> receive_until(const std::string& type, int timeout_ms = 5000);
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace loopscope
