#pragma once

#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <json.hpp>

namespace crossing::testing {

struct HttpResult {
  int status = 0;
  std::string body;
};

/// One-shot HTTP request against 127.0.0.1:port.
HttpResult http_request(unsigned short port, const std::string& method, const std::string& target,
                        const std::string& body = "");

/// Scripted websocket client for the session protocol. Reads are async with
/// a deadline so a silent server fails the test instead of hanging it.
class LoopbackClient {
 public:
  LoopbackClient();
  ~LoopbackClient();

  void connect(unsigned short port, const std::string& target);
  void send(const nlohmann::json& message);
  /// Next message, or nullopt once `timeout` passes.
  std::optional<nlohmann::json> next(std::chrono::milliseconds timeout);
  /// First message satisfying `pred`; skipped messages are dropped.
  std::optional<nlohmann::json> wait_for(const std::function<bool(const nlohmann::json&)>& pred,
                                         std::chrono::milliseconds timeout);
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace crossing::testing
