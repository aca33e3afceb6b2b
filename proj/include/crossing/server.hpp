#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "crossing/session.hpp"

namespace crossing {

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::filesystem::path scenario_dir = "scenarios";
  SessionOptions session;
  double tick_interval = 0.005;  // wall seconds between engine advances
  std::size_t max_queued_messages = 256;  // per client, before it is dropped
};

/// HTTP + websocket front end for live sessions.
///
///   GET  /scenarios               shipped scenario files
///   GET  /sessions                open session ids
///   POST /sessions                {"scenario": file, "set": ["k=v"], "config": ini, "pace": x}
///   GET  /sessions/{id}/trace     trace CSV
///   GET  /sessions/{id}/inputs    applied input log ("tick v i; ...")
///   WS   /sessions/{id}/ws        hello, then state stream; accepts input/control
///
/// All sessions and connections live on one I/O thread.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts the I/O thread; returns the bound port.
  unsigned short start();
  /// Blocks on the calling thread until SIGINT/SIGTERM or stop().
  void run();
  void stop();

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace crossing
