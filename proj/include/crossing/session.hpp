#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crossing/engine.hpp"

namespace crossing {

enum class SessionState { Paused, Running, Finished };

std::string_view to_string(SessionState state) noexcept;

struct SessionOptions {
  double pace = 1.0;           // simulated seconds per wall-clock second
  double max_rate = 30.0;      // state broadcasts per wall-clock second
  double grace_period = 30.0;  // seconds without clients before pausing
};

/// One live engine driven by wall-clock time. Not thread-safe: the owner
/// serialises calls (the server runs every session on one strand).
///
/// Inputs received between ticks are applied at the next tick; the pedestrian
/// keeps the last value until the next input. Inputs carrying a simulation
/// timestamp `t` older than the current time minus one tick are dropped.
/// Sessions for non-external pedestrian models are spectator sessions: they
/// run normally and ignore inputs.
class Session {
 public:
  Session(std::string id, ScenarioConfig config, SessionOptions options = {});

  const std::string& id() const noexcept { return id_; }
  SessionState state() const noexcept { return state_; }
  bool spectator() const noexcept { return spectator_; }
  double pace() const noexcept { return options_.pace; }
  const ScenarioConfig& config() const noexcept { return config_; }
  const Simulation& simulation() const noexcept { return sim_; }
  std::size_t dropped_inputs() const noexcept { return dropped_; }
  std::size_t ignored_inputs() const noexcept { return ignored_; }

  nlohmann::json hello() const;
  nlohmann::json snapshot() const;

  /// Handles an inbound client message. Returns messages addressed to the
  /// sender (errors, notices) and whether the state must be re-broadcast.
  struct Reply {
    std::vector<nlohmann::json> to_sender;
    std::vector<nlohmann::json> broadcast;
  };
  Reply handle(const nlohmann::json& message, double wall_now);

  /// Advances the engine to wall-clock time `wall_now` [s] and returns the
  /// messages to broadcast (decimated to max_rate, plus the final state).
  std::vector<nlohmann::json> advance(double wall_now);

  void client_connected(double wall_now);
  void client_disconnected(double wall_now);
  std::size_t clients() const noexcept { return clients_; }

  /// Inputs as applied, in the form an offline run accepts.
  std::vector<ExternalInput> input_log() const;
  std::vector<TraceRecord> trace() const { return sim_.trace(); }

 private:
  void start(double wall_now);
  void reset();
  nlohmann::json finished_message() const;

  std::string id_;
  ScenarioConfig config_;
  SessionOptions options_;
  Simulation sim_;
  bool spectator_ = false;
  SessionState state_ = SessionState::Paused;
  double last_wall_ = 0.0;
  double budget_ = 0.0;  // simulated seconds owed to the engine
  std::optional<double> last_broadcast_;
  std::size_t clients_ = 0;
  std::optional<double> unattended_since_;
  std::size_t dropped_ = 0;
  std::size_t ignored_ = 0;
};

}  // namespace crossing
