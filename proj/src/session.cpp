#include "crossing/session.hpp"

#include <cmath>

#include "crossing/trace_io.hpp"

namespace crossing {

namespace {

constexpr double kEps = 1e-9;

ScenarioConfig prepared(ScenarioConfig config) {
  config.prepare();
  return config;
}

nlohmann::json error(std::string message) {
  return {{"type", "error"}, {"message", std::move(message)}};
}

std::optional<double> number_field(const nlohmann::json& msg, const char* key) {
  const auto it = msg.find(key);
  if (it == msg.end() || !it->is_number()) return std::nullopt;
  const double v = it->get<double>();
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

}  // namespace

std::string_view to_string(SessionState state) noexcept {
  switch (state) {
    case SessionState::Paused:
      return "paused";
    case SessionState::Running:
      return "running";
    case SessionState::Finished:
      return "finished";
  }
  return "paused";
}

Session::Session(std::string id, ScenarioConfig config, SessionOptions options)
    : id_(std::move(id)), config_(prepared(std::move(config))), options_(options), sim_(config_) {
  if (!(options_.pace > 0.0) || !std::isfinite(options_.pace)) {
    throw ContractViolation("session pace must be positive");
  }
  if (!(options_.max_rate > 0.0)) throw ContractViolation("broadcast rate must be positive");
  spectator_ = config_.model.kind != PedestrianSourceKind::External;
}

nlohmann::json Session::hello() const {
  const auto& g = config_.geometry;
  const auto p = config_.installed_decision();
  return {{"type", "hello"},
          {"scenario", config_.name},
          {"session", id_},
          {"model", std::string(to_string(config_.model.kind))},
          {"spectator", spectator_},
          {"state", std::string(to_string(state_))},
          {"pace", options_.pace},
          {"dt", config_.dt},
          {"t_max", config_.t_max},
          {"geometry",
           {{"d_NZ", g.d_NZ}, {"d_CA", g.d_CA}, {"L_corridor", g.L_corridor},
            {"crossing_length", g.crossing_length}}},
          {"thresholds", {{"i_ped_H", p.i_ped_H}, {"i_ped_L", p.i_ped_L}}}};
}

nlohmann::json Session::snapshot() const { return state_message(sim_.snapshot()); }

nlohmann::json Session::finished_message() const {
  return {{"type", "finished"},
          {"outcome", sim_.outcome() == RunOutcome::Timeout ? "timeout" : "completed"},
          {"t", sim_.snapshot().t}};
}

Session::Reply Session::handle(const nlohmann::json& msg, double wall_now) {
  Reply reply;
  const auto type_it = msg.find("type");
  if (!msg.is_object() || type_it == msg.end() || !type_it->is_string()) {
    reply.to_sender.push_back(error("message needs a string 'type'"));
    return reply;
  }
  const auto type = type_it->get<std::string>();
  auto status = [this] {
    return nlohmann::json{{"type", "status"},
                          {"state", std::string(to_string(state_))},
                          {"pace", options_.pace},
                          {"t", sim_.snapshot().t}};
  };

  if (type == "hello") {
    reply.to_sender.push_back(hello());
    reply.to_sender.push_back(snapshot());
  } else if (type == "input") {
    if (spectator_) {
      ++ignored_;
      reply.to_sender.push_back({{"type", "notice"}, {"message", "spectator session ignores inputs"}});
      return reply;
    }
    if (state_ == SessionState::Finished) {
      reply.to_sender.push_back(error("session has finished"));
      return reply;
    }
    const auto v = number_field(msg, "v_ped");
    const auto i = number_field(msg, "i_ped");
    if (!v || !i) {
      reply.to_sender.push_back(error("input needs numeric v_ped and i_ped"));
      return reply;
    }
    if (*v < 0.0 || *v > kPedSpeedMax || *i < 0.0 || *i > 1.0) {
      reply.to_sender.push_back(error("input out of range: v_ped in [0, 3], i_ped in [0, 1]"));
      return reply;
    }
    if (const auto t = number_field(msg, "t")) {
      const double now = sim_.trace().empty() ? 0.0 : sim_.trace().back().t;
      if (*t < now - config_.dt - kEps) {
        ++dropped_;
        reply.to_sender.push_back({{"type", "dropped"}, {"reason", "stale"}, {"t", *t}});
        return reply;
      }
    }
    sim_.external()->push({sim_.tick(), *v, *i});
  } else if (type == "control") {
    const auto action_it = msg.find("action");
    const std::string action =
        action_it != msg.end() && action_it->is_string() ? action_it->get<std::string>() : "";
    if (action == "start") {
      if (state_ == SessionState::Finished) {
        reply.to_sender.push_back(error("session has finished; reset first"));
        return reply;
      }
      start(wall_now);
    } else if (action == "pause") {
      if (state_ == SessionState::Running) state_ = SessionState::Paused;
    } else if (action == "reset") {
      reset();
      reply.broadcast.push_back(status());
      reply.broadcast.push_back(snapshot());
      return reply;
    } else if (action == "set_pace") {
      const auto value = number_field(msg, "value");
      if (!value || !(*value > 0.0)) {
        reply.to_sender.push_back(error("set_pace needs a positive numeric value"));
        return reply;
      }
      options_.pace = *value;
    } else {
      reply.to_sender.push_back(error("unknown control action '" + action + "'"));
      return reply;
    }
    reply.broadcast.push_back(status());
  } else {
    reply.to_sender.push_back(error("unknown message type '" + type + "'"));
  }
  return reply;
}

void Session::start(double wall_now) {
  if (state_ != SessionState::Running) {
    state_ = SessionState::Running;
    last_wall_ = wall_now;
    budget_ = 0.0;
  }
}

void Session::reset() {
  sim_ = Simulation(config_);
  state_ = SessionState::Paused;
  budget_ = 0.0;
  last_broadcast_.reset();
}

std::vector<nlohmann::json> Session::advance(double wall_now) {
  std::vector<nlohmann::json> out;
  const double elapsed = std::max(0.0, wall_now - last_wall_);
  last_wall_ = wall_now;

  if (state_ == SessionState::Running && clients_ == 0 && unattended_since_ &&
      wall_now - *unattended_since_ >= options_.grace_period) {
    state_ = SessionState::Paused;
    out.push_back({{"type", "status"}, {"state", "paused"}, {"pace", options_.pace},
                   {"t", sim_.snapshot().t}, {"reason", "no clients"}});
    return out;
  }
  if (state_ != SessionState::Running) return out;

  budget_ += elapsed * options_.pace;
  bool stepped = false;
  while (budget_ + kEps >= config_.dt && !sim_.finished()) {
    sim_.step();
    budget_ -= config_.dt;
    stepped = true;
  }
  const bool done = sim_.finished();
  if (stepped &&
      (done || !last_broadcast_ || wall_now - *last_broadcast_ + kEps >= 1.0 / options_.max_rate)) {
    out.push_back(snapshot());
    last_broadcast_ = wall_now;
  }
  if (done) {
    state_ = SessionState::Finished;
    out.push_back(finished_message());
  }
  return out;
}

void Session::client_connected(double) {
  ++clients_;
  unattended_since_.reset();
}

void Session::client_disconnected(double wall_now) {
  if (clients_ > 0) --clients_;
  if (clients_ == 0) unattended_since_ = wall_now;
}

std::vector<ExternalInput> Session::input_log() const {
  const auto* ext = sim_.external();
  return ext ? ext->applied() : std::vector<ExternalInput>{};
}

}  // namespace crossing
