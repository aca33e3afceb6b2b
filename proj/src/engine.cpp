#include "crossing/engine.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

namespace crossing {

void ScenarioConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
  if (!(t_max > 0.0) || !std::isfinite(t_max)) throw ConfigError("t_max must be positive");
  geometry.validate();
  if (!(exit_distance >= geometry.L_corridor)) {
    throw ConfigError("exit_distance must be at least L_corridor");
  }
  if (!(vehicle.d_veh0 > 0.0) || !std::isfinite(vehicle.d_veh0)) {
    throw ConfigError("d_veh0 must be positive");
  }
  if (!(vehicle.v_veh0 >= 0.0) || vehicle.v_veh0 > kVehicleSpeedCap) {
    throw ConfigError("v_veh0 must lie in [0, 30] m/s");
  }
  if (!std::isfinite(pedestrian.d_ped0)) throw ConfigError("d_ped0 must be finite");
  if (!(pedestrian.v_ped0 >= 0.0) || pedestrian.v_ped0 > kPedSpeedMax) {
    throw ConfigError("v_ped0 must lie in [0, 3] m/s");
  }
  if (!(pedestrian.i_ped0 >= 0.0) || pedestrian.i_ped0 > 1.0) {
    throw ConfigError("i_ped0 must lie in [0, 1]");
  }
  installed_decision().validate();
  switch (model.kind) {
    case PedestrianSourceKind::Sfm:
      model.sfm.validate();
      break;
    case PedestrianSourceKind::Mdp:
      model.mdp.validate();
      break;
    case PedestrianSourceKind::Scripted:
      validate_script(model.script);
      break;
    case PedestrianSourceKind::External:
      break;
  }
}

DecisionParams ScenarioConfig::installed_decision() const {
  DecisionParams p = decision;
  p.d_NZ = geometry.d_NZ;
  p.d_CA = geometry.d_CA;
  p.L_corridor = geometry.L_corridor;
  return p;
}

void ScenarioConfig::prepare() {
  validate();
  if (model.kind == PedestrianSourceKind::Mdp && !model.solved_mdp) {
    MdpSpec spec = model.mdp;
    spec.d_CA = geometry.d_CA;
    model.solved_mdp = PedestrianMdp::solve(spec);
  }
}

VehicleState vehicle_step(const VehicleState& veh, double a_cmd, double dt) {
  if (!(dt > 0.0)) throw ContractViolation("dt must be positive");
  const double a = std::clamp(a_cmd, kAccelMin, kAccelMax);
  VehicleState next;
  next.v_veh = std::clamp(veh.v_veh + a * dt, 0.0, kVehicleSpeedCap);
  next.d_veh = veh.d_veh - next.v_veh * dt;
  next.a_veh = a;
  return next;
}

EventFlags evaluate_events(const VehicleState& veh, const PedestrianState& ped,
                           const Geometry& geometry) {
  EventFlags f;
  f.pedestrian_gone_through = ped.d_ped > geometry.d_CA;
  f.pedestrian_crossed = ped.d_ped >= geometry.crossing_length / 2.0;
  f.vehicle_gone_through = veh.d_veh < -geometry.L_corridor;
  f.pedestrian_close_to_road = is_pedestrian_close_to_road(ped.d_ped, geometry.d_NZ);
  f.pedestrian_in_collision_area = is_pedestrian_in_collision_area(ped.d_ped, geometry.d_CA);
  return f;
}

double ttc(double d_veh, double v_veh, double k_num) {
  if (!(k_num > 0.0)) throw ContractViolation("k_num must be positive");
  return std::abs(d_veh / (v_veh + k_num));
}

namespace {

PedestrianSource make_source(const ScenarioConfig& c) {
  switch (c.model.kind) {
    case PedestrianSourceKind::Sfm:
      return SfmPedestrian{c.model.sfm};
    case PedestrianSourceKind::Mdp:
      return MdpPedestrian{c.model.solved_mdp, 0, c.pedestrian.v_ped0};
    case PedestrianSourceKind::Scripted:
      return ScriptedPedestrian{c.model.script};
    case PedestrianSourceKind::External:
      return ExternalPedestrian(c.pedestrian.v_ped0, c.pedestrian.i_ped0, c.model.inputs);
  }
  throw ConfigError("unknown pedestrian model");
}

}  // namespace

Simulation::Simulation(ScenarioConfig config) : config_(std::move(config)) {
  config_.prepare();
  params_ = config_.installed_decision();
  ctx_ = {config_.geometry, params_.k_num, config_.dt};
  source_ = make_source(config_);
  veh_ = {config_.vehicle.d_veh0, config_.vehicle.v_veh0, 0.0};
  ped_ = {config_.pedestrian.d_ped0, config_.pedestrian.v_ped0, config_.pedestrian.i_ped0};
  trace_.reserve(static_cast<std::size_t>(std::min(config_.t_max / config_.dt, 1e6)) + 1);
}

const TraceRecord& Simulation::step() {
  if (finished()) throw ContractViolation("simulation already finished");
  const double t = time();

  const PedestrianCommand cmd = step_pedestrian(source_, ped_, veh_, ctx_, tick_);
  ped_.v_ped = std::clamp(cmd.v_ped_next, 0.0, kPedSpeedMax);
  ped_.i_ped = std::clamp(cmd.i_ped_next, 0.0, 1.0);

  const PedestrianObservation obs{ped_.d_ped, ped_.v_ped, ped_.i_ped, t};
  const EventFlags events = evaluate_events(veh_, ped_, config_.geometry);
  const InteractionAnchor anchor = tracker_.update(obs, params_);
  const DecisionOutput out = decide(veh_, obs, params_, anchor, events);

  const double a_cmd = config_.vehicle.policy == VehiclePolicy::Decision ? out.a_veh_des : 0.0;
  trace_.push_back({t, veh_.d_veh, veh_.v_veh, a_cmd, ped_.d_ped, ped_.v_ped, ped_.i_ped,
                    out.i_ped_eff, out.mode, out.predicates});

  veh_ = vehicle_step(veh_, a_cmd, config_.dt);
  ped_.d_ped += ped_.v_ped * config_.dt;
  ++tick_;

  if (veh_.d_veh < -config_.exit_distance) {
    outcome_ = RunOutcome::Completed;
  } else if (time() > config_.t_max) {
    outcome_ = RunOutcome::Timeout;
  }
  return trace_.back();
}

TraceRecord Simulation::snapshot() const {
  if (!trace_.empty()) return trace_.back();
  TraceRecord r;
  r.d_veh = veh_.d_veh;
  r.v_veh = veh_.v_veh;
  r.d_ped = ped_.d_ped;
  r.v_ped = ped_.v_ped;
  r.i_raw = ped_.i_ped;
  r.i_eff = ped_.i_ped;
  r.flags = evaluate_events(veh_, ped_, config_.geometry);
  return r;
}

ExternalPedestrian* Simulation::external() noexcept {
  return std::get_if<ExternalPedestrian>(&source_);
}

const ExternalPedestrian* Simulation::external() const noexcept {
  return std::get_if<ExternalPedestrian>(&source_);
}

RunResult Simulation::take_result() {
  RunResult result;
  result.outcome = outcome_;
  if (const auto* ext = external()) result.applied_inputs = ext->applied();
  result.trace = std::move(trace_);
  trace_.clear();
  return result;
}

std::string_view to_string(VehiclePolicy policy) noexcept {
  return policy == VehiclePolicy::Decision ? "decision" : "constant";
}

VehiclePolicy vehicle_policy_from_string(std::string_view text) {
  if (text == "decision") return VehiclePolicy::Decision;
  if (text == "constant") return VehiclePolicy::Constant;
  throw ConfigError("vehicle policy must be decision or constant, got '" + std::string(text) + "'");
}

RunResult run(ScenarioConfig config) {
  Simulation sim(std::move(config));
  while (!sim.finished()) sim.step();
  return sim.take_result();
}

}  // namespace crossing
