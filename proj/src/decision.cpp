#include "crossing/decision.hpp"

#include <algorithm>
#include <cmath>

namespace crossing {

namespace {

void require_finite(double value, const char* name) {
  if (!std::isfinite(value)) {
    throw ContractViolation(std::string(name) + " must be finite");
  }
}

}  // namespace

void DecisionParams::validate() const {
  const double all[] = {i_ped_H, i_ped_L,  v_ped_H,    v_ped_L, k_veh_acc, k_veh_dec,
                        k_disc,  d_NZ,     d_CA,       L_corridor, v_veh_d, k_num};
  for (double value : all) {
    if (!std::isfinite(value)) throw ConfigError("decision parameters must be finite");
  }
  if (i_ped_L < 0.0 || i_ped_H > 1.0) throw ConfigError("intention thresholds must lie in [0, 1]");
  if (!(i_ped_L < i_ped_H)) throw ConfigError("i_ped_L must be below i_ped_H");
  if (!(v_ped_L < v_ped_H)) throw ConfigError("v_ped_L must be below v_ped_H");
  if (!(k_veh_acc > 0.0) || !(k_veh_dec > 0.0)) throw ConfigError("feedback gains must be positive");
  if (k_disc < 0.0) throw ConfigError("k_disc must be non-negative");
  if (!(d_CA > 0.0) || !(d_CA < d_NZ)) throw ConfigError("zone radii need 0 < d_CA < d_NZ");
  if (!(L_corridor > 0.0)) throw ConfigError("L_corridor must be positive");
  if (!(v_veh_d > 0.0)) throw ConfigError("v_veh_d must be positive");
  if (!(k_num > 0.0)) throw ConfigError("k_num must be positive");
}

bool DecisionParams::valid() const noexcept {
  try {
    validate();
    return true;
  } catch (const ConfigError&) {
    return false;
  }
}

std::string_view to_string(Mode mode) noexcept {
  switch (mode) {
    case Mode::Crossing:
      return "Crossing";
    case Mode::Stopping:
      return "Stopping";
    case Mode::Done:
      return "Done";
  }
  return "Done";
}

Mode mode_from_string(std::string_view text) {
  if (text == "Crossing") return Mode::Crossing;
  if (text == "Stopping") return Mode::Stopping;
  if (text == "Done") return Mode::Done;
  throw ContractViolation("unknown mode '" + std::string(text) + "'");
}

bool is_pedestrian_close_to_road(double d_ped, double d_NZ) {
  require_finite(d_ped, "d_ped");
  require_finite(d_NZ, "d_NZ");
  if (!(d_NZ > 0.0)) throw ContractViolation("d_NZ must be positive");
  return std::abs(d_ped) < d_NZ;
}

bool is_pedestrian_in_collision_area(double d_ped, double d_CA) {
  require_finite(d_ped, "d_ped");
  require_finite(d_CA, "d_CA");
  if (!(d_CA > 0.0)) throw ContractViolation("d_CA must be positive");
  return std::abs(d_ped) < d_CA;
}

double discount_intention(double i_ped_t0, double k_disc, double t_elapsed) {
  require_finite(i_ped_t0, "i_ped_t0");
  require_finite(k_disc, "k_disc");
  require_finite(t_elapsed, "t_elapsed");
  if (i_ped_t0 < 0.0 || i_ped_t0 > 1.0) throw ContractViolation("intention must lie in [0, 1]");
  if (k_disc < 0.0) throw ContractViolation("k_disc must be non-negative");
  if (t_elapsed < 0.0) throw ContractViolation("elapsed time must be non-negative");
  return i_ped_t0 * std::pow(0.9, k_disc * t_elapsed);
}

double accel_command(Mode mode, double v_veh, const DecisionParams& params) {
  require_finite(v_veh, "v_veh");
  if (v_veh < 0.0) throw ContractViolation("v_veh must be non-negative");
  const double raw = mode == Mode::Stopping ? params.k_veh_dec * (0.0 - v_veh)
                                            : params.k_veh_acc * (params.v_veh_d - v_veh);
  return std::clamp(raw, kAccelMin, kAccelMax);
}

bool can_veh_safe_cross(const VehicleState& veh, const PedestrianObservation& ped,
                        const DecisionParams& params) {
  if (std::abs(ped.d_ped) < params.d_CA) return false;
  const double t_veh_clear = (veh.d_veh + params.L_corridor) / (veh.v_veh + params.k_num);
  const double t_ped_arrive = std::max(0.0, std::abs(ped.d_ped) - params.d_CA) /
                              std::max(ped.v_ped, kPedSpeedFloor);
  return t_veh_clear * kSafetyFactor < t_ped_arrive;
}

DecisionOutput decide(const VehicleState& veh, const PedestrianObservation& ped,
                      const DecisionParams& params, const InteractionAnchor& anchor,
                      const EventFlags& events) {
  params.validate();
  require_finite(ped.d_ped, "d_ped");
  require_finite(ped.v_ped, "v_ped");
  require_finite(veh.d_veh, "d_veh");
  require_finite(veh.v_veh, "v_veh");
  if (ped.i_ped_raw < 0.0 || ped.i_ped_raw > 1.0) {
    throw ContractViolation("raw intention must lie in [0, 1]");
  }
  if (anchor.t0 > ped.t_obs) throw ContractViolation("interaction start lies in the future");

  DecisionOutput out;
  out.predicates = events;
  out.predicates.pedestrian_close_to_road = is_pedestrian_close_to_road(ped.d_ped, params.d_NZ);
  out.predicates.pedestrian_in_collision_area =
      is_pedestrian_in_collision_area(ped.d_ped, params.d_CA);
  out.i_ped_eff = discount_intention(anchor.i_ped_t0, params.k_disc, ped.t_obs - anchor.t0);
  out.can_cross_safely = can_veh_safe_cross(veh, ped, params);

  const auto& p = out.predicates;
  const double v = ped.v_ped;
  const double i = out.i_ped_eff;

  if (p.vehicle_gone_through || p.pedestrian_crossed) {
    out.mode = Mode::Done;
  } else if (out.can_cross_safely) {
    out.mode = Mode::Crossing;
  } else if (p.pedestrian_in_collision_area) {
    out.mode = Mode::Stopping;
  } else if (p.pedestrian_gone_through) {
    out.mode = Mode::Crossing;
  } else if (p.pedestrian_close_to_road && v > 0.0) {
    out.mode = Mode::Stopping;
  } else if (v > params.v_ped_H || i > params.i_ped_H) {
    out.mode = Mode::Stopping;
  } else if (params.v_ped_L < v && v < params.v_ped_H && params.i_ped_L < i && i < params.i_ped_H) {
    out.mode = Mode::Stopping;
  } else {
    out.mode = Mode::Crossing;
  }
  out.a_veh_des = accel_command(out.mode, veh.v_veh, params);
  return out;
}

InteractionAnchor InteractionTracker::update(const PedestrianObservation& ped,
                                             const DecisionParams& params) {
  if (!started_) {
    // Before the interaction starts the intention is used undiscounted.
    anchor_ = {ped.t_obs, ped.i_ped_raw};
    if (is_pedestrian_close_to_road(ped.d_ped, params.d_NZ) || ped.i_ped_raw >= params.i_ped_L) {
      started_ = true;
    }
  } else if (ped.i_ped_raw > anchor_.i_ped_t0 + kIntentionRenewalDelta) {
    anchor_ = {ped.t_obs, ped.i_ped_raw};
  }
  return anchor_;
}

}  // namespace crossing
