#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crossing {

/// Thrown when an operation receives inputs outside its documented domain.
class ContractViolation : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a parameter set or scenario is internally inconsistent.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Physical clamps on the commanded longitudinal acceleration [m/s^2].
inline constexpr double kAccelMin = -4.0;
inline constexpr double kAccelMax = 2.5;

// Fixed constants of the safe-crossing gap test.
inline constexpr double kSafetyFactor = 1.5;
inline constexpr double kPedSpeedFloor = 0.1;  // m/s

// Increase of raw intention above its anchored value that renews the
// interaction (restarts the discount clock).
inline constexpr double kIntentionRenewalDelta = 0.1;

struct PedestrianObservation {
  double d_ped = 0.0;      // signed distance to the vehicle path centerline [m]
  double v_ped = 0.0;      // speed toward / through the road [m/s]
  double i_ped_raw = 0.0;  // crossing intention in [0, 1]
  double t_obs = 0.0;      // [s]
};

struct VehicleState {
  double d_veh = 0.0;  // distance from the vehicle front to the conflict point [m]
  double v_veh = 0.0;  // [m/s], never negative
  double a_veh = 0.0;  // last commanded acceleration [m/s^2]
};

struct DecisionParams {
  // The seven tunable parameters.
  double i_ped_H = 0.5;
  double i_ped_L = 0.25;
  double v_ped_H = 1.8;
  double v_ped_L = -0.2;
  double k_veh_acc = 0.6;
  double k_veh_dec = 1.5;
  double k_disc = 1.0;

  // Zone radii and loop constants.
  double d_NZ = 4.0;
  double d_CA = 2.0;
  double L_corridor = 4.0;
  double v_veh_d = 8.33;
  double k_num = 1e-6;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;
  bool valid() const noexcept;
};

enum class Mode { Crossing, Stopping, Done };

std::string_view to_string(Mode mode) noexcept;
Mode mode_from_string(std::string_view text);

/// Predicate values evaluated on one tick.
struct EventFlags {
  bool pedestrian_crossed = false;
  bool pedestrian_gone_through = false;
  bool vehicle_gone_through = false;
  bool pedestrian_close_to_road = false;
  bool pedestrian_in_collision_area = false;

  friend bool operator==(const EventFlags&, const EventFlags&) = default;
};

struct DecisionOutput {
  Mode mode = Mode::Crossing;
  double a_veh_des = 0.0;
  EventFlags predicates;
  bool can_cross_safely = false;
  double i_ped_eff = 0.0;
};

/// Start of the current interaction and the raw intention sampled there.
struct InteractionAnchor {
  double t0 = 0.0;
  double i_ped_t0 = 0.0;
};

bool is_pedestrian_close_to_road(double d_ped, double d_NZ);
bool is_pedestrian_in_collision_area(double d_ped, double d_CA);

/// i0 * 0.9^(k_disc * t_elapsed)
double discount_intention(double i_ped_t0, double k_disc, double t_elapsed);

/// Crossing tracks v_veh_d, Stopping tracks standstill. Result is clamped to
/// [kAccelMin, kAccelMax]. Done uses the Crossing law.
double accel_command(Mode mode, double v_veh, const DecisionParams& params);

/// Gap test: the vehicle at its current speed clears the collision corridor,
/// with margin kSafetyFactor, before the pedestrian can reach the collision area.
bool can_veh_safe_cross(const VehicleState& veh, const PedestrianObservation& ped,
                        const DecisionParams& params);

/// One evaluation of the decision rule. `events` carries the engine's
/// crossing/gone-through flags; zone predicates are recomputed here.
DecisionOutput decide(const VehicleState& veh, const PedestrianObservation& ped,
                      const DecisionParams& params, const InteractionAnchor& anchor,
                      const EventFlags& events);

/// Tracks when the interaction starts and when a renewed crossing attempt
/// restarts it. One instance per simulation.
class InteractionTracker {
 public:
  /// Updates the anchor for this tick and returns it.
  InteractionAnchor update(const PedestrianObservation& ped, const DecisionParams& params);

  bool started() const noexcept { return started_; }
  const InteractionAnchor& anchor() const noexcept { return anchor_; }

 private:
  bool started_ = false;
  InteractionAnchor anchor_;
};

}  // namespace crossing
