#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "crossing/decision.hpp"
#include "crossing/geometry.hpp"
#include "crossing/pedestrian.hpp"

namespace crossing {

inline constexpr double kVehicleSpeedCap = 30.0;  // m/s

enum class VehiclePolicy {
  Decision,  // accelerations from the decision layer
  Constant,  // holds its initial speed; decisions are recorded but not applied
};

std::string_view to_string(VehiclePolicy policy) noexcept;
VehiclePolicy vehicle_policy_from_string(std::string_view text);

struct VehicleInit {
  double d_veh0 = 40.0;
  double v_veh0 = 8.33;
  VehiclePolicy policy = VehiclePolicy::Decision;
};

struct PedestrianInit {
  double d_ped0 = -5.0;
  double v_ped0 = 0.0;
  double i_ped0 = 0.0;
};

struct PedestrianModelConfig {
  PedestrianSourceKind kind = PedestrianSourceKind::Scripted;
  SfmParams sfm;
  MdpSpec mdp;
  Script script;
  std::vector<ExternalInput> inputs;
  // Solved policy for kind == Mdp; filled on demand by prepare().
  std::shared_ptr<const PedestrianMdp> solved_mdp;
};

struct ScenarioConfig {
  std::string name = "scenario";
  double dt = 0.01;
  double t_max = 60.0;
  // The run ends once the vehicle front is this far past the conflict point.
  double exit_distance = 50.0;
  std::uint64_t seed = 0;
  Geometry geometry;
  VehicleInit vehicle;
  PedestrianInit pedestrian;
  PedestrianModelConfig model;
  DecisionParams decision;

  void validate() const;
  /// Decision parameters with the zone radii taken from the geometry.
  DecisionParams installed_decision() const;
  /// Validates and solves the MDP policy if the model needs one.
  void prepare();
};

struct TraceRecord {
  double t = 0.0;
  double d_veh = 0.0;
  double v_veh = 0.0;
  double a_veh = 0.0;
  double d_ped = 0.0;
  double v_ped = 0.0;
  double i_raw = 0.0;
  double i_eff = 0.0;
  Mode mode = Mode::Crossing;
  EventFlags flags;

  friend bool operator==(const TraceRecord&, const TraceRecord&) = default;
};

enum class RunOutcome { Running, Completed, Timeout };

struct RunResult {
  std::vector<TraceRecord> trace;
  RunOutcome outcome = RunOutcome::Running;
  std::vector<ExternalInput> applied_inputs;

  bool timeout() const noexcept { return outcome == RunOutcome::Timeout; }
};

/// Semi-implicit Euler: speed first (clamped to [0, kVehicleSpeedCap]), then
/// position with the new speed. The stored acceleration is clamped.
VehicleState vehicle_step(const VehicleState& veh, double a_cmd, double dt);

EventFlags evaluate_events(const VehicleState& veh, const PedestrianState& ped,
                           const Geometry& geometry);

/// |d_veh / (v_veh + k_num)|
double ttc(double d_veh, double v_veh, double k_num);

/// Fixed-step simulation of one scenario. Owns all mutable state; several
/// instances may run on different threads.
class Simulation {
 public:
  explicit Simulation(ScenarioConfig config);

  /// Advances one tick and returns the record of the tick just taken.
  const TraceRecord& step();

  bool finished() const noexcept { return outcome_ != RunOutcome::Running; }
  RunOutcome outcome() const noexcept { return outcome_; }
  std::int64_t tick() const noexcept { return tick_; }
  double time() const noexcept { return static_cast<double>(tick_) * config_.dt; }

  const ScenarioConfig& config() const noexcept { return config_; }
  const VehicleState& vehicle() const noexcept { return veh_; }
  const PedestrianState& pedestrian() const noexcept { return ped_; }
  const std::vector<TraceRecord>& trace() const noexcept { return trace_; }
  /// Last record, or a preview of the initial state before the first step.
  TraceRecord snapshot() const;

  /// Non-null when the pedestrian is driven by external input.
  ExternalPedestrian* external() noexcept;
  const ExternalPedestrian* external() const noexcept;

  RunResult take_result();

 private:
  ScenarioConfig config_;
  DecisionParams params_;
  PedestrianContext ctx_;
  PedestrianSource source_;
  InteractionTracker tracker_;
  VehicleState veh_;
  PedestrianState ped_;
  std::int64_t tick_ = 0;
  RunOutcome outcome_ = RunOutcome::Running;
  std::vector<TraceRecord> trace_;
};

RunResult run(ScenarioConfig config);

}  // namespace crossing
