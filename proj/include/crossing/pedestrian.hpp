#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string_view>
#include <variant>
#include <vector>

#include "crossing/decision.hpp"
#include "crossing/geometry.hpp"
#include "crossing/mdp.hpp"

namespace crossing {

// Every pedestrian model emits speeds inside this band.
inline constexpr double kPedSpeedMax = 3.0;

struct PedestrianState {
  double d_ped = 0.0;
  double v_ped = 0.0;
  double i_ped = 0.0;
};

enum class PedestrianSourceKind { Sfm, Mdp, Scripted, External };

std::string_view to_string(PedestrianSourceKind kind) noexcept;
PedestrianSourceKind pedestrian_kind_from_string(std::string_view text);

struct PedestrianCommand {
  PedestrianSourceKind source = PedestrianSourceKind::Scripted;
  double v_ped_next = 0.0;
  double i_ped_next = 0.0;
};

// ---------------------------------------------------------------------------
// Social force model
// ---------------------------------------------------------------------------

struct SfmParams {
  double v0 = 1.4;     // desired walking speed [m/s]
  double tau = 0.5;    // relaxation time [s]
  double A_veh = 6.0;  // vehicle repulsion magnitude [m/s^2]
  double B_veh = 1.5;  // repulsion decay length [m]
  double goal = 6.0;   // target position on the far side [m]

  void validate() const;
};

/// 1-D social force along the crossing direction: relaxation toward v0 in
/// the goal direction plus exponential repulsion from the vehicle, pointing
/// away from the road centerline.
double sfm_acceleration(double d_ped, double v_ped, double gap, double d_CA,
                        const SfmParams& params);

PedestrianCommand sfm_step(const PedestrianState& ped, const VehicleState& veh,
                           const SfmParams& params, const Geometry& geometry, double dt);

// ---------------------------------------------------------------------------
// Markov decision process model
// ---------------------------------------------------------------------------

enum class MdpAction : std::size_t { Accelerate = 0, Hold = 1, Decelerate = 2, Wait = 3 };
inline constexpr std::size_t kMdpActionCount = 4;

std::string_view to_string(MdpAction action) noexcept;

/// Grid layout and reward coefficients of the pedestrian MDP.
struct MdpSpec {
  double d_min = -8.0;  // lower edge of the position grid [m]
  double d_max = 6.0;   // upper edge [m]
  std::size_t position_bins = 20;
  std::size_t velocity_bins = 5;
  double dv = 0.5;        // velocity step per decision [m/s]
  double period = 0.5;    // decision period [s]
  std::array<double, 4> gap_edges{1.0, 2.0, 4.0, 8.0};  // vehicle time gap bins [s]
  double gamma = 0.95;
  double goal_reward = 10.0;
  double collision_penalty = 50.0;
  double step_cost = 0.1;
  double goal = 4.0;  // cells with centre at or beyond this are absorbing goals [m]
  double d_CA = 2.0;

  void validate() const;
  std::size_t gap_bins() const noexcept { return gap_edges.size() + 1; }
  std::size_t state_count() const noexcept { return position_bins * velocity_bins * gap_bins(); }
};

struct MdpCell {
  std::size_t position = 0;
  std::size_t velocity = 0;
  std::size_t gap = 0;
};

/// Pedestrian MDP with its solved policy. Immutable once built and safe to
/// share between simulations.
class PedestrianMdp {
 public:
  /// Builds the transition model from `spec` and solves it.
  static std::shared_ptr<const PedestrianMdp> solve(const MdpSpec& spec, double tol = 1e-8);

  const MdpSpec& spec() const noexcept { return spec_; }
  const TabularMdp& model() const noexcept { return model_; }
  const MdpSolution& solution() const noexcept { return solution_; }

  std::size_t index(const MdpCell& cell) const noexcept;
  MdpCell cell_of(std::size_t index) const noexcept;
  double position_center(std::size_t bin) const noexcept;
  bool is_goal(std::size_t position_bin) const noexcept;

  /// Nearest position / velocity cell (ties to the lower index) and the
  /// gap bin holding the vehicle's time gap. Out-of-grid values clamp.
  MdpCell discretize(double d_ped, double v_ped, double gap_seconds) const noexcept;
  MdpAction action(const MdpCell& cell) const noexcept;

 private:
  PedestrianMdp(MdpSpec spec, TabularMdp model, MdpSolution solution);

  MdpSpec spec_;
  TabularMdp model_;
  MdpSolution solution_;
};

/// Builds the unsolved transition model.
TabularMdp build_pedestrian_mdp(const MdpSpec& spec);

/// Time until the vehicle occupies the conflict point: zero while its body
/// covers it, infinite once it has passed.
double vehicle_time_gap(const VehicleState& veh, double L_corridor, double k_num);

/// One policy decision: discretize, look up the action and apply it as a
/// velocity change of +dv / 0 / -dv / stop.
PedestrianCommand mdp_step(const PedestrianState& ped, const VehicleState& veh,
                           const PedestrianMdp& model, const Geometry& geometry, double k_num);

// ---------------------------------------------------------------------------
// Scripted replay
// ---------------------------------------------------------------------------

struct ScriptPoint {
  double t = 0.0;
  double v_ped = 0.0;
  double i_ped = 0.0;

  friend bool operator==(const ScriptPoint&, const ScriptPoint&) = default;
};

using Script = std::vector<ScriptPoint>;

void validate_script(const Script& script);

/// Piecewise-constant hold of the latest breakpoint at or before t; the
/// first breakpoint before the script starts.
PedestrianCommand scripted_step(const Script& script, double t);

// ---------------------------------------------------------------------------
// Drivers used by the simulation loop
// ---------------------------------------------------------------------------

/// Live pedestrian command, applied from `tick` on.
struct ExternalInput {
  std::int64_t tick = 0;
  double v_ped = 0.0;
  double i_ped = 0.0;

  friend bool operator==(const ExternalInput&, const ExternalInput&) = default;
};

struct SfmPedestrian {
  SfmParams params;
};

/// Queries the policy once per decision period and holds the speed between.
struct MdpPedestrian {
  std::shared_ptr<const PedestrianMdp> model;
  std::int64_t next_decision_tick = 0;
  double held_speed = 0.0;
};

struct ScriptedPedestrian {
  Script script;
};

/// Hold-last-value source fed by timestamped inputs.
class ExternalPedestrian {
 public:
  ExternalPedestrian() = default;
  ExternalPedestrian(double v_ped0, double i_ped0, std::vector<ExternalInput> inputs = {});

  /// Queues an input. Inputs for ticks already consumed are rejected.
  bool push(const ExternalInput& input);
  PedestrianCommand next(std::int64_t tick);

  const std::vector<ExternalInput>& applied() const noexcept { return applied_; }

 private:
  double v_ = 0.0;
  double i_ = 0.0;
  std::int64_t last_tick_ = -1;
  std::vector<ExternalInput> pending_;
  std::vector<ExternalInput> applied_;
};

using PedestrianSource =
    std::variant<SfmPedestrian, MdpPedestrian, ScriptedPedestrian, ExternalPedestrian>;

struct PedestrianContext {
  Geometry geometry;
  double k_num = 1e-6;
  double dt = 0.01;
};

PedestrianCommand step_pedestrian(PedestrianSource& source, const PedestrianState& ped,
                                  const VehicleState& veh, const PedestrianContext& ctx,
                                  std::int64_t tick);

}  // namespace crossing
