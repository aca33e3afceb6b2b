#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "crossing/engine.hpp"

namespace crossing {

inline constexpr std::string_view kTrajectoryCsvHeader = "traj_id,t,d_ped,v_ped,label";

struct TrajectorySample {
  double t = 0.0;
  double d_ped = 0.0;
  double v_ped = 0.0;
};

struct Trajectory {
  std::string id;
  std::string label;  // cross_first | yield
  double dt = 0.0;
  std::vector<TrajectorySample> samples;
};

struct TrajectoryDataset {
  std::vector<Trajectory> trajectories;
  std::string source;

  std::size_t sample_count() const noexcept;
};

bool is_known_label(std::string_view label) noexcept;

/// Rows are grouped by traj_id in order of first appearance. Throws
/// ConfigError naming the line for malformed rows and for series that are
/// not strictly increasing or not uniformly sampled.
TrajectoryDataset parse_trajectories(std::string_view text, std::string source = "<memory>");
TrajectoryDataset load_trajectories(const std::filesystem::path& path);
void validate_dataset(const TrajectoryDataset& dataset);

std::string trajectories_to_csv(const TrajectoryDataset& dataset);

/// Pedestrian rows of one engine run up to (excluding) the tick at which the
/// pedestrian has crossed, or the end of the run.
Trajectory record_trajectory(const ScenarioConfig& config, std::string id, std::string label);

// --- Fitting -----------------------------------------------------------------

/// Scenario supplying vehicle, geometry and pedestrian initial
/// speed/intention for each label. The initial pedestrian position comes
/// from the first sample of each trajectory, the sampling period from the
/// trajectory. During rollouts the vehicle holds its initial speed, so the
/// pedestrian is fitted against a prescribed vehicle motion.
using CalibrationContexts = std::map<std::string, ScenarioConfig>;

/// Synthetic reference data: one trajectory per label context and start
/// offset (added to the context's initial pedestrian position), recorded with
/// the vehicle holding its speed as in calibration rollouts.
TrajectoryDataset synthetic_dataset(const CalibrationContexts& contexts,
                                    const std::vector<double>& start_offsets = {0.0, -0.5});

/// Pedestrian speed of a closed-loop rollout, one value per sample.
std::vector<double> rollout_velocity(const ScenarioConfig& context, const Trajectory& trajectory);

struct PatternSearchOptions {
  std::size_t restarts = 7;
  double initial_step = 0.25;  // fraction of each bound range
  double min_step = 1e-7;      // fraction of each bound range
  std::size_t max_evaluations = 20000;
  unsigned threads = 0;        // 0: hardware concurrency
};

struct PatternSearchResult {
  std::vector<double> x;
  double cost = 0.0;
  std::size_t evaluations = 0;
};

/// Compass search within [low, high]: all 2n poll points of a step are
/// evaluated (concurrently), the best strict improvement is taken (lowest
/// index on ties), otherwise the step halves. Each restart resumes from the
/// incumbent with a fresh, halved initial step.
PatternSearchResult pattern_search(const std::function<double(std::span<const double>)>& cost,
                                   std::vector<double> x0, const std::vector<double>& low,
                                   const std::vector<double>& high,
                                   const PatternSearchOptions& options = {});

struct SfmBounds {
  // v0, tau, A_veh, B_veh
  std::array<double, 4> low{0.2, 0.05, 0.0, 0.1};
  std::array<double, 4> high{3.0, 5.0, 50.0, 10.0};
};

struct SfmFit {
  SfmParams params;
  double rss = 0.0;
  std::size_t evaluations = 0;
};

double sfm_rss(const TrajectoryDataset& dataset, const SfmParams& params,
               const CalibrationContexts& contexts);

/// Velocity least squares over {v0, tau, A_veh, B_veh}; other SFM fields
/// keep their values from `init`.
SfmFit fit_sfm(const TrajectoryDataset& dataset, const SfmParams& init,
               const CalibrationContexts& contexts, const SfmBounds& bounds = {},
               const PatternSearchOptions& options = {});

struct MdpBounds {
  // goal_reward, collision_penalty, step_cost
  std::array<double, 3> low{0.5, 0.0, 0.0};
  std::array<double, 3> high{100.0, 500.0, 5.0};
};

struct MdpFit {
  MdpSpec spec;
  std::shared_ptr<const PedestrianMdp> model;
  double rss = 0.0;
  std::size_t evaluations = 0;
};

/// Candidates whose solve fails score +infinity.
double mdp_rss(const TrajectoryDataset& dataset, const MdpSpec& spec,
               const CalibrationContexts& contexts);

/// Velocity least squares over the reward coefficients; the grid of
/// `templ` is kept.
MdpFit fit_mdp(const TrajectoryDataset& dataset, const MdpSpec& templ,
               const CalibrationContexts& contexts, const MdpBounds& bounds = {},
               const PatternSearchOptions& options = {});

}  // namespace crossing
