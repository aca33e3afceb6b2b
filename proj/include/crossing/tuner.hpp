#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "crossing/engine.hpp"

namespace crossing {

inline constexpr double kRejectedCost = std::numeric_limits<double>::infinity();
inline constexpr double kDefaultDeadlockPenalty = 1e4;
// Floor on the time-to-collision used by the 1/TTC term [s].
inline constexpr double kTtcFloor = 1e-3;

struct ObjectiveWeights {
  double k1 = 1.0;  // elapsed time
  double k2 = 1.0;  // squared running-maximum |a_veh|
  double k3 = 5.0;  // minimum separation (reward)
  double k4 = 0.0;  // inverse time-to-collision

  void validate() const;
};

struct ObjectiveContext {
  double dt = 0.01;
  double L_corridor = 4.0;
  double k_num = 1e-6;
};

/// Per-tick integrand k1*t + k2*a_max(t)^2 - k3*|d_min| + k4/TTC(t), with
/// a_max the running maximum of |a_veh| and d_min the whole-run minimum
/// vehicle-pedestrian separation.
std::vector<double> objective_integrand(const std::vector<TraceRecord>& trace,
                                        const ObjectiveWeights& weights,
                                        const ObjectiveContext& ctx);

/// Rectangle-rule sum of per-tick samples.
double integrate_ticks(std::span<const double> samples, double dt);

/// Discrete-time cost of one trace. Throws ContractViolation on empty input.
double objective(const std::vector<TraceRecord>& trace, const ObjectiveWeights& weights,
                 const ObjectiveContext& ctx);

// --- Parameter vector ------------------------------------------------------

inline constexpr std::size_t kTunedCount = 7;
using TunedVector = std::array<double, kTunedCount>;

/// Names in vector order.
extern const std::array<const char*, kTunedCount> kTunedNames;

TunedVector tuned_of(const DecisionParams& params);
DecisionParams with_tuned(DecisionParams base, const TunedVector& tuned);

// --- Suite evaluation ------------------------------------------------------

struct EvaluationOptions {
  ObjectiveWeights weights;
  double deadlock_penalty = kDefaultDeadlockPenalty;
};

/// Sum of per-scenario objectives with the seven tuned parameters of
/// `candidate` installed. Timeouts add the deadlock penalty; invalid
/// parameters or failing runs give kRejectedCost.
double evaluate_params(const DecisionParams& candidate, const std::vector<ScenarioConfig>& suite,
                       const EvaluationOptions& options);

// --- Particle swarm --------------------------------------------------------

struct PsoConfig {
  std::size_t swarm_size = 30;
  std::size_t max_iters = 100;
  double inertia = 0.7;
  double cognitive = 1.5;
  double social = 1.5;
  std::vector<double> low;
  std::vector<double> high;
  std::uint64_t seed = 1;
  unsigned threads = 0;  // 0: hardware concurrency

  void validate() const;
};

struct Particle {
  std::vector<double> position;
  std::vector<double> velocity;
  std::vector<double> best_position;
  double best_cost = kRejectedCost;
};

struct PsoResult {
  std::vector<double> best_position;
  double best_cost = kRejectedCost;
  // Global best after initialisation, then after every iteration.
  std::vector<double> history;
};

using CostFunction = std::function<double(std::span<const double>)>;

/// Global-best PSO with clamped positions and zero initial velocities.
/// Costs of one iteration are evaluated concurrently; the result does not
/// depend on the thread count.
PsoResult pso_minimize(const PsoConfig& config, const CostFunction& cost);

struct DesignResult {
  DecisionParams best;
  double best_cost = kRejectedCost;
  std::vector<double> history;
};

/// Tunes the seven decision parameters of `baseline` on `suite`.
DesignResult pso_run(const PsoConfig& config, const std::vector<ScenarioConfig>& suite,
                     const EvaluationOptions& options, const DecisionParams& baseline);

/// RMS of the vehicle-speed difference over the common prefix of two traces.
double velocity_rms_difference(const std::vector<TraceRecord>& a, const std::vector<TraceRecord>& b);

// --- Tuning configuration file ----------------------------------------------

/// INI document:
///   [pso]      swarm iterations inertia cognitive social seed threads
///   [bounds]   <tuned name> = low high      (all seven required)
///   [weights]  k1 k2 k3 k4
///   [suite]    sfm = a.cfg b.cfg ...   mdp = ...   baseline = params.cfg
///              compare = s1.cfg s2.cfg   deadlock_penalty = 10000
/// Relative paths resolve against the tuning file's directory.
struct TuneConfig {
  PsoConfig pso;
  EvaluationOptions evaluation;
  std::vector<std::filesystem::path> sfm_suite;
  std::vector<std::filesystem::path> mdp_suite;
  std::filesystem::path baseline;
  // Scenarios on which the two designs are compared.
  std::vector<std::filesystem::path> compare;
};

TuneConfig load_tune_config(const std::filesystem::path& path);

/// Loads every scenario and solves MDP policies once for reuse.
std::vector<ScenarioConfig> load_suite(const std::vector<std::filesystem::path>& files,
                                       const std::vector<std::filesystem::path>& layers = {});

}  // namespace crossing
