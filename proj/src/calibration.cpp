#include "crossing/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <sstream>

#include "crossing/config.hpp"
#include "crossing/parallel.hpp"

namespace crossing {

namespace {

// Sampling periods may differ from the nominal one by this relative amount.
constexpr double kDtTolerance = 1e-6;
constexpr double kInfinity = std::numeric_limits<double>::infinity();

bool valid_sfm(const SfmParams& p) {
  try {
    p.validate();
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::istringstream row(line);
  std::string cell;
  while (std::getline(row, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim_copy(const std::string& s) {
  const auto first = s.find_first_not_of(" \t");
  if (first == std::string::npos) return {};
  return s.substr(first, s.find_last_not_of(" \t") - first + 1);
}

}  // namespace

std::size_t TrajectoryDataset::sample_count() const noexcept {
  std::size_t n = 0;
  for (const auto& tr : trajectories) n += tr.samples.size();
  return n;
}

bool is_known_label(std::string_view label) noexcept {
  return label == "cross_first" || label == "yield";
}

TrajectoryDataset parse_trajectories(std::string_view text, std::string source) {
  TrajectoryDataset data;
  data.source = std::move(source);
  std::vector<std::size_t> first_line;  // per trajectory, for error messages
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim_copy(line).empty()) continue;
    if (!header) {
      if (trim_copy(line) != kTrajectoryCsvHeader) {
        throw ConfigError(fmt::format("{}: line {}: expected header '{}'", data.source, number,
                                      kTrajectoryCsvHeader));
      }
      header = true;
      continue;
    }
    const auto cells = split_csv(line);
    if (cells.size() != 5) {
      throw ConfigError(
          fmt::format("{}: line {}: expected 5 columns, got {}", data.source, number, cells.size()));
    }
    const std::string where = fmt::format("{}: line {}", data.source, number);
    const std::string id = trim_copy(cells[0]);
    const std::string label = trim_copy(cells[4]);
    if (id.empty()) throw ConfigError(where + ": empty traj_id");
    if (!is_known_label(label)) {
      throw ConfigError(where + ": label must be cross_first or yield, got '" + label + "'");
    }
    const TrajectorySample sample{parse_number(cells[1], where), parse_number(cells[2], where),
                                  parse_number(cells[3], where)};
    if (!std::isfinite(sample.t) || !std::isfinite(sample.d_ped) || !std::isfinite(sample.v_ped)) {
      throw ConfigError(where + ": values must be finite");
    }

    auto it = std::find_if(data.trajectories.begin(), data.trajectories.end(),
                           [&](const Trajectory& tr) { return tr.id == id; });
    if (it == data.trajectories.end()) {
      data.trajectories.push_back({id, label, 0.0, {}});
      first_line.push_back(number);
      it = std::prev(data.trajectories.end());
    }
    if (it->label != label) {
      throw ConfigError(where + ": trajectory '" + id + "' changes label");
    }
    auto& samples = it->samples;
    if (!samples.empty()) {
      const double step = sample.t - samples.back().t;
      if (!(step > 0.0)) {
        throw ConfigError(where + ": time must increase within trajectory '" + id + "'");
      }
      if (samples.size() == 1) {
        it->dt = step;
      } else if (std::abs(step - it->dt) > kDtTolerance * it->dt) {
        throw ConfigError(fmt::format("{}: non-uniform sampling in trajectory '{}' ({} vs {})", where,
                                      id, format_number(step), format_number(it->dt)));
      }
    }
    samples.push_back(sample);
  }
  if (!header) throw ConfigError(data.source + ": empty trajectory file");
  for (std::size_t k = 0; k < data.trajectories.size(); ++k) {
    if (data.trajectories[k].samples.size() < 2) {
      throw ConfigError(fmt::format("{}: line {}: trajectory '{}' needs at least 2 samples",
                                    data.source, first_line[k], data.trajectories[k].id));
    }
  }
  return data;
}

TrajectoryDataset load_trajectories(const std::filesystem::path& path) {
  return parse_trajectories(read_text_file(path), path.string());
}

void validate_dataset(const TrajectoryDataset& dataset) {
  if (dataset.trajectories.empty()) throw ContractViolation("trajectory dataset is empty");
  for (const auto& tr : dataset.trajectories) {
    if (tr.samples.size() < 2 || !(tr.dt > 0.0)) {
      throw ContractViolation("trajectory '" + tr.id + "' needs two or more uniformly spaced samples");
    }
    if (!is_known_label(tr.label)) throw ContractViolation("trajectory '" + tr.id + "' has no known label");
    for (std::size_t k = 1; k < tr.samples.size(); ++k) {
      const double step = tr.samples[k].t - tr.samples[k - 1].t;
      if (!(step > 0.0) || std::abs(step - tr.dt) > kDtTolerance * tr.dt) {
        throw ContractViolation("trajectory '" + tr.id + "' is not uniformly sampled");
      }
    }
  }
}

std::string trajectories_to_csv(const TrajectoryDataset& dataset) {
  std::string out(kTrajectoryCsvHeader);
  out += '\n';
  for (const auto& tr : dataset.trajectories) {
    for (const auto& s : tr.samples) {
      out += fmt::format("{},{},{},{},{}\n", tr.id, format_number(s.t), format_number(s.d_ped),
                         format_number(s.v_ped), tr.label);
    }
  }
  return out;
}

Trajectory record_trajectory(const ScenarioConfig& config, std::string id, std::string label) {
  Trajectory tr{std::move(id), std::move(label), config.dt, {}};
  Simulation sim(config);
  while (!sim.finished()) {
    const auto& r = sim.step();
    if (r.flags.pedestrian_crossed) break;
    tr.samples.push_back({r.t, r.d_ped, r.v_ped});
  }
  return tr;
}

TrajectoryDataset synthetic_dataset(const CalibrationContexts& contexts,
                                    const std::vector<double>& start_offsets) {
  TrajectoryDataset data;
  data.source = "<synthetic>";
  for (const auto& [label, context] : contexts) {
    for (std::size_t k = 0; k < start_offsets.size(); ++k) {
      ScenarioConfig config = context;
      config.pedestrian.d_ped0 += start_offsets[k];
      config.vehicle.policy = VehiclePolicy::Constant;
      data.trajectories.push_back(record_trajectory(config, fmt::format("{}_{}", label, k), label));
    }
  }
  return data;
}

std::vector<double> rollout_velocity(const ScenarioConfig& context, const Trajectory& trajectory) {
  if (trajectory.samples.empty()) throw ContractViolation("empty trajectory");
  ScenarioConfig config = context;
  config.dt = trajectory.dt;
  config.pedestrian.d_ped0 = trajectory.samples.front().d_ped;
  config.vehicle.policy = VehiclePolicy::Constant;
  config.t_max = std::max(config.t_max, trajectory.samples.back().t - trajectory.samples.front().t + 1.0);
  Simulation sim(std::move(config));
  std::vector<double> v;
  v.reserve(trajectory.samples.size());
  while (v.size() < trajectory.samples.size()) {
    if (sim.finished()) {
      v.push_back(sim.pedestrian().v_ped);
    } else {
      v.push_back(sim.step().v_ped);
    }
  }
  return v;
}

namespace {

const ScenarioConfig& context_for(const CalibrationContexts& contexts, const Trajectory& tr) {
  const auto it = contexts.find(tr.label);
  if (it == contexts.end()) throw ContractViolation("no calibration context for label '" + tr.label + "'");
  return it->second;
}

double dataset_rss(const TrajectoryDataset& dataset, const CalibrationContexts& contexts,
                   const std::function<void(ScenarioConfig&)>& install) {
  double rss = 0.0;
  for (const auto& tr : dataset.trajectories) {
    ScenarioConfig config = context_for(contexts, tr);
    install(config);
    const auto v = rollout_velocity(config, tr);
    for (std::size_t k = 0; k < v.size(); ++k) {
      const double e = v[k] - tr.samples[k].v_ped;
      rss += e * e;
    }
  }
  return rss;
}

}  // namespace

PatternSearchResult pattern_search(const std::function<double(std::span<const double>)>& cost,
                                   std::vector<double> x0, const std::vector<double>& low,
                                   const std::vector<double>& high, const PatternSearchOptions& options) {
  const std::size_t n = x0.size();
  if (n == 0 || low.size() != n || high.size() != n) throw ContractViolation("pattern search bounds");
  for (std::size_t d = 0; d < n; ++d) {
    if (!(low[d] <= high[d])) throw ContractViolation("pattern search bound is empty");
    x0[d] = std::clamp(x0[d], low[d], high[d]);
  }
  const unsigned threads = resolve_threads(options.threads);
  auto safe_cost = [&](std::span<const double> x) {
    try {
      const double c = cost(x);
      return std::isnan(c) ? kInfinity : c;
    } catch (const std::exception&) {
      return kInfinity;
    }
  };

  PatternSearchResult best{x0, safe_cost(x0), 1};
  std::vector<std::vector<double>> polls(2 * n);
  std::vector<double> costs(2 * n);
  for (std::size_t restart = 0; restart < options.restarts; ++restart) {
    double scale = options.initial_step * std::pow(0.5, static_cast<double>(restart));
    while (scale >= options.min_step && best.evaluations < options.max_evaluations) {
      for (std::size_t k = 0; k < 2 * n; ++k) {
        const std::size_t d = k / 2;
        const double sign = k % 2 == 0 ? 1.0 : -1.0;
        polls[k] = best.x;
        polls[k][d] = std::clamp(best.x[d] + sign * scale * (high[d] - low[d]), low[d], high[d]);
      }
      parallel_for(polls.size(), threads, [&](std::size_t k) { costs[k] = safe_cost(polls[k]); });
      best.evaluations += polls.size();
      std::size_t pick = polls.size();
      for (std::size_t k = 0; k < polls.size(); ++k) {
        if (costs[k] < best.cost && (pick == polls.size() || costs[k] < costs[pick])) pick = k;
      }
      if (pick == polls.size()) {
        scale *= 0.5;
      } else {
        best.x = polls[pick];
        best.cost = costs[pick];
      }
    }
  }
  return best;
}

double sfm_rss(const TrajectoryDataset& dataset, const SfmParams& params,
               const CalibrationContexts& contexts) {
  validate_dataset(dataset);
  params.validate();
  return dataset_rss(dataset, contexts, [&](ScenarioConfig& c) {
    c.model.kind = PedestrianSourceKind::Sfm;
    c.model.sfm = params;
  });
}

SfmFit fit_sfm(const TrajectoryDataset& dataset, const SfmParams& init,
               const CalibrationContexts& contexts, const SfmBounds& bounds,
               const PatternSearchOptions& options) {
  validate_dataset(dataset);
  auto params_of = [&](std::span<const double> x) {
    SfmParams p = init;
    p.v0 = x[0];
    p.tau = x[1];
    p.A_veh = x[2];
    p.B_veh = x[3];
    return p;
  };
  const std::vector<double> low(bounds.low.begin(), bounds.low.end());
  const std::vector<double> high(bounds.high.begin(), bounds.high.end());
  const auto result = pattern_search(
      [&](std::span<const double> x) {
        const SfmParams p = params_of(x);
        if (!valid_sfm(p)) return kInfinity;
        return sfm_rss(dataset, p, contexts);
      },
      {init.v0, init.tau, init.A_veh, init.B_veh}, low, high, options);

  // The search clamps the start into the bounds; never report worse than init.
  const double init_rss = valid_sfm(init) ? sfm_rss(dataset, init, contexts) : kInfinity;
  if (result.cost <= init_rss) return {params_of(result.x), result.cost, result.evaluations + 1};
  return {init, init_rss, result.evaluations + 1};
}

double mdp_rss(const TrajectoryDataset& dataset, const MdpSpec& spec,
               const CalibrationContexts& contexts) {
  validate_dataset(dataset);
  std::shared_ptr<const PedestrianMdp> model;
  try {
    model = PedestrianMdp::solve(spec);
  } catch (const SolverError&) {
    return kInfinity;
  }
  return dataset_rss(dataset, contexts, [&](ScenarioConfig& c) {
    if (c.geometry.d_CA != spec.d_CA) throw ContractViolation("MDP template d_CA differs from geometry");
    c.model.kind = PedestrianSourceKind::Mdp;
    c.model.mdp = spec;
    c.model.solved_mdp = model;
  });
}

MdpFit fit_mdp(const TrajectoryDataset& dataset, const MdpSpec& templ,
               const CalibrationContexts& contexts, const MdpBounds& bounds,
               const PatternSearchOptions& options) {
  validate_dataset(dataset);
  templ.validate();
  auto spec_of = [&](std::span<const double> x) {
    MdpSpec s = templ;
    s.goal_reward = x[0];
    s.collision_penalty = x[1];
    s.step_cost = x[2];
    return s;
  };
  const std::vector<double> low(bounds.low.begin(), bounds.low.end());
  const std::vector<double> high(bounds.high.begin(), bounds.high.end());
  const auto result = pattern_search(
      [&](std::span<const double> x) { return mdp_rss(dataset, spec_of(x), contexts); },
      {templ.goal_reward, templ.collision_penalty, templ.step_cost}, low, high, options);

  const double init_rss = mdp_rss(dataset, templ, contexts);
  MdpFit fit;
  fit.evaluations = result.evaluations + 1;
  if (result.cost <= init_rss) {
    fit.spec = spec_of(result.x);
    fit.rss = result.cost;
  } else {
    fit.spec = templ;
    fit.rss = init_rss;
  }
  fit.model = PedestrianMdp::solve(fit.spec);
  return fit;
}

}  // namespace crossing
