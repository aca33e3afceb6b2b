#include "crossing/tuner.hpp"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cmath>
#include <exception>
#include <fmt/format.h>
#include <random>
#include <sstream>

#include "crossing/config.hpp"
#include "crossing/parallel.hpp"

namespace crossing {

namespace pt = boost::property_tree;

const std::array<const char*, kTunedCount> kTunedNames = {
    "i_ped_H", "i_ped_L", "v_ped_H", "v_ped_L", "k_veh_acc", "k_veh_dec", "k_disc"};

void ObjectiveWeights::validate() const {
  for (double k : {k1, k2, k3, k4}) {
    if (!std::isfinite(k) || k < 0.0) throw ConfigError("objective weights must be finite and >= 0");
  }
}

std::vector<double> objective_integrand(const std::vector<TraceRecord>& trace,
                                        const ObjectiveWeights& w, const ObjectiveContext& ctx) {
  if (trace.empty()) throw ContractViolation("objective of an empty trace");
  double d_min = std::numeric_limits<double>::infinity();
  for (const auto& r : trace) d_min = std::min(d_min, separation(r.d_veh, r.d_ped, ctx.L_corridor));

  std::vector<double> out;
  out.reserve(trace.size());
  double a_max = 0.0;
  for (const auto& r : trace) {
    a_max = std::max(a_max, std::abs(r.a_veh));
    double value = w.k1 * r.t + w.k2 * a_max * a_max - w.k3 * std::abs(d_min);
    if (w.k4 != 0.0) value += w.k4 / std::max(ttc(r.d_veh, r.v_veh, ctx.k_num), kTtcFloor);
    out.push_back(value);
  }
  return out;
}

double integrate_ticks(std::span<const double> samples, double dt) {
  double sum = 0.0;
  for (double s : samples) sum += s;
  return sum * dt;
}

double objective(const std::vector<TraceRecord>& trace, const ObjectiveWeights& weights,
                 const ObjectiveContext& ctx) {
  const auto samples = objective_integrand(trace, weights, ctx);
  return integrate_ticks(samples, ctx.dt);
}

TunedVector tuned_of(const DecisionParams& p) {
  return {p.i_ped_H, p.i_ped_L, p.v_ped_H, p.v_ped_L, p.k_veh_acc, p.k_veh_dec, p.k_disc};
}

DecisionParams with_tuned(DecisionParams p, const TunedVector& x) {
  p.i_ped_H = x[0];
  p.i_ped_L = x[1];
  p.v_ped_H = x[2];
  p.v_ped_L = x[3];
  p.k_veh_acc = x[4];
  p.k_veh_dec = x[5];
  p.k_disc = x[6];
  return p;
}

double evaluate_params(const DecisionParams& candidate, const std::vector<ScenarioConfig>& suite,
                       const EvaluationOptions& options) {
  if (suite.empty()) throw ContractViolation("empty evaluation suite");
  const auto tuned = tuned_of(candidate);
  double total = 0.0;
  for (const auto& base : suite) {
    ScenarioConfig scenario = base;
    scenario.decision = with_tuned(scenario.decision, tuned);
    if (!scenario.installed_decision().valid()) return kRejectedCost;
    try {
      const auto result = run(std::move(scenario));
      const ObjectiveContext ctx{base.dt, base.geometry.L_corridor, base.decision.k_num};
      total += objective(result.trace, options.weights, ctx);
      if (result.timeout()) total += options.deadlock_penalty;
    } catch (const std::exception&) {
      return kRejectedCost;
    }
  }
  return std::isfinite(total) ? total : kRejectedCost;
}

void PsoConfig::validate() const {
  if (swarm_size == 0) throw ConfigError("pso swarm size must be >= 1");
  if (low.empty() || low.size() != high.size()) throw ConfigError("pso bounds are inconsistent");
  for (std::size_t d = 0; d < low.size(); ++d) {
    if (!std::isfinite(low[d]) || !std::isfinite(high[d]) || low[d] > high[d]) {
      throw ConfigError(fmt::format("pso bound {} is empty or not finite", d));
    }
  }
  for (double c : {inertia, cognitive, social}) {
    if (!std::isfinite(c) || c < 0.0) throw ConfigError("pso coefficients must be finite and >= 0");
  }
}

namespace {

void evaluate_swarm(const std::vector<Particle>& swarm, const CostFunction& cost,
                    std::vector<double>& costs, unsigned threads) {
  costs.assign(swarm.size(), kRejectedCost);
  parallel_for(swarm.size(), threads, [&](std::size_t i) {
    try {
      const double c = cost(swarm[i].position);
      costs[i] = std::isnan(c) ? kRejectedCost : c;
    } catch (const std::exception&) {
      costs[i] = kRejectedCost;
    }
  });
}

// Lowest index wins ties so the result is independent of evaluation order.
std::size_t best_index(const std::vector<Particle>& swarm) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < swarm.size(); ++i) {
    if (swarm[i].best_cost < swarm[best].best_cost) best = i;
  }
  return best;
}

}  // namespace

PsoResult pso_minimize(const PsoConfig& config, const CostFunction& cost) {
  config.validate();
  const std::size_t dims = config.low.size();
  const unsigned threads = resolve_threads(config.threads);

  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<Particle> swarm(config.swarm_size);
  for (auto& p : swarm) {
    p.position.resize(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      p.position[d] = config.low[d] + unit(rng) * (config.high[d] - config.low[d]);
    }
    p.velocity.assign(dims, 0.0);
  }

  std::vector<double> costs;
  evaluate_swarm(swarm, cost, costs, threads);
  for (std::size_t i = 0; i < swarm.size(); ++i) {
    swarm[i].best_position = swarm[i].position;
    swarm[i].best_cost = costs[i];
  }
  std::size_t g = best_index(swarm);

  PsoResult result;
  result.history.push_back(swarm[g].best_cost);

  for (std::size_t it = 0; it < config.max_iters; ++it) {
    const std::vector<double> gbest = swarm[g].best_position;
    for (auto& p : swarm) {
      for (std::size_t d = 0; d < dims; ++d) {
        const double r1 = unit(rng);
        const double r2 = unit(rng);
        p.velocity[d] = config.inertia * p.velocity[d] +
                        config.cognitive * r1 * (p.best_position[d] - p.position[d]) +
                        config.social * r2 * (gbest[d] - p.position[d]);
        p.position[d] = std::clamp(p.position[d] + p.velocity[d], config.low[d], config.high[d]);
      }
    }
    evaluate_swarm(swarm, cost, costs, threads);
    for (std::size_t i = 0; i < swarm.size(); ++i) {
      if (costs[i] < swarm[i].best_cost) {
        swarm[i].best_cost = costs[i];
        swarm[i].best_position = swarm[i].position;
      }
    }
    g = best_index(swarm);
    result.history.push_back(swarm[g].best_cost);
  }

  result.best_position = swarm[g].best_position;
  result.best_cost = swarm[g].best_cost;
  return result;
}

DesignResult pso_run(const PsoConfig& config, const std::vector<ScenarioConfig>& suite,
                     const EvaluationOptions& options, const DecisionParams& baseline) {
  if (config.low.size() != kTunedCount) {
    throw ConfigError(fmt::format("decision tuning needs {} bounds", kTunedCount));
  }
  options.weights.validate();
  auto to_params = [&](std::span<const double> x) {
    TunedVector v{};
    std::copy(x.begin(), x.end(), v.begin());
    return with_tuned(baseline, v);
  };
  const auto pso = pso_minimize(
      config, [&](std::span<const double> x) { return evaluate_params(to_params(x), suite, options); });
  DesignResult out;
  out.best = to_params(pso.best_position);
  out.best_cost = pso.best_cost;
  out.history = pso.history;
  return out;
}

double velocity_rms_difference(const std::vector<TraceRecord>& a, const std::vector<TraceRecord>& b) {
  const std::size_t n = std::min(a.size(), b.size());
  if (n == 0) throw ContractViolation("velocity comparison needs non-empty traces");
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double e = a[k].v_veh - b[k].v_veh;
    sum += e * e;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

namespace {

std::vector<std::filesystem::path> path_list(const std::string& text, const std::filesystem::path& base) {
  std::vector<std::filesystem::path> out;
  std::istringstream in(text);
  std::string item;
  while (in >> item) {
    std::filesystem::path p(item);
    out.push_back(p.is_absolute() ? p : base / p);
  }
  return out;
}

}  // namespace

TuneConfig load_tune_config(const std::filesystem::path& path) {
  pt::ptree tree;
  {
    std::istringstream in(read_text_file(path));
    try {
      pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError(fmt::format("{}: line {}: {}", path.string(), e.line(), e.message()));
    }
  }
  const auto base = path.parent_path();
  TuneConfig cfg;
  cfg.pso.low.assign(kTunedCount, 0.0);
  cfg.pso.high.assign(kTunedCount, 0.0);
  std::array<bool, kTunedCount> have{};

  auto number = [&](const std::string& key, const std::string& value) {
    return parse_number(value, path.string() + ": " + key);
  };
  auto count = [&](const std::string& key, const std::string& value) {
    const double v = number(key, value);
    if (v < 0 || v != std::floor(v)) throw ConfigError(key + " must be a non-negative integer");
    return static_cast<std::uint64_t>(v);
  };

  for (const auto& [section, body] : tree) {
    for (const auto& [key, node] : body) {
      const std::string name = section + "." + key;
      const std::string value = node.data();
      if (section == "pso") {
        if (key == "swarm") cfg.pso.swarm_size = count(name, value);
        else if (key == "iterations") cfg.pso.max_iters = count(name, value);
        else if (key == "inertia") cfg.pso.inertia = number(name, value);
        else if (key == "cognitive") cfg.pso.cognitive = number(name, value);
        else if (key == "social") cfg.pso.social = number(name, value);
        else if (key == "seed") cfg.pso.seed = count(name, value);
        else if (key == "threads") cfg.pso.threads = static_cast<unsigned>(count(name, value));
        else throw ConfigError("unknown tuning key '" + name + "'");
      } else if (section == "bounds") {
        const auto it = std::find(kTunedNames.begin(), kTunedNames.end(), key);
        if (it == kTunedNames.end()) throw ConfigError("unknown tuning key '" + name + "'");
        std::istringstream in(value);
        std::string lo, hi, extra;
        if (!(in >> lo >> hi) || (in >> extra)) throw ConfigError(name + " needs 'low high'");
        const auto d = static_cast<std::size_t>(it - kTunedNames.begin());
        cfg.pso.low[d] = number(name, lo);
        cfg.pso.high[d] = number(name, hi);
        have[d] = true;
      } else if (section == "weights") {
        auto& w = cfg.evaluation.weights;
        if (key == "k1") w.k1 = number(name, value);
        else if (key == "k2") w.k2 = number(name, value);
        else if (key == "k3") w.k3 = number(name, value);
        else if (key == "k4") w.k4 = number(name, value);
        else throw ConfigError("unknown tuning key '" + name + "'");
      } else if (section == "suite") {
        if (key == "sfm") cfg.sfm_suite = path_list(value, base);
        else if (key == "mdp") cfg.mdp_suite = path_list(value, base);
        else if (key == "baseline") cfg.baseline = path_list(value, base).at(0);
        else if (key == "compare") cfg.compare = path_list(value, base);
        else if (key == "deadlock_penalty") cfg.evaluation.deadlock_penalty = number(name, value);
        else throw ConfigError("unknown tuning key '" + name + "'");
      } else {
        throw ConfigError("unknown tuning section '" + section + "'");
      }
    }
  }
  if (cfg.sfm_suite.empty() || cfg.mdp_suite.empty() || cfg.baseline.empty()) {
    throw ConfigError(path.string() + ": [suite] needs sfm, mdp and baseline");
  }
  for (std::size_t d = 0; d < kTunedCount; ++d) {
    if (!have[d]) throw ConfigError(fmt::format("missing bound bounds.{}", kTunedNames[d]));
  }
  cfg.pso.validate();
  cfg.evaluation.weights.validate();
  return cfg;
}

std::vector<ScenarioConfig> load_suite(const std::vector<std::filesystem::path>& files,
                                       const std::vector<std::filesystem::path>& layers) {
  std::vector<ScenarioConfig> suite;
  for (const auto& file : files) {
    auto stack = layers;
    stack.push_back(file);
    auto config = load_scenario(stack);
    config.prepare();
    suite.push_back(std::move(config));
  }
  return suite;
}

}  // namespace crossing
