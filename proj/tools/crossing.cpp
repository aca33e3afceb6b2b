// crossing: command-line front end for the pedestrian-crossing simulator.
//
//   crossing simulate  --config a.cfg [--config b.cfg] [--set k=v] [--model m] [--out dir]
//   crossing tune      --config tune.cfg [--iterations n] [--swarm n] [--seed s] [--out dir]
//   crossing calibrate --model sfm|mdp --data file.csv [--context label=cfg] [--out dir]
//   crossing serve     [--port p] [--scenario-dir dir] [--pace x]
//   crossing replay    --trace trace.csv [--pace x]
//
// Exit codes: 0 success, 1 usage or configuration error, 2 run timed out.

#include <CLI11.hpp>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <iostream>
#include <thread>

#include "crossing/calibration.hpp"
#include "crossing/config.hpp"
#include "crossing/server.hpp"
#include "crossing/trace_io.hpp"
#include "crossing/tuner.hpp"

namespace fs = std::filesystem;
using namespace crossing;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitTimeout = 2;

struct Options {
  std::vector<std::string> configs;
  std::vector<std::string> overrides;
  std::string out = "out";
  std::string model;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;
  std::optional<std::size_t> swarm;
  unsigned threads = 0;
  // calibrate
  std::string data;
  std::vector<std::string> contexts;
  std::string scenario_dir = "scenarios";
  // serve / replay
  std::string address = "127.0.0.1";
  unsigned short port = 8080;
  double pace = 0.0;
  std::string trace;
};

std::vector<fs::path> as_paths(const std::vector<std::string>& files) {
  return {files.begin(), files.end()};
}

ObjectiveContext objective_context(const ScenarioConfig& c) {
  return {c.dt, c.geometry.L_corridor, c.installed_decision().k_num};
}

int cmd_simulate(const Options& o) {
  auto overrides = o.overrides;
  if (!o.model.empty()) overrides.push_back("pedestrian.model=" + o.model);
  if (o.seed) overrides.push_back(fmt::format("scenario.seed={}", *o.seed));
  const auto config = load_scenario(as_paths(o.configs), overrides);
  const auto result = run(config);
  auto summary = to_json(summarize(result, config));
  summary["scenario"] = config.name;
  summary["outcome"] = result.timeout() ? "timeout" : "completed";
  summary["J"] = objective(result.trace, {}, objective_context(config));

  write_text_file(fs::path(o.out) / (config.name + "_trace.csv"), trace_to_csv(result.trace));
  write_text_file(fs::path(o.out) / (config.name + "_summary.json"), summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return result.timeout() ? kExitTimeout : kExitOk;
}

std::string convergence_csv(const std::vector<double>& history) {
  std::string out = "iteration,best_cost\n";
  for (std::size_t k = 0; k < history.size(); ++k) {
    out += fmt::format("{},{}\n", k, format_number(history[k]));
  }
  return out;
}

bool monotone(const std::vector<double>& history) {
  for (std::size_t k = 1; k < history.size(); ++k) {
    if (history[k] > history[k - 1]) return false;
  }
  return true;
}

int cmd_tune(const Options& o) {
  if (o.configs.size() != 1) throw ConfigError("tune takes exactly one --config tuning file");
  auto tc = load_tune_config(o.configs.front());
  if (o.iterations) tc.pso.max_iters = *o.iterations;
  if (o.swarm) tc.pso.swarm_size = *o.swarm;
  if (o.seed) tc.pso.seed = *o.seed;
  if (o.threads) tc.pso.threads = o.threads;
  tc.pso.validate();

  const auto baseline = load_decision_params(tc.baseline);
  const fs::path out(o.out);
  nlohmann::json report;
  std::map<std::string, DecisionParams> designs;

  for (const std::string model : {"sfm", "mdp"}) {
    const auto suite = load_suite(model == "sfm" ? tc.sfm_suite : tc.mdp_suite);
    const double baseline_cost = evaluate_params(baseline, suite, tc.evaluation);
    const auto design = pso_run(tc.pso, suite, tc.evaluation, baseline);
    designs[model] = design.best;
    write_text_file(out / ("params_" + model + ".cfg"), format_decision_params(design.best));
    write_text_file(out / ("convergence_" + model + ".csv"), convergence_csv(design.history));
    report["models"][model] = {{"baseline_cost", baseline_cost},
                               {"best_cost", design.best_cost},
                               {"improved", design.best_cost <= baseline_cost},
                               {"history_monotone", monotone(design.history)},
                               {"params", format_decision_params(design.best)}};
    std::cout << fmt::format("{}: J baseline {:.6g} -> designed {:.6g}\n", model, baseline_cost,
                             design.best_cost);
  }

  report["comparison"] = nlohmann::json::array();
  for (const auto& file : tc.compare) {
    std::map<std::string, RunResult> runs;
    std::string name;
    for (const auto& [model, params] : designs) {
      auto config = load_scenario({file});
      config.decision = params;
      name = config.name;
      runs[model] = run(config);
      write_text_file(out / fmt::format("compare_{}_{}.csv", name, model),
                      trace_to_csv(runs[model].trace));
    }
    const double rms = velocity_rms_difference(runs["sfm"].trace, runs["mdp"].trace);
    report["comparison"].push_back({{"scenario", name}, {"rms_velocity_difference", rms}});
    std::cout << fmt::format("{}: RMS v_veh difference (SFM vs MDP design) {:.6g} m/s\n", name, rms);
  }
  write_text_file(out / "tune_report.json", report.dump(2) + "\n");
  return kExitOk;
}

CalibrationContexts load_contexts(const Options& o, const std::string& model) {
  CalibrationContexts contexts;
  for (const std::string label : {"cross_first", "yield"}) {
    contexts[label] = load_scenario(
        {fs::path(o.scenario_dir) / fmt::format("calib_{}_{}.cfg", model, label)}, o.overrides);
  }
  for (const auto& spec : o.contexts) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || !is_known_label(spec.substr(0, eq))) {
      throw ConfigError("--context takes label=file with label cross_first or yield");
    }
    contexts[spec.substr(0, eq)] = load_scenario({spec.substr(eq + 1)}, o.overrides);
  }
  for (auto& [label, config] : contexts) config.model.kind = model == "sfm" ? PedestrianSourceKind::Sfm
                                                                            : PedestrianSourceKind::Mdp;
  return contexts;
}

int cmd_calibrate(const Options& o) {
  if (o.model != "sfm" && o.model != "mdp") throw ConfigError("calibrate needs --model sfm or mdp");
  if (o.data.empty()) throw ConfigError("calibrate needs --data trajectories.csv");
  const auto dataset = load_trajectories(o.data);
  if (dataset.trajectories.empty()) throw ConfigError(o.data + ": no trajectories");
  const auto contexts = load_contexts(o, o.model);
  for (const auto& tr : dataset.trajectories) {
    if (!contexts.count(tr.label)) throw ConfigError("no context for label " + tr.label);
  }
  PatternSearchOptions search;
  search.threads = o.threads;

  const auto& init_context = contexts.begin()->second;
  nlohmann::json report{{"model", o.model},
                        {"data", o.data},
                        {"trajectories", dataset.trajectories.size()},
                        {"samples", dataset.sample_count()}};
  std::string params;
  double rss = 0.0;
  if (o.model == "sfm") {
    const auto init = init_context.model.sfm;
    report["initial_rss"] = sfm_rss(dataset, init, contexts);
    const auto fit = fit_sfm(dataset, init, contexts, {}, search);
    params = format_sfm_params(fit.params);
    rss = fit.rss;
    report["evaluations"] = fit.evaluations;
  } else {
    const auto init = init_context.model.mdp;
    report["initial_rss"] = mdp_rss(dataset, init, contexts);
    const auto fit = fit_mdp(dataset, init, contexts, {}, search);
    params = format_mdp_rewards(fit.spec);
    rss = fit.rss;
    report["evaluations"] = fit.evaluations;
  }
  report["rss"] = rss;
  report["rss_per_sample"] = rss / static_cast<double>(dataset.sample_count());
  report["params"] = params;
  write_text_file(fs::path(o.out) / ("fitted_" + o.model + ".cfg"), params);
  write_text_file(fs::path(o.out) / ("calibration_" + o.model + ".json"), report.dump(2) + "\n");
  std::cout << params << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_serve(const Options& o) {
  ServerOptions options;
  options.address = o.address;
  options.port = o.port;
  options.scenario_dir = o.scenario_dir;
  if (o.pace > 0.0) options.session.pace = o.pace;
  Server server(options);
  server.run();
  return kExitOk;
}

int cmd_replay(const Options& o) {
  const auto trace = parse_trace_csv(read_text_file(o.trace));
  const auto start = std::chrono::steady_clock::now();
  for (const auto& r : trace) {
    if (o.pace > 0.0) {
      std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                std::chrono::duration<double>(r.t / o.pace)));
    }
    std::cout << state_message(r).dump() << '\n';
  }
  std::cout.flush();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Intention-aware vehicle decisions at an unsignalised pedestrian crossing"};
  app.require_subcommand(1);
  Options o;

  auto* simulate = app.add_subcommand("simulate", "run one scenario, write trace CSV and summary JSON");
  simulate->add_option("-c,--config", o.configs, "scenario file (repeat to layer)")->required();
  simulate->add_option("-s,--set", o.overrides, "override, section.key=value");
  simulate->add_option("-m,--model", o.model, "pedestrian model")
      ->check(CLI::IsMember({"sfm", "mdp", "scripted", "external"}));
  simulate->add_option("--seed", o.seed, "scenario seed");
  simulate->add_option("-o,--out", o.out, "output directory");

  auto* tune = app.add_subcommand("tune", "design decision parameters for both pedestrian models");
  tune->add_option("-c,--config", o.configs, "tuning file")->required();
  tune->add_option("--iterations", o.iterations, "PSO iterations");
  tune->add_option("--swarm", o.swarm, "PSO swarm size");
  tune->add_option("--seed", o.seed, "PSO seed");
  tune->add_option("--threads", o.threads, "worker threads (0: all cores)");
  tune->add_option("-o,--out", o.out, "output directory");

  auto* calibrate = app.add_subcommand("calibrate", "fit a pedestrian model to trajectories");
  calibrate->add_option("-m,--model", o.model, "sfm or mdp")->required()->check(CLI::IsMember({"sfm", "mdp"}));
  calibrate->add_option("-d,--data", o.data, "trajectory CSV")->required();
  calibrate->add_option("--context", o.contexts, "label=scenario.cfg (default calib_<model>_<label>.cfg)");
  calibrate->add_option("--scenario-dir", o.scenario_dir, "directory of default contexts");
  calibrate->add_option("-s,--set", o.overrides, "override applied to every context");
  calibrate->add_option("--threads", o.threads, "worker threads (0: all cores)");
  calibrate->add_option("-o,--out", o.out, "output directory");

  auto* serve = app.add_subcommand("serve", "run the live session server");
  serve->add_option("--address", o.address, "listen address");
  serve->add_option("-p,--port", o.port, "listen port");
  serve->add_option("--scenario-dir", o.scenario_dir, "scenarios offered to clients");
  serve->add_option("--pace", o.pace, "default simulated seconds per wall second");

  auto* replay = app.add_subcommand("replay", "re-emit a trace CSV as state messages on stdout");
  replay->add_option("-t,--trace", o.trace, "trace CSV")->required();
  replay->add_option("--pace", o.pace, "simulated seconds per wall second (0: no delay)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*simulate) return cmd_simulate(o);
    if (*tune) return cmd_tune(o);
    if (*calibrate) return cmd_calibrate(o);
    if (*serve) return cmd_serve(o);
    if (*replay) return cmd_replay(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
