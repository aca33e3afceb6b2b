#include "crossing/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fmt/format.h>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace crossing {

namespace pt = boost::property_tree;

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(sep, start);
    const auto end = pos == std::string_view::npos ? s.size() : pos;
    parts.push_back(s.substr(start, end - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::vector<double> parse_numbers(std::string_view text, std::string_view what) {
  std::vector<double> out;
  std::istringstream in{std::string(text)};
  std::string token;
  while (in >> token) out.push_back(parse_number(token, what));
  return out;
}

std::uint64_t parse_unsigned(std::string_view text, std::string_view what) {
  text = trim(text);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw ConfigError(fmt::format("{}: expected a non-negative integer, got '{}'", what, text));
  }
  return value;
}

struct Field {
  std::function<std::string(const ScenarioConfig&)> get;
  std::function<void(ScenarioConfig&, std::string_view)> set;
};

// Registry of every addressable scenario field, keyed by dotted name.
const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> registry = [] {
    std::map<std::string, Field> r;
    auto number = [&r](std::string key, auto member) {
      r.emplace(key, Field{[member](const ScenarioConfig& c) { return format_number(member(c)); },
                           [member, key](ScenarioConfig& c, std::string_view v) {
                             member(c) = parse_number(v, key);
                           }});
    };
    auto count = [&r](std::string key, auto member) {
      r.emplace(key, Field{[member](const ScenarioConfig& c) {
                             return std::to_string(member(c));
                           },
                           [member, key](ScenarioConfig& c, std::string_view v) {
                             member(c) = static_cast<std::remove_reference_t<decltype(member(c))>>(
                                 parse_unsigned(v, key));
                           }});
    };

    r.emplace("scenario.name", Field{[](const ScenarioConfig& c) { return c.name; },
                                     [](ScenarioConfig& c, std::string_view v) { c.name = std::string(trim(v)); }});
    number("scenario.dt", [](auto& c) -> auto& { return c.dt; });
    number("scenario.t_max", [](auto& c) -> auto& { return c.t_max; });
    number("scenario.exit_distance", [](auto& c) -> auto& { return c.exit_distance; });
    count("scenario.seed", [](auto& c) -> auto& { return c.seed; });

    number("geometry.d_NZ", [](auto& c) -> auto& { return c.geometry.d_NZ; });
    number("geometry.d_CA", [](auto& c) -> auto& { return c.geometry.d_CA; });
    number("geometry.L_corridor", [](auto& c) -> auto& { return c.geometry.L_corridor; });
    number("geometry.crossing_length",
           [](auto& c) -> auto& { return c.geometry.crossing_length; });

    number("vehicle.d_veh0", [](auto& c) -> auto& { return c.vehicle.d_veh0; });
    number("vehicle.v_veh0", [](auto& c) -> auto& { return c.vehicle.v_veh0; });
    r.emplace("vehicle.policy",
              Field{[](const ScenarioConfig& c) { return std::string(to_string(c.vehicle.policy)); },
                    [](ScenarioConfig& c, std::string_view v) {
                      c.vehicle.policy = vehicle_policy_from_string(trim(v));
                    }});

    r.emplace("pedestrian.model",
              Field{[](const ScenarioConfig& c) { return std::string(to_string(c.model.kind)); },
                    [](ScenarioConfig& c, std::string_view v) {
                      c.model.kind = pedestrian_kind_from_string(trim(v));
                    }});
    number("pedestrian.d_ped0", [](auto& c) -> auto& { return c.pedestrian.d_ped0; });
    number("pedestrian.v_ped0", [](auto& c) -> auto& { return c.pedestrian.v_ped0; });
    number("pedestrian.i_ped0", [](auto& c) -> auto& { return c.pedestrian.i_ped0; });

    r.emplace("script.breakpoints",
              Field{[](const ScenarioConfig& c) { return format_script(c.model.script); },
                    [](ScenarioConfig& c, std::string_view v) { c.model.script = parse_script(v); }});
    r.emplace("inputs.events",
              Field{[](const ScenarioConfig& c) { return format_inputs(c.model.inputs); },
                    [](ScenarioConfig& c, std::string_view v) { c.model.inputs = parse_inputs(v); }});

    number("sfm.v0", [](auto& c) -> auto& { return c.model.sfm.v0; });
    number("sfm.tau", [](auto& c) -> auto& { return c.model.sfm.tau; });
    number("sfm.A_veh", [](auto& c) -> auto& { return c.model.sfm.A_veh; });
    number("sfm.B_veh", [](auto& c) -> auto& { return c.model.sfm.B_veh; });
    number("sfm.goal", [](auto& c) -> auto& { return c.model.sfm.goal; });

    number("mdp.d_min", [](auto& c) -> auto& { return c.model.mdp.d_min; });
    number("mdp.d_max", [](auto& c) -> auto& { return c.model.mdp.d_max; });
    count("mdp.position_bins", [](auto& c) -> auto& { return c.model.mdp.position_bins; });
    count("mdp.velocity_bins", [](auto& c) -> auto& { return c.model.mdp.velocity_bins; });
    number("mdp.dv", [](auto& c) -> auto& { return c.model.mdp.dv; });
    number("mdp.period", [](auto& c) -> auto& { return c.model.mdp.period; });
    r.emplace("mdp.gap_edges",
              Field{[](const ScenarioConfig& c) {
                      const auto& e = c.model.mdp.gap_edges;
                      return fmt::format("{} {} {} {}", format_number(e[0]), format_number(e[1]),
                                         format_number(e[2]), format_number(e[3]));
                    },
                    [](ScenarioConfig& c, std::string_view v) {
                      const auto values = parse_numbers(v, "mdp.gap_edges");
                      if (values.size() != c.model.mdp.gap_edges.size()) {
                        throw ConfigError("mdp.gap_edges needs exactly 4 values");
                      }
                      std::copy(values.begin(), values.end(), c.model.mdp.gap_edges.begin());
                    }});
    number("mdp.gamma", [](auto& c) -> auto& { return c.model.mdp.gamma; });
    number("mdp.goal_reward", [](auto& c) -> auto& { return c.model.mdp.goal_reward; });
    number("mdp.collision_penalty",
           [](auto& c) -> auto& { return c.model.mdp.collision_penalty; });
    number("mdp.step_cost", [](auto& c) -> auto& { return c.model.mdp.step_cost; });
    number("mdp.goal", [](auto& c) -> auto& { return c.model.mdp.goal; });

    number("decision.i_ped_H", [](auto& c) -> auto& { return c.decision.i_ped_H; });
    number("decision.i_ped_L", [](auto& c) -> auto& { return c.decision.i_ped_L; });
    number("decision.v_ped_H", [](auto& c) -> auto& { return c.decision.v_ped_H; });
    number("decision.v_ped_L", [](auto& c) -> auto& { return c.decision.v_ped_L; });
    number("decision.k_veh_acc", [](auto& c) -> auto& { return c.decision.k_veh_acc; });
    number("decision.k_veh_dec", [](auto& c) -> auto& { return c.decision.k_veh_dec; });
    number("decision.k_disc", [](auto& c) -> auto& { return c.decision.k_disc; });
    number("decision.v_veh_d", [](auto& c) -> auto& { return c.decision.v_veh_d; });
    number("decision.k_num", [](auto& c) -> auto& { return c.decision.k_num; });
    return r;
  }();
  return registry;
}

void apply(ScenarioConfig& config, const std::string& key, std::string_view value) {
  const auto& registry = fields();
  const auto it = registry.find(key);
  if (it == registry.end()) throw ConfigError("unknown configuration key '" + key + "'");
  it->second.set(config, value);
}

void apply_tree(ScenarioConfig& config, const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw ConfigError("key '" + section + "' must live inside a [section]");
    }
    for (const auto& [key, value] : body) apply(config, section + "." + key, value.data());
  }
}

pt::ptree parse_ini(std::string_view text, const std::string& origin) {
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(fmt::format("{}: line {}: {}", origin, e.line(), e.message()));
  }
  return tree;
}

std::string format_sections(const ScenarioConfig& config, const std::vector<std::string>& sections) {
  std::string out;
  for (const auto& section : sections) {
    out += "[" + section + "]\n";
    for (const auto& [key, field] : fields()) {
      if (key.compare(0, section.size() + 1, section + ".") != 0) continue;
      out += key.substr(section.size() + 1) + " = " + field.get(config) + "\n";
    }
    out += "\n";
  }
  return out;
}

}  // namespace

std::string format_number(double value) { return fmt::format("{}", value); }

double parse_number(std::string_view text, std::string_view what) {
  text = trim(text);
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw ConfigError(fmt::format("{}: expected a number, got '{}'", what, text));
  }
  return value;
}

std::pair<std::string, std::string> parse_override(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw ConfigError("override '" + std::string(text) + "' is not of the form key=value");
  }
  const auto key = trim(text.substr(0, eq));
  if (key.find('.') == std::string_view::npos) {
    throw ConfigError("override key '" + std::string(key) + "' must be section.key");
  }
  return {std::string(key), std::string(trim(text.substr(eq + 1)))};
}

ScenarioConfig parse_scenario(std::string_view text, const std::vector<std::string>& overrides) {
  ScenarioConfig config;
  apply_tree(config, parse_ini(text, "<scenario>"));
  for (const auto& o : overrides) {
    const auto [key, value] = parse_override(o);
    apply(config, key, value);
  }
  config.validate();
  return config;
}

ScenarioConfig load_scenario(const std::vector<std::filesystem::path>& files,
                             const std::vector<std::string>& overrides) {
  if (files.empty()) throw ConfigError("no configuration file given");
  ScenarioConfig config;
  for (const auto& file : files) apply_tree(config, parse_ini(read_text_file(file), file.string()));
  for (const auto& o : overrides) {
    const auto [key, value] = parse_override(o);
    apply(config, key, value);
  }
  config.validate();
  return config;
}

DecisionParams load_decision_params(const std::filesystem::path& file) {
  ScenarioConfig config;
  const auto tree = parse_ini(read_text_file(file), file.string());
  for (const auto& [section, body] : tree) {
    if (section != "decision") {
      throw ConfigError(file.string() + ": only a [decision] section is allowed");
    }
  }
  apply_tree(config, tree);
  config.decision.validate();
  return config.decision;
}

std::string format_scenario(const ScenarioConfig& config) {
  std::vector<std::string> sections{"scenario", "geometry", "vehicle", "pedestrian"};
  if (!config.model.script.empty()) sections.push_back("script");
  if (!config.model.inputs.empty()) sections.push_back("inputs");
  for (const char* s : {"sfm", "mdp", "decision"}) sections.emplace_back(s);
  return format_sections(config, sections);
}

std::string format_decision_params(const DecisionParams& params) {
  ScenarioConfig c;
  c.decision = params;
  return format_sections(c, {"decision"});
}

std::string format_sfm_params(const SfmParams& params) {
  ScenarioConfig c;
  c.model.sfm = params;
  return format_sections(c, {"sfm"});
}

std::string format_mdp_rewards(const MdpSpec& spec) {
  return fmt::format("[mdp]\ngoal_reward = {}\ncollision_penalty = {}\nstep_cost = {}\n\n",
                     format_number(spec.goal_reward), format_number(spec.collision_penalty),
                     format_number(spec.step_cost));
}

Script parse_script(std::string_view text) {
  Script script;
  for (auto entry : split(text, ';')) {
    entry = trim(entry);
    if (entry.empty()) continue;
    const auto values = parse_numbers(entry, "script breakpoint");
    if (values.size() != 3) throw ConfigError("script breakpoints need 't v i' triples");
    script.push_back({values[0], values[1], values[2]});
  }
  validate_script(script);
  return script;
}

std::string format_script(const Script& script) {
  std::string out;
  for (const auto& pt : script) {
    if (!out.empty()) out += "; ";
    out += fmt::format("{} {} {}", format_number(pt.t), format_number(pt.v_ped),
                       format_number(pt.i_ped));
  }
  return out;
}

std::vector<ExternalInput> parse_inputs(std::string_view text) {
  std::vector<ExternalInput> inputs;
  for (auto entry : split(text, ';')) {
    entry = trim(entry);
    if (entry.empty()) continue;
    std::istringstream in{std::string(entry)};
    std::string tick, v, i, extra;
    if (!(in >> tick >> v >> i) || (in >> extra)) {
      throw ConfigError("input events need 'tick v i' triples");
    }
    inputs.push_back({static_cast<std::int64_t>(parse_unsigned(tick, "input tick")),
                      parse_number(v, "input v"), parse_number(i, "input i")});
  }
  return inputs;
}

std::string format_inputs(const std::vector<ExternalInput>& inputs) {
  std::string out;
  for (const auto& in : inputs) {
    if (!out.empty()) out += "; ";
    out += fmt::format("{} {} {}", in.tick, format_number(in.v_ped), format_number(in.i_ped));
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace crossing
