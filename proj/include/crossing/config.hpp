#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "crossing/engine.hpp"

namespace crossing {

// Scenario files are INI documents: `[section]` headers with `key = value`
// lines, comments start with `#` or `;`. Every field is addressable as a
// dotted key `section.key`, which is also the form taken by overrides.
//
//   [scenario]   name dt t_max exit_distance seed
//   [geometry]   d_NZ d_CA L_corridor crossing_length
//   [vehicle]    d_veh0 v_veh0 policy(decision|constant)
//   [pedestrian] model(sfm|mdp|scripted|external) d_ped0 v_ped0 i_ped0
//   [script]     breakpoints = "t v i; t v i; ..."
//   [inputs]     events = "tick v i; ..."
//   [sfm]        v0 tau A_veh B_veh goal
//   [mdp]        d_min d_max position_bins velocity_bins dv period gap_edges
//                gamma goal_reward collision_penalty step_cost goal
//   [decision]   i_ped_H i_ped_L v_ped_H v_ped_L k_veh_acc k_veh_dec k_disc
//                v_veh_d k_num
//
// Files are layered: later files and then overrides replace earlier values.

/// Parses "key=value" into its two halves; throws ConfigError when malformed.
std::pair<std::string, std::string> parse_override(std::string_view text);

ScenarioConfig parse_scenario(std::string_view text, const std::vector<std::string>& overrides = {});
ScenarioConfig load_scenario(const std::vector<std::filesystem::path>& files,
                             const std::vector<std::string>& overrides = {});

/// Reads a document holding only a [decision] section.
DecisionParams load_decision_params(const std::filesystem::path& file);

/// Full scenario document; parse_scenario(format_scenario(c)) reproduces c.
std::string format_scenario(const ScenarioConfig& config);
/// Document with only the [decision] section, layerable over a scenario.
std::string format_decision_params(const DecisionParams& params);
std::string format_sfm_params(const SfmParams& params);
std::string format_mdp_rewards(const MdpSpec& spec);

Script parse_script(std::string_view text);
std::string format_script(const Script& script);
std::vector<ExternalInput> parse_inputs(std::string_view text);
std::string format_inputs(const std::vector<ExternalInput>& inputs);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);
double parse_number(std::string_view text, std::string_view what);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace crossing
