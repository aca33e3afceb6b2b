#include "crossing/trace_io.hpp"

#include <algorithm>
#include <fmt/format.h>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

#include "crossing/config.hpp"

namespace crossing {

namespace {

int bit(bool b) { return b ? 1 : 0; }

bool parse_bit(std::string_view text, std::size_t line) {
  if (text == "1") return true;
  if (text == "0") return false;
  throw ConfigError(fmt::format("trace line {}: expected 0 or 1, got '{}'", line, text));
}

}  // namespace

std::string trace_csv_row(const TraceRecord& r) {
  const auto& f = r.flags;
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{}", format_number(r.t),
                     format_number(r.d_veh), format_number(r.v_veh), format_number(r.a_veh),
                     format_number(r.d_ped), format_number(r.v_ped), format_number(r.i_raw),
                     format_number(r.i_eff), to_string(r.mode), bit(f.pedestrian_in_collision_area),
                     bit(f.pedestrian_close_to_road), bit(f.pedestrian_gone_through),
                     bit(f.pedestrian_crossed), bit(f.vehicle_gone_through));
}

void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace) {
  out << kTraceCsvHeader << '\n';
  for (const auto& r : trace) out << trace_csv_row(r) << '\n';
}

std::string trace_to_csv(const std::vector<TraceRecord>& trace) {
  std::ostringstream out;
  write_trace_csv(out, trace);
  return out.str();
}

std::vector<TraceRecord> parse_trace_csv(std::string_view text) {
  std::vector<TraceRecord> trace;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (number == 1) {
      if (line != kTraceCsvHeader) throw ConfigError("trace line 1: unexpected header");
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream row(line);
    std::string cell;
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    if (cells.size() != 14) {
      throw ConfigError(fmt::format("trace line {}: expected 14 columns, got {}", number, cells.size()));
    }
    try {
      TraceRecord r;
      const std::string where = fmt::format("trace line {}", number);
      r.t = parse_number(cells[0], where);
      r.d_veh = parse_number(cells[1], where);
      r.v_veh = parse_number(cells[2], where);
      r.a_veh = parse_number(cells[3], where);
      r.d_ped = parse_number(cells[4], where);
      r.v_ped = parse_number(cells[5], where);
      r.i_raw = parse_number(cells[6], where);
      r.i_eff = parse_number(cells[7], where);
      r.mode = mode_from_string(cells[8]);
      r.flags.pedestrian_in_collision_area = parse_bit(cells[9], number);
      r.flags.pedestrian_close_to_road = parse_bit(cells[10], number);
      r.flags.pedestrian_gone_through = parse_bit(cells[11], number);
      r.flags.pedestrian_crossed = parse_bit(cells[12], number);
      r.flags.vehicle_gone_through = parse_bit(cells[13], number);
      trace.push_back(r);
    } catch (const ContractViolation& e) {
      throw ConfigError(fmt::format("trace line {}: {}", number, e.what()));
    }
  }
  if (number == 0) throw ConfigError("trace file is empty");
  return trace;
}

nlohmann::json state_message(const TraceRecord& r) {
  return {{"type", "state"},
          {"t", r.t},
          {"veh", {{"d", r.d_veh}, {"v", r.v_veh}, {"a", r.a_veh}}},
          {"ped", {{"d", r.d_ped}, {"v", r.v_ped}, {"i_raw", r.i_raw}, {"i_eff", r.i_eff}}},
          {"mode", std::string(to_string(r.mode))},
          {"flags",
           {{"ped_in_ca", r.flags.pedestrian_in_collision_area},
            {"ped_in_nz", r.flags.pedestrian_close_to_road},
            {"ped_gone", r.flags.pedestrian_gone_through},
            {"ped_crossed", r.flags.pedestrian_crossed},
            {"veh_gone", r.flags.vehicle_gone_through}}}};
}

void write_trace_jsonl(std::ostream& out, const std::vector<TraceRecord>& trace) {
  for (const auto& r : trace) out << state_message(r).dump() << '\n';
}

RunSummary summarize(const RunResult& result, const ScenarioConfig& config) {
  RunSummary s;
  s.timeout = result.timeout();
  s.ticks = result.trace.size();
  s.duration = static_cast<double>(s.ticks) * config.dt;
  s.min_separation = std::numeric_limits<double>::infinity();
  s.min_v_veh = std::numeric_limits<double>::infinity();
  std::optional<std::size_t> ped_through;
  std::optional<std::size_t> veh_through;
  for (std::size_t k = 0; k < result.trace.size(); ++k) {
    const auto& r = result.trace[k];
    s.min_separation =
        std::min(s.min_separation, separation(r.d_veh, r.d_ped, config.geometry.L_corridor));
    s.min_v_veh = std::min(s.min_v_veh, r.v_veh);
    if (r.v_veh < 0.1) s.stop_duration += config.dt;
    if (!ped_through && r.flags.pedestrian_gone_through) ped_through = k;
    if (!veh_through && r.flags.vehicle_gone_through) veh_through = k;
  }
  if (ped_through && (!veh_through || *ped_through < *veh_through)) {
    s.crossing_order = "pedestrian_first";
  } else if (veh_through) {
    s.crossing_order = "vehicle_first";
  } else {
    s.crossing_order = "none";
  }
  return s;
}

nlohmann::json to_json(const RunSummary& s) {
  return {{"min_separation", s.min_separation}, {"stop_duration", s.stop_duration},
          {"min_v_veh", s.min_v_veh},           {"crossing_order", s.crossing_order},
          {"timeout", s.timeout},               {"ticks", s.ticks},
          {"duration", s.duration}};
}

}  // namespace crossing
