#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "crossing/engine.hpp"

namespace crossing {

inline constexpr std::string_view kTraceCsvHeader =
    "t,d_veh,v_veh,a_veh,d_ped,v_ped,i_raw,i_eff,mode,ped_in_ca,ped_in_nz,ped_gone,ped_crossed,"
    "veh_gone";

std::string trace_csv_row(const TraceRecord& record);
void write_trace_csv(std::ostream& out, const std::vector<TraceRecord>& trace);
std::string trace_to_csv(const std::vector<TraceRecord>& trace);

/// Parses a trace CSV. Throws ConfigError with the offending line number.
std::vector<TraceRecord> parse_trace_csv(std::string_view text);

/// State message shared by JSON-lines output and the session stream.
nlohmann::json state_message(const TraceRecord& record);
void write_trace_jsonl(std::ostream& out, const std::vector<TraceRecord>& trace);

/// Outcome of one run as reported by `simulate`.
struct RunSummary {
  double min_separation = 0.0;
  double stop_duration = 0.0;  // time spent below 0.1 m/s
  double min_v_veh = 0.0;
  std::string crossing_order;  // pedestrian_first | vehicle_first | none
  bool timeout = false;
  std::size_t ticks = 0;
  double duration = 0.0;
};

RunSummary summarize(const RunResult& result, const ScenarioConfig& config);
nlohmann::json to_json(const RunSummary& summary);

}  // namespace crossing
