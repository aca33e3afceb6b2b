#include <gtest/gtest.h>

#include <cmath>

#include "crossing/config.hpp"
#include "crossing/session.hpp"
#include "crossing/trace_io.hpp"

using namespace crossing;
using nlohmann::json;

namespace {

const std::filesystem::path kScenarios = std::filesystem::path(CROSSING_SOURCE_DIR) / "scenarios";

ScenarioConfig live_config() {
  return load_scenario({kScenarios / "scenario1.cfg"}, {"pedestrian.model=external"});
}

json input(double v, double i) { return {{"type", "input"}, {"v_ped", v}, {"i_ped", i}}; }
json control(const std::string& action) { return {{"type", "control"}, {"action", action}}; }

std::size_t count_type(const std::vector<json>& msgs, const std::string& type) {
  std::size_t n = 0;
  for (const auto& m : msgs) n += m.at("type") == type;
  return n;
}

// Drives the session with a fixed wall-clock step; returns every broadcast.
std::vector<json> drive(Session& s, double& wall, double until, double step = 0.005) {
  std::vector<json> out;
  while (wall < until - 1e-12) {
    wall += step;
    auto msgs = s.advance(wall);
    out.insert(out.end(), msgs.begin(), msgs.end());
  }
  return out;
}

}  // namespace

TEST(Session, HelloDescribesScenario) {
  Session s("s1", live_config());
  const auto h = s.hello();
  EXPECT_EQ(h.at("type"), "hello");
  EXPECT_EQ(h.at("session"), "s1");
  EXPECT_EQ(h.at("model"), "external");
  EXPECT_EQ(h.at("spectator"), false);
  EXPECT_EQ(h.at("state"), "paused");
  EXPECT_EQ(h.at("thresholds").at("i_ped_L"), 0.25);
  EXPECT_EQ(h.at("geometry").at("d_CA"), 2.0);
  const auto reply = s.handle({{"type", "hello"}}, 0.0);
  ASSERT_EQ(reply.to_sender.size(), 2u);
  EXPECT_EQ(reply.to_sender[1].at("type"), "state");
}

TEST(Session, PausedSessionDoesNotAdvance) {
  Session s("s1", live_config());
  double wall = 0.0;
  EXPECT_TRUE(drive(s, wall, 1.0).empty());
  EXPECT_TRUE(s.trace().empty());
}

TEST(Session, InputReflectedInNextBroadcast) {
  Session s("s1", live_config());
  s.client_connected(0.0);
  s.handle(control("start"), 0.0);
  double wall = 0.0;
  drive(s, wall, 0.5, 0.01);
  const auto before = s.trace().size();
  EXPECT_TRUE(s.handle(input(0.4, 0.9), wall).to_sender.empty());
  // applied on the very next tick ...
  wall += 0.01;
  auto msgs = s.advance(wall);
  ASSERT_EQ(s.trace().size(), before + 1);
  EXPECT_EQ(s.trace()[before].v_ped, 0.4);
  EXPECT_EQ(s.trace()[before - 1].v_ped, 1.5);
  // ... and carried by the next broadcast state, whenever decimation lets it out
  while (msgs.empty()) msgs = s.advance(wall += 0.01);
  EXPECT_EQ(msgs.front().at("ped").at("v"), 0.4);
  EXPECT_EQ(msgs.front().at("ped").at("i_raw"), 0.9);
}

TEST(Session, HoldsLastInput) {
  Session s("s1", live_config());
  s.handle(control("start"), 0.0);
  double wall = 0.0;
  drive(s, wall, 0.2, 0.01);
  s.handle(input(0.7, 0.3), wall);
  drive(s, wall, 1.0, 0.01);
  const auto tr = s.trace();
  for (std::size_t k = 21; k < tr.size(); ++k) {
    EXPECT_EQ(tr[k].v_ped, 0.7);
    EXPECT_EQ(tr[k].i_raw, 0.3);
  }
  // before the input the scenario's initial command held
  EXPECT_EQ(tr[5].v_ped, 1.5);
}

TEST(Session, StaleInputIsDropped) {
  Session s("s1", live_config());
  s.handle(control("start"), 0.0);
  double wall = 0.0;
  drive(s, wall, 1.0, 0.01);
  const double now = s.trace().back().t;
  auto stale = input(0.0, 0.0);
  stale["t"] = now - 0.5;
  auto reply = s.handle(stale, wall);
  ASSERT_EQ(reply.to_sender.size(), 1u);
  EXPECT_EQ(reply.to_sender[0].at("type"), "dropped");
  EXPECT_EQ(s.dropped_inputs(), 1u);
  auto fresh = input(0.0, 0.0);
  fresh["t"] = now - 0.01;  // within one tick: accepted
  reply = s.handle(fresh, wall);
  EXPECT_TRUE(reply.to_sender.empty());
  EXPECT_EQ(s.dropped_inputs(), 1u);
}

TEST(Session, SpectatorIgnoresInputs) {
  Session s("s1", load_scenario({kScenarios / "scenario1.cfg"}));
  EXPECT_TRUE(s.spectator());
  s.handle(control("start"), 0.0);
  double wall = 0.0;
  drive(s, wall, 0.3, 0.01);
  const auto reply = s.handle(input(0.0, 0.0), wall);
  ASSERT_EQ(reply.to_sender.size(), 1u);
  EXPECT_EQ(reply.to_sender[0].at("type"), "notice");
  EXPECT_EQ(s.ignored_inputs(), 1u);
  drive(s, wall, 0.6, 0.01);
  EXPECT_EQ(s.trace().back().v_ped, 1.5);
}

TEST(Session, InvalidMessagesGetErrors) {
  Session s("s1", live_config());
  for (const json& bad : {json{{"kind", "x"}}, json{{"type", "nope"}}, input(-1.0, 0.5), input(1.0, 1.5),
                          json{{"type", "input"}, {"v_ped", "fast"}, {"i_ped", 0.5}},
                          json{{"type", "control"}, {"action", "set_pace"}, {"value", -2}},
                          control("explode")}) {
    const auto reply = s.handle(bad, 0.0);
    ASSERT_EQ(reply.to_sender.size(), 1u) << bad.dump();
    EXPECT_EQ(reply.to_sender[0].at("type"), "error") << bad.dump();
  }
}

TEST(Session, LiveRunReplaysOfflineExactly) {
  Session s("s1", live_config());
  s.client_connected(0.0);
  s.handle(control("start"), 0.0);
  double wall = 0.0;
  const struct { double at, v, i; } plan[] = {{0.3, 0.0, 0.55}, {1.1, 0.0, 0.3}, {2.0, 1.4, 0.8},
                                              {2.05, 1.6, 0.8}, {4.0, 1.0, 0.6}};
  for (const auto& p : plan) {
    drive(s, wall, p.at, 0.007);
    s.handle(input(p.v, p.i), wall);
  }
  drive(s, wall, 120.0, 0.05);
  ASSERT_EQ(s.state(), SessionState::Finished);
  ASSERT_EQ(s.input_log().size(), 5u);

  auto offline = live_config();
  offline.model.inputs = s.input_log();
  const auto res = run(offline);
  EXPECT_EQ(trace_to_csv(res.trace), trace_to_csv(s.trace()));

  // through the file format as well
  const auto reloaded = parse_scenario(format_scenario(offline));
  EXPECT_EQ(trace_to_csv(run(reloaded).trace), trace_to_csv(s.trace()));
}

TEST(Session, BroadcastsAreDecimated) {
  Session s("s1", live_config(), {1.0, 30.0, 30.0});
  s.client_connected(0.0);
  s.handle(control("start"), 0.0);
  double wall = 0.0;
  const auto msgs = drive(s, wall, 3.0, 0.004);
  const auto states = count_type(msgs, "state");
  EXPECT_LE(states, 3u * 30u + 1u);
  EXPECT_GE(states, 3u * 30u * 8u / 10u);
}

TEST(Session, FinishedMessageAtEnd) {
  Session s("s1", load_scenario({kScenarios / "scenario1.cfg"}));
  s.client_connected(0.0);
  s.handle(control("start"), 0.0);
  double wall = 0.0;
  const auto msgs = drive(s, wall, 120.0, 0.1);
  EXPECT_EQ(s.state(), SessionState::Finished);
  ASSERT_EQ(count_type(msgs, "finished"), 1u);
  EXPECT_EQ(msgs.back().at("outcome"), "completed");
  EXPECT_EQ(s.trace(), run(load_scenario({kScenarios / "scenario1.cfg"})).trace);
  EXPECT_EQ(s.handle(control("start"), wall).to_sender.at(0).at("type"), "error");
}

TEST(Session, PauseAfterGracePeriodWithoutClients) {
  // stuck at the curb so the run outlasts the grace period
  Session s("s1", load_scenario({kScenarios / "deadlock_probe.cfg"},
                                {"pedestrian.model=external", "decision.k_disc=0"}));
  s.client_connected(0.0);
  s.handle(control("start"), 0.0);
  double wall = 0.0;
  drive(s, wall, 1.0, 0.01);
  s.client_disconnected(wall);
  const double left = wall;
  drive(s, wall, left + 29.9, 0.01);
  EXPECT_EQ(s.state(), SessionState::Running);
  const auto msgs = drive(s, wall, left + 30.05, 0.01);
  EXPECT_EQ(s.state(), SessionState::Paused);
  bool saw = false;
  for (const auto& m : msgs) saw |= m.at("type") == "status" && m.value("reason", "") == "no clients";
  EXPECT_TRUE(saw);
}

TEST(Session, ReconnectCancelsGracePause) {
  Session s("s1", live_config());
  s.client_connected(0.0);
  s.handle(control("start"), 0.0);
  double wall = 0.0;
  s.client_disconnected(0.0);
  drive(s, wall, 20.0, 0.05);
  s.client_connected(wall);
  drive(s, wall, 45.0, 0.05);
  EXPECT_NE(s.state(), SessionState::Paused);
}

TEST(Session, ResetRestartsFromInitialState) {
  Session s("s1", live_config());
  s.handle(control("start"), 0.0);
  double wall = 0.0;
  drive(s, wall, 1.0, 0.01);
  s.handle(input(0.0, 0.0), wall);
  drive(s, wall, 1.5, 0.01);
  const auto reply = s.handle(control("reset"), wall);
  EXPECT_EQ(s.state(), SessionState::Paused);
  EXPECT_TRUE(s.trace().empty());
  EXPECT_TRUE(s.input_log().empty());
  ASSERT_EQ(reply.broadcast.size(), 2u);
  EXPECT_EQ(reply.broadcast[0].at("state"), "paused");
  EXPECT_EQ(reply.broadcast[1].at("t"), 0.0);
}

TEST(Session, PaceScalesSimulatedTime) {
  Session s("s1", live_config());
  s.client_connected(0.0);
  s.handle(control("start"), 0.0);
  const auto reply = s.handle({{"type", "control"}, {"action", "set_pace"}, {"value", 0.5}}, 0.0);
  EXPECT_EQ(reply.broadcast.at(0).at("pace"), 0.5);
  double wall = 0.0;
  drive(s, wall, 2.0, 0.005);
  const double sim_elapsed = static_cast<double>(s.trace().size()) * 0.01;
  EXPECT_NEAR(sim_elapsed, 1.0, 0.011);
}

TEST(Session, PauseStopsTheClock) {
  Session s("s1", live_config());
  s.handle(control("start"), 0.0);
  double wall = 0.0;
  drive(s, wall, 0.5, 0.01);
  s.handle(control("pause"), wall);
  const auto n = s.trace().size();
  drive(s, wall, 3.0, 0.01);
  EXPECT_EQ(s.trace().size(), n);
  s.handle(control("start"), wall);
  drive(s, wall, 3.5, 0.01);
  EXPECT_NEAR(static_cast<double>(s.trace().size() - n), 50.0, 1.0);
}
