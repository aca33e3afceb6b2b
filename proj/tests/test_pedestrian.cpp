#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "crossing/pedestrian.hpp"

using namespace crossing;

namespace {

// Plain Bellman sweeps, no tolerance logic.
std::vector<double> brute_force_values(const TabularMdp& m, int sweeps) {
  std::vector<double> v(m.states(), 0.0);
  for (std::size_t s = 0; s < m.states(); ++s)
    if (m.terminal(s)) v[s] = m.terminal_value(s);
  for (int k = 0; k < sweeps; ++k) {
    std::vector<double> next = v;
    for (std::size_t s = 0; s < m.states(); ++s) {
      if (m.terminal(s)) continue;
      double best = -1e300;
      for (std::size_t a = 0; a < m.actions(); ++a) {
        double q = m.reward(s, a);
        for (const auto& tr : m.transitions(s, a)) q += m.gamma() * tr.probability * v[tr.next];
        best = std::max(best, q);
      }
      next[s] = best;
    }
    v = next;
  }
  return v;
}

}  // namespace

TEST(Sfm, EquilibriumWhenVehicleFar) {
  SfmParams p;
  EXPECT_NEAR(sfm_acceleration(-3.0, p.v0, INFINITY, 2.0, p), 0.0, 1e-12);
  EXPECT_NEAR(sfm_acceleration(-3.0, p.v0, 1e6, 2.0, p), 0.0, 1e-12);
}

TEST(Sfm, PureRelaxationFromRest) {
  SfmParams p;
  EXPECT_NEAR(sfm_acceleration(-3.0, 0.0, INFINITY, 2.0, p), p.v0 / p.tau, 1e-12);
}

TEST(Sfm, RepulsionAtCollisionRadius) {
  SfmParams p;
  p.v0 = 1.5;
  p.tau = 0.5;
  p.A_veh = 3.0;
  // approaching side: away from the road is the negative direction
  EXPECT_NEAR(sfm_acceleration(-3.0, 1.0, 2.0, 2.0, p), 1.0 - 3.0, 1e-12);
  EXPECT_NEAR(sfm_acceleration(3.0, 1.0, 2.0, 2.0, p), 1.0 + 3.0, 1e-12);
}

TEST(Sfm, RepulsionDecaysWithGap) {
  SfmParams p;
  double prev = INFINITY;
  for (double gap = 0.0; gap < 40.0; gap += 0.5) {
    const double rep = -(sfm_acceleration(-3.0, p.v0, gap, 2.0, p));
    EXPECT_LT(rep, prev);
    prev = rep;
  }
}

TEST(Sfm, StepClampsSpeed) {
  SfmParams p;
  Geometry g;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const PedestrianState ped{6.0 * U(rng), 1.5 + 1.5 * U(rng), 0.5};
    const VehicleState veh{20.0 * U(rng), 5.0 + 5.0 * U(rng), 0.0};
    const auto cmd = sfm_step(ped, veh, p, g, 0.5);
    EXPECT_GE(cmd.v_ped_next, 0.0);
    EXPECT_LE(cmd.v_ped_next, kPedSpeedMax);
  }
  EXPECT_THROW(sfm_step({}, {}, p, g, 0.0), ContractViolation);
}

TEST(MdpSolver, OneStepFromAbsorbingGoal) {
  TabularMdp m(2, 1, 0.9);
  m.set_terminal(1, 1.0, 0);
  m.add_transition(0, 0, 1, 1.0);
  m.set_reward(0, 0, 0.0);
  const auto sol = mdp_solve(m, 1e-12);
  EXPECT_NEAR(sol.values[0], 0.9, 1e-12);
}

TEST(MdpSolver, ZeroRewardsGiveFirstAction) {
  TabularMdp m(3, 4, 0.9);
  for (std::size_t s = 0; s < 3; ++s)
    for (std::size_t a = 0; a < 4; ++a) m.add_transition(s, a, (s + a) % 3, 1.0);
  const auto sol = mdp_solve(m, 1e-12);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_EQ(sol.values[s], 0.0);
    EXPECT_EQ(sol.policy[s], 0u);
  }
}

TEST(MdpSolver, ChainMatchesBruteForce) {
  TabularMdp m(3, 2, 0.9);
  // action 0: stay, action 1: move right; state 2 loops on itself
  const double rewards[3][2] = {{0.1, -0.5}, {0.3, 1.0}, {2.0, -1.0}};
  for (std::size_t s = 0; s < 3; ++s) {
    m.add_transition(s, 0, s, 1.0);
    m.add_transition(s, 1, std::min<std::size_t>(s + 1, 2), 0.8);
    m.add_transition(s, 1, s, 0.2);
    for (std::size_t a = 0; a < 2; ++a) m.set_reward(s, a, rewards[s][a]);
  }
  const auto sol = mdp_solve(m, 1e-12, 100000);
  // 100 sweeps leave 0.9^100 * |V| ≈ 5e-4 of error; compare with 400 sweeps too.
  const auto v100 = brute_force_values(m, 100);
  const auto v400 = brute_force_values(m, 400);
  for (std::size_t s = 0; s < 3; ++s) {
    EXPECT_NEAR(sol.values[s], v100[s], 1e-3);
    EXPECT_NEAR(sol.values[s], v400[s], 1e-10);
  }
}

TEST(MdpSolver, ResidualsNonIncreasing) {
  const auto model = PedestrianMdp::solve(MdpSpec{});
  const auto& r = model->solution().residuals;
  ASSERT_GT(r.size(), 1u);
  for (std::size_t k = 1; k < r.size(); ++k) EXPECT_LE(r[k], r[k - 1] * (1 + 1e-12));
  EXPECT_LT(r.back(), 1e-8);
}

TEST(MdpSolver, IterationCapIsSolverError) {
  TabularMdp m(1, 1, 0.99);
  m.add_transition(0, 0, 0, 1.0);
  m.set_reward(0, 0, 1.0);
  EXPECT_THROW(mdp_solve(m, 1e-12, 5), SolverError);
}

TEST(MdpSolver, ValidatesRows) {
  TabularMdp m(2, 1, 0.9);
  m.add_transition(0, 0, 1, 0.5);
  m.add_transition(1, 0, 1, 1.0);
  EXPECT_THROW(mdp_solve(m, 1e-9), ContractViolation);
}

TEST(MdpPedestrian, GoalCellWaits) {
  const auto model = PedestrianMdp::solve(MdpSpec{});
  const auto cell = model->discretize(5.0, 1.0, 10.0);
  EXPECT_TRUE(model->is_goal(cell.position));
  EXPECT_EQ(model->action(cell), MdpAction::Wait);
  Geometry g;
  const auto cmd = mdp_step({5.0, 1.0, 0.5}, {30.0, 8.0, 0.0}, *model, g, 1e-6);
  EXPECT_EQ(cmd.v_ped_next, 0.0);
}

TEST(MdpPedestrian, TieGoesToLowerCell) {
  MdpSpec spec;
  spec.d_max = 8.0;
  spec.position_bins = 16;  // unit cells, centres -7.5, -6.5, ...
  const auto model = PedestrianMdp::solve(spec);
  EXPECT_EQ(model->discretize(-7.0, 0.0, 10.0).position, 0u);
  EXPECT_EQ(model->discretize(-6.99, 0.0, 10.0).position, 1u);
  EXPECT_EQ(model->discretize(0.0, 0.25, 10.0).velocity, 0u);
  EXPECT_EQ(model->discretize(0.0, 0.26, 10.0).velocity, 1u);
  // out of grid clamps
  EXPECT_EQ(model->discretize(-100.0, -1.0, 0.0).position, 0u);
  EXPECT_EQ(model->discretize(100.0, 10.0, 0.0).velocity, 4u);
}

TEST(MdpPedestrian, WalksOnWhenVehicleFar) {
  const auto model = PedestrianMdp::solve(MdpSpec{});
  const auto cell = model->discretize(-1.0, 0.5, INFINITY);
  EXPECT_EQ(model->action(cell), MdpAction::Accelerate);
}

TEST(MdpPedestrian, YieldsAtCurbWhenVehicleClose) {
  const auto model = PedestrianMdp::solve(MdpSpec{});
  EXPECT_EQ(model->action(model->discretize(-2.75, 1.0, 1.5)), MdpAction::Wait);
  EXPECT_EQ(model->action(model->discretize(-2.05, 1.5, 3.0)), MdpAction::Wait);
  // same spot, vehicle passed
  EXPECT_EQ(model->action(model->discretize(-2.05, 1.5, INFINITY)), MdpAction::Accelerate);
}

TEST(MdpPedestrian, TimeGap) {
  EXPECT_NEAR(vehicle_time_gap({10.0, 5.0, 0.0}, 4.0, 1e-6), 2.0, 1e-6);
  EXPECT_EQ(vehicle_time_gap({-2.0, 5.0, 0.0}, 4.0, 1e-6), 0.0);
  EXPECT_TRUE(std::isinf(vehicle_time_gap({-4.5, 5.0, 0.0}, 4.0, 1e-6)));
}

TEST(Scripted, Examples) {
  const Script s1{{0.0, 1.5, 0.55}};
  auto c = scripted_step(s1, 3.0);
  EXPECT_EQ(c.v_ped_next, 1.5);
  EXPECT_EQ(c.i_ped_next, 0.55);
  const Script s2{{0.0, 2.2, 0.2}, {1.2, 0.0, 0.2}};
  c = scripted_step(s2, 1.3);
  EXPECT_EQ(c.v_ped_next, 0.0);
  EXPECT_EQ(c.i_ped_next, 0.2);
  c = scripted_step(s2, -1.0);
  EXPECT_EQ(c.v_ped_next, 2.2);
  c = scripted_step(s2, 1.2);
  EXPECT_EQ(c.v_ped_next, 0.0);
}

TEST(Scripted, Validation) {
  EXPECT_THROW(validate_script({}), ConfigError);
  EXPECT_THROW(validate_script({{1.0, 1.0, 0.5}, {1.0, 1.0, 0.5}}), ConfigError);
  EXPECT_THROW(validate_script({{0.0, 3.5, 0.5}}), ConfigError);
  EXPECT_THROW(validate_script({{0.0, 1.0, 1.5}}), ConfigError);
  EXPECT_THROW(scripted_step({}, 0.0), ContractViolation);
}

TEST(Scripted, Reproducible) {
  const Script s{{0.0, 2.2, 0.2}, {1.2, 0.0, 0.2}, {3.0, 1.0, 0.9}};
  for (int k = 0; k < 500; ++k) {
    const double t = 0.01 * k;
    const auto a = scripted_step(s, t);
    const auto b = scripted_step(s, t);
    EXPECT_EQ(a.v_ped_next, b.v_ped_next);
    EXPECT_EQ(a.i_ped_next, b.i_ped_next);
  }
}

TEST(External, HoldsLastValueAndRejectsPastTicks) {
  ExternalPedestrian ext(0.5, 0.1);
  auto c = ext.next(0);
  EXPECT_EQ(c.v_ped_next, 0.5);
  EXPECT_TRUE(ext.push({3, 1.2, 0.8}));
  EXPECT_EQ(ext.next(1).v_ped_next, 0.5);
  EXPECT_EQ(ext.next(2).v_ped_next, 0.5);
  c = ext.next(3);
  EXPECT_EQ(c.v_ped_next, 1.2);
  EXPECT_EQ(c.i_ped_next, 0.8);
  EXPECT_EQ(ext.next(10).v_ped_next, 1.2);
  EXPECT_FALSE(ext.push({10, 0.0, 0.0}));
  ASSERT_EQ(ext.applied().size(), 1u);
  EXPECT_EQ(ext.applied()[0], (ExternalInput{3, 1.2, 0.8}));
}

TEST(External, SameTickKeepsArrivalOrder) {
  ExternalPedestrian ext(0.0, 0.0);
  ext.push({2, 1.0, 0.1});
  ext.push({1, 0.3, 0.3});
  ext.push({2, 2.0, 0.2});
  EXPECT_EQ(ext.next(1).v_ped_next, 0.3);
  const auto c = ext.next(2);
  EXPECT_EQ(c.v_ped_next, 2.0);
  EXPECT_EQ(ext.applied().size(), 3u);
}
