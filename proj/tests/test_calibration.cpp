#include <gtest/gtest.h>

#include <cmath>

#include "crossing/calibration.hpp"
#include "crossing/config.hpp"
#include "crossing/trace_io.hpp"

using namespace crossing;

namespace {

const std::filesystem::path kRoot(CROSSING_SOURCE_DIR);

CalibrationContexts contexts(const std::string& model) {
  CalibrationContexts c;
  for (const std::string label : {"cross_first", "yield"}) {
    c[label] = load_scenario({kRoot / "scenarios" / ("calib_" + model + "_" + label + ".cfg")});
  }
  return c;
}

PatternSearchOptions serial() {
  PatternSearchOptions o;
  o.threads = 1;
  return o;
}

std::string csv(const std::string& rows) { return std::string(kTrajectoryCsvHeader) + "\n" + rows; }

}  // namespace

TEST(Trajectories, TwoRowFile) {
  const auto ds = parse_trajectories(csv("a,0,-3,1.2,cross_first\na,0.1,-2.88,1.2,cross_first\n"));
  ASSERT_EQ(ds.trajectories.size(), 1u);
  EXPECT_EQ(ds.trajectories[0].samples.size(), 2u);
  EXPECT_NEAR(ds.trajectories[0].dt, 0.1, 1e-15);
  EXPECT_EQ(ds.trajectories[0].label, "cross_first");
}

TEST(Trajectories, DecreasingTimeIsNamedError) {
  try {
    parse_trajectories(csv("a,0.1,-3,1.2,yield\na,0,-2.88,1.2,yield\n"), "x.csv");
    FAIL();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("x.csv"), std::string::npos) << what;
    EXPECT_NE(what.find("line 3"), std::string::npos) << what;
  }
}

TEST(Trajectories, MalformedInputs) {
  EXPECT_THROW(parse_trajectories(""), ConfigError);
  EXPECT_THROW(parse_trajectories("id,t\n"), ConfigError);
  EXPECT_THROW(parse_trajectories(csv("a,0,-3,1.2,run\na,0.1,-3,1.2,run\n")), ConfigError);
  EXPECT_THROW(parse_trajectories(csv("a,0,-3,1.2,yield\n")), ConfigError);  // one sample
  EXPECT_THROW(parse_trajectories(csv("a,0,-3,nan,yield\na,0.1,-3,1,yield\n")), ConfigError);
  EXPECT_THROW(parse_trajectories(csv("a,0,-3,1,yield\na,0.1,-3,1,yield\na,0.3,-3,1,yield\n")),
               ConfigError);  // uneven sampling
  EXPECT_THROW(parse_trajectories(csv("a,0,-3,1,yield,x\n")), ConfigError);
}

TEST(Trajectories, GroupsByIdInOrderOfFirstAppearance) {
  const auto ds = parse_trajectories(csv("b,0,-3,1,yield\na,0,-4,1,cross_first\n"
                                         "b,0.1,-3,1,yield\na,0.1,-3.9,1,cross_first\n"));
  ASSERT_EQ(ds.trajectories.size(), 2u);
  EXPECT_EQ(ds.trajectories[0].id, "b");
  EXPECT_EQ(ds.trajectories[1].id, "a");
  EXPECT_EQ(ds.sample_count(), 4u);
  EXPECT_EQ(parse_trajectories(trajectories_to_csv(ds)).sample_count(), 4u);
}

TEST(Trajectories, ShippedScenario1Reference) {
  const auto ds = load_trajectories(kRoot / "data" / "scenario1_reference.csv");
  ASSERT_EQ(ds.trajectories.size(), 1u);
  EXPECT_EQ(ds.trajectories[0].label, "cross_first");
  EXPECT_EQ(ds.trajectories[0].samples.size(), 600u);
  EXPECT_NEAR(ds.trajectories[0].dt, 0.01, 1e-12);
}

TEST(Trajectories, ShippedSyntheticFilesMatchGenerator) {
  for (const std::string model : {"sfm", "mdp"}) {
    const auto shipped = read_text_file(kRoot / "data" / (model + "_synthetic.csv"));
    EXPECT_EQ(shipped, trajectories_to_csv(synthetic_dataset(contexts(model)))) << model;
  }
}

TEST(Trajectories, RecordStopsWhenCrossed) {
  const auto cfg = load_scenario({kRoot / "scenarios" / "scenario1.cfg"});
  const auto tr = record_trajectory(cfg, "s", "cross_first");
  EXPECT_LT(tr.samples.back().d_ped, cfg.geometry.crossing_length / 2.0);
  EXPECT_EQ(tr.samples.front().d_ped, cfg.pedestrian.d_ped0);
}

TEST(PatternSearch, QuadraticBowl) {
  const auto r = pattern_search(
      [](std::span<const double> x) {
        return (x[0] - 0.3) * (x[0] - 0.3) + 4.0 * (x[1] + 1.2) * (x[1] + 1.2);
      },
      {2.0, 2.0}, {-3.0, -3.0}, {3.0, 3.0}, serial());
  EXPECT_NEAR(r.x[0], 0.3, 1e-6);
  EXPECT_NEAR(r.x[1], -1.2, 1e-6);
  EXPECT_LE(r.evaluations, serial().max_evaluations + 4);
}

TEST(PatternSearch, RespectsBounds) {
  const auto r = pattern_search([](std::span<const double> x) { return x[0]; }, {0.5}, {0.25},
                                {1.0}, serial());
  EXPECT_EQ(r.x[0], 0.25);
}

TEST(SfmFit, SelfConsistentAtGeneratingParameters) {
  const auto ctx = contexts("sfm");
  const auto ds = load_trajectories(kRoot / "data" / "sfm_synthetic.csv");
  EXPECT_LT(sfm_rss(ds, SfmParams{}, ctx) / ds.sample_count(), 1e-12);
}

TEST(SfmFit, RecoversFromPerturbedInit) {
  const auto ctx = contexts("sfm");
  const auto ds = load_trajectories(kRoot / "data" / "sfm_synthetic.csv");
  const SfmParams truth;
  SfmParams init = truth;
  init.v0 *= 1.2;
  init.tau *= 0.8;
  init.A_veh *= 1.2;
  init.B_veh *= 0.8;
  const auto fit = fit_sfm(ds, init, ctx, {}, serial());
  EXPECT_LT(fit.rss / ds.sample_count(), 1e-6);
  EXPECT_NEAR(fit.params.v0, truth.v0, 0.05 * truth.v0);
  EXPECT_NEAR(fit.params.tau, truth.tau, 0.05 * truth.tau);
  EXPECT_NEAR(fit.params.A_veh, truth.A_veh, 0.05 * truth.A_veh);
  EXPECT_NEAR(fit.params.B_veh, truth.B_veh, 0.05 * truth.B_veh);
}

TEST(SfmFit, ConstantSpeedWithoutVehicleGivesDesiredSpeed) {
  // Vehicle far beyond the crossing: the walker only relaxes toward v0.
  auto base = load_scenario({kRoot / "scenarios" / "calib_sfm_cross_first.cfg"},
                            {"vehicle.d_veh0=100000", "vehicle.v_veh0=0", "pedestrian.v_ped0=1.2"});
  CalibrationContexts ctx{{"cross_first", base}};
  TrajectoryDataset ds;
  Trajectory tr{"walk", "cross_first", 0.1, {}};
  for (int k = 0; k < 40; ++k) tr.samples.push_back({0.1 * k, -6.0 + 0.12 * k, 1.2});
  ds.trajectories.push_back(tr);
  const auto fit = fit_sfm(ds, SfmParams{}, ctx, {}, serial());
  EXPECT_NEAR(fit.params.v0, 1.2, 1e-3);
}

TEST(SfmFit, EmptyDatasetIsRejected) {
  EXPECT_THROW(fit_sfm(TrajectoryDataset{}, SfmParams{}, contexts("sfm")), ContractViolation);
}

TEST(MdpFit, SelfConsistentAtGeneratingParameters) {
  const auto ctx = contexts("mdp");
  const auto ds = load_trajectories(kRoot / "data" / "mdp_synthetic.csv");
  EXPECT_LT(mdp_rss(ds, MdpSpec{}, ctx) / ds.sample_count(), 1e-12);
}

TEST(MdpFit, RecoversBehaviourFromPerturbedInit) {
  const auto ctx = contexts("mdp");
  const auto ds = load_trajectories(kRoot / "data" / "mdp_synthetic.csv");
  MdpSpec init;
  init.goal_reward = 12.0;
  init.collision_penalty = 45.0;
  init.step_cost = 0.09;
  ASSERT_GT(mdp_rss(ds, init, ctx) / ds.sample_count(), 1e-6);  // a different policy to start
  const auto fit = fit_mdp(ds, init, ctx, {}, serial());
  EXPECT_LT(fit.rss / ds.sample_count(), 1e-6);
}

TEST(MdpFit, FittedModelReproducesLabels) {
  const auto ctx = contexts("mdp");
  const auto ds = load_trajectories(kRoot / "data" / "mdp_synthetic.csv");
  const auto fit = fit_mdp(ds, MdpSpec{}, ctx, {}, serial());
  for (const auto& [label, context] : ctx) {
    auto cfg = context;
    cfg.model.mdp = fit.spec;
    cfg.model.solved_mdp = fit.model;
    const auto res = run(cfg);
    const auto order = summarize(res, cfg).crossing_order;
    EXPECT_EQ(order, label == "cross_first" ? "pedestrian_first" : "vehicle_first") << label;
  }
}
