#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "relkin/errors.hpp"
#include "relkin/kinematics.hpp"
#include "relkin/pairs.hpp"
#include "relkin/twr.hpp"

using namespace relkin;

namespace {

TrajectorySet static_triangle() {
  Eigen::MatrixXd x(2, 3);
  x << 0, 30, 0, 0, 0, 40;
  return TrajectorySet(x, Eigen::MatrixXd::Zero(2, 3));
}

ExchangeConfig schedule(int k, double t0 = -3, double t1 = 3) {
  ExchangeConfig cfg;
  cfg.messages = k;
  cfg.t_start = t0;
  cfg.t_end = t1;
  return cfg;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("relkin_test_" + name);
}

}  // namespace

TEST(GenerateTimestamps, LinearGrid) {
  const auto g3 = generate_timestamps(schedule(3), 2);
  ASSERT_EQ(g3.size(), 2u);
  EXPECT_EQ(g3[0], Eigen::Vector3d(-3, 0, 3));
  EXPECT_EQ(g3[1], g3[0]);

  const auto g100 = generate_timestamps(schedule(100), 1)[0];
  ASSERT_EQ(g100.size(), 100);
  EXPECT_EQ(g100(0), -3.0);
  EXPECT_EQ(g100(99), 3.0);
  for (int k = 1; k < 100; ++k) EXPECT_NEAR(g100(k) - g100(k - 1), 6.0 / 99, 1e-14);

  EXPECT_EQ(generate_timestamps(schedule(2, 0, 1), 1)[0], Eigen::Vector2d(0, 1));
}

TEST(ExchangeConfig, Validation) {
  EXPECT_THROW(schedule(0).validate(), ConfigError);
  EXPECT_THROW(schedule(5, 1, 1).validate(), ConfigError);
  EXPECT_THROW(schedule(5, 2, 1).validate(), ConfigError);
  auto cfg = schedule(3);
  cfg.policy = DirectionPolicy::custom;
  cfg.custom_directions = {1, -1};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.custom_directions = {1, 0, 1};
  EXPECT_THROW(cfg.validate(), ConfigError);
  cfg.custom_directions = {1, -1, -1};
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.direction(2), -1);

  cfg.policy = DirectionPolicy::alternating;
  EXPECT_EQ(cfg.direction(0), 1);
  EXPECT_EQ(cfg.direction(1), -1);
}

TEST(SimulateExchanges, StaticNoiselessDelayIsRangeOverC) {
  const auto traj = static_triangle();
  auto cfg = schedule(7);
  cfg.policy = DirectionPolicy::alternating;
  const auto set = simulate_exchanges(traj, cfg, NoiseModel::noiseless(3), 5);
  ASSERT_EQ(set.links.size(), 3u);
  const double expected[] = {30.0, 40.0, 50.0};
  for (std::size_t p = 0; p < 3; ++p) {
    const Eigen::VectorXd tau = set.links[p].delays();
    // Delays are marker differences, so they carry the rounding of t ~ 3 s.
    for (int k = 0; k < 7; ++k) EXPECT_NEAR(tau(k) * kSpeedOfLight, expected[p], 1e-6);
  }
  EXPECT_EQ(set.links[2].pair, (NodePair{1, 2}));
}

TEST(SimulateExchanges, DelaysArePositiveAndFollowTrajectory) {
  const auto traj = TrajectorySet::reference_fixture();
  const auto set = simulate_exchanges(traj, schedule(25), NoiseModel::noiseless(5), 1);
  for (const auto& link : set.links) {
    const Eigen::VectorXd tau = link.delays();
    for (int k = 0; k < link.messages(); ++k) {
      EXPECT_GT(tau(k), 0.0);
      const double t = link.times_i(k);
      const Eigen::MatrixXd z = traj.positions_at(t);
      const double d = (z.col(link.pair.i) - z.col(link.pair.j)).norm();
      EXPECT_NEAR(tau(k) * kSpeedOfLight, d, 1e-9 * d);
    }
  }
}

TEST(SimulateExchanges, CubicTaylorTracksDelayOverInterval) {
  // The cubic Taylor series drifts from the exact range by the quartic
  // remainder, largest at the interval edges.
  const auto traj = TrajectorySet::reference_fixture();
  const auto set = simulate_exchanges(traj, schedule(61), NoiseModel::noiseless(5), 1);
  double worst = 0.0;
  for (const auto& link : set.links) {
    const auto d = range_derivatives(traj.positions().col(link.pair.i),
                                     traj.positions().col(link.pair.j),
                                     traj.velocities().col(link.pair.i),
                                     traj.velocities().col(link.pair.j));
    const Eigen::VectorXd tau = link.delays();
    for (int k = 0; k < link.messages(); ++k) {
      const double t = link.times_i(k);
      const double taylor = d.r + d.rdot * t + d.rddot * t * t / 2 + d.rdddot * t * t * t / 6;
      worst = std::max(worst, std::abs(tau(k) * kSpeedOfLight - taylor) / d.r);
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(SimulateExchanges, DeterministicPerSeed) {
  const auto traj = TrajectorySet::reference_fixture();
  const auto noise = NoiseModel::from_pair_sigma_meters(5, 0.1);
  const auto a = simulate_exchanges(traj, schedule(50), noise, 99);
  const auto b = simulate_exchanges(traj, schedule(50), noise, 99);
  const auto c = simulate_exchanges(traj, schedule(50), noise, 100);
  for (std::size_t p = 0; p < a.links.size(); ++p) {
    EXPECT_EQ(a.links[p].times_i, b.links[p].times_i);
    EXPECT_EQ(a.links[p].times_j, b.links[p].times_j);
  }
  EXPECT_NE(a.links[0].times_j, c.links[0].times_j);
}

TEST(SimulateExchanges, NoiseStatisticsMatchPairVariance) {
  const auto traj = static_triangle();
  NoiseModel noise;
  noise.node_std_seconds = {1e-9, 2e-9, 3e-9};
  const int k = 20000;
  const auto set = simulate_exchanges(traj, schedule(k), noise, 3);
  const double range[] = {30.0, 40.0, 50.0};
  for (std::size_t p = 0; p < 3; ++p) {
    const auto [i, j] = set.links[p].pair;
    const Eigen::VectorXd err = set.links[p].delays().array() - range[p] / kSpeedOfLight;
    const double var = err.squaredNorm() / k;
    const double expected = noise.pair_variance(i, j);
    EXPECT_NEAR(var / expected, 1.0, 0.05) << "pair " << p;
    EXPECT_NEAR(err.mean(), 0.0, 5.0 * std::sqrt(expected / k));
  }
}

TEST(SimulateExchanges, DelayOnlyKeepsNodeIMarkersClean) {
  const auto traj = TrajectorySet::reference_fixture();
  const auto noise = NoiseModel::from_pair_sigma_meters(5, 1.0);
  const auto clean = simulate_exchanges(traj, schedule(10), NoiseModel::noiseless(5), 4);
  const auto full = simulate_exchanges(traj, schedule(10), noise, 4, NoiseInjection::markers);
  const auto first = simulate_exchanges(traj, schedule(10), noise, 4, NoiseInjection::delay_only);
  for (std::size_t p = 0; p < clean.links.size(); ++p) {
    EXPECT_EQ(first.links[p].times_i, clean.links[p].times_i);
    EXPECT_NE(full.links[p].times_i, clean.links[p].times_i);
    // Same draws, so both modes see the same delay perturbation.
    EXPECT_TRUE(first.links[p].delays().isApprox(full.links[p].delays(), 1e-8));
  }
}

TEST(SimulateExchanges, DirectionPolicyLeavesNoiselessDelaysUnchanged) {
  const auto traj = TrajectorySet::reference_fixture();
  auto one_way = schedule(11);
  auto alternating = one_way;
  alternating.policy = DirectionPolicy::alternating;
  const auto a = simulate_exchanges(traj, one_way, NoiseModel::noiseless(5), 0);
  const auto b = simulate_exchanges(traj, alternating, NoiseModel::noiseless(5), 0);
  for (std::size_t p = 0; p < a.links.size(); ++p) {
    EXPECT_EQ(a.links[p].delays(), b.links[p].delays());
    EXPECT_EQ(b.links[p].direction(1), -1);
    EXPECT_LT(b.links[p].times_j(1), b.links[p].times_i(1));
  }
}

TEST(SimulateExchanges, CollisionAndShapeErrors) {
  Eigen::MatrixXd x(2, 2), y(2, 2);
  x << 0, 2, 0, 0;
  y << 1, -1, 0, 0;  // meet at t = 1
  const TrajectorySet head_on(x, y);
  EXPECT_THROW(simulate_exchanges(head_on, schedule(3, -1, 1), NoiseModel::noiseless(2), 0),
               DegenerateGeometryError);
  EXPECT_THROW(simulate_exchanges(head_on, schedule(3), NoiseModel::noiseless(3), 0), ConfigError);
}

TEST(NoiseCovariance, BlockStructure) {
  const auto cov = effective_noise_covariance(NoiseModel::uniform(3, 2.0), 3, 2);
  const Eigen::MatrixXd dense = cov.dense();
  EXPECT_EQ(dense.rows(), 6);
  EXPECT_TRUE(dense.isApprox(8.0 * Eigen::MatrixXd::Identity(6, 6)));
  EXPECT_TRUE(cov.is_scaled_identity());

  NoiseModel two;
  two.node_std_seconds = {1.0, std::sqrt(3.0)};
  EXPECT_NEAR(effective_noise_covariance(two, 2, 4).pair_variances[0], 4.0, 1e-15);

  const auto ref = NoiseModel::from_pair_sigma_meters(5, 0.1);
  const auto rc = effective_noise_covariance(ref, 5, 100);
  ASSERT_EQ(rc.pair_variances.size(), 10u);
  for (double v : rc.pair_variances)
    EXPECT_NEAR(v * kSpeedOfLight * kSpeedOfLight, 0.01, 1e-15);

  NoiseModel broadcast = ref;
  broadcast.pairwise_independent = false;
  EXPECT_THROW(effective_noise_covariance(broadcast, 5, 10), UnsupportedCovarianceError);
  EXPECT_THROW(NoiseModel::uniform(3, -1.0), ConfigError);
}

TEST(ExchangeCsv, RoundTripIsExact) {
  const auto traj = TrajectorySet::reference_fixture();
  auto cfg = schedule(12);
  cfg.policy = DirectionPolicy::alternating;
  const auto set = simulate_exchanges(traj, cfg, NoiseModel::from_pair_sigma_meters(5, 0.3), 8);
  const auto path = temp_file("roundtrip.csv");
  write_exchanges_csv(set, path);
  const auto back = read_exchanges_csv(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back.node_count, 5);
  ASSERT_EQ(back.links.size(), set.links.size());
  for (std::size_t p = 0; p < set.links.size(); ++p) {
    EXPECT_EQ(back.links[p].pair, set.links[p].pair);
    EXPECT_EQ(back.links[p].times_i, set.links[p].times_i);
    EXPECT_EQ(back.links[p].times_j, set.links[p].times_j);
    EXPECT_EQ(back.links[p].direction, set.links[p].direction);
  }
}

TEST(ExchangeCsv, ReversedPairRowsAreCanonicalised) {
  const auto path = temp_file("reversed.csv");
  {
    std::ofstream out(path);
    out << "i,j,k,E,T_tx,T_rx\n"
        << "1,0,0,1,0.25,0.5\n"
        << "1,0,1,-1,1.5,1.0\n";
  }
  const auto set = read_exchanges_csv(path);
  std::filesystem::remove(path);
  ASSERT_EQ(set.links.size(), 1u);
  EXPECT_EQ(set.links[0].pair, (NodePair{0, 1}));
  EXPECT_EQ(set.links[0].direction(0), -1);
  EXPECT_EQ(set.links[0].direction(1), 1);
  EXPECT_DOUBLE_EQ(set.links[0].times_i(0), 0.5);
  EXPECT_DOUBLE_EQ(set.links[0].times_j(0), 0.25);
  EXPECT_DOUBLE_EQ(set.links[0].delays()(0), 0.25);
  EXPECT_DOUBLE_EQ(set.links[0].delays()(1), 0.5);
}

TEST(ExchangeCsv, MalformedInputReportsLocation) {
  const auto path = temp_file("bad.csv");
  {
    std::ofstream out(path);
    out << "i,j,k,E,T_tx,T_rx\n0,1,0,1,abc,0.1\n";
  }
  try {
    read_exchanges_csv(path);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find(":2"), std::string::npos) << e.what();
  }
  std::filesystem::remove(path);
  EXPECT_THROW(read_exchanges_csv(temp_file("missing.csv")), IoError);
}
