#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "relkin/errors.hpp"
#include "relkin/experiment.hpp"
#include "relkin/relative.hpp"

using namespace relkin;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("relkin_exp_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

ExperimentConfig small(SweepKind sweep, std::vector<double> values, int trials = 20) {
  ExperimentConfig cfg;
  cfg.name = "small";
  cfg.sweep = sweep;
  cfg.values = std::move(values);
  cfg.trials = trials;
  cfg.seed = 42;
  return cfg;
}

}  // namespace

TEST(RmseVector, Examples) {
  const Eigen::Vector2d z(1, 2);
  EXPECT_EQ(rmse_vector({z, z, z}, z), 0.0);
  EXPECT_DOUBLE_EQ(rmse_vector({Eigen::Vector2d(4, 6)}, z), 5.0);
  EXPECT_THROW(rmse_vector({}, z), ConfigError);
}

TEST(RmseVector, UnitGaussianErrors) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<Eigen::VectorXd> est;
  for (int n = 0; n < 10000; ++n) est.push_back(Eigen::VectorXd::Constant(1, g(rng)));
  const double r = rmse_vector(est, Eigen::VectorXd::Zero(1));
  EXPECT_GE(r, 0.97);
  EXPECT_LE(r, 1.03);
}

TEST(RmseMatrixAligned, RemovesRotationAndOffset) {
  const auto traj = TrajectorySet::reference_fixture();
  const Eigen::MatrixXd z = traj.positions();
  std::mt19937_64 rng(2);
  std::vector<Eigen::MatrixXd> rotated, shifted;
  for (int n = 0; n < 10; ++n) {
    rotated.push_back(oracles::random_orthogonal(rng, 2) * center_columns(z));
    shifted.push_back(center_columns(z).colwise() + Eigen::Vector2d(5.0 * n, -3.0));
  }
  EXPECT_LT(rmse_matrix_aligned(rotated, z), 1e-10);
  EXPECT_LT(rmse_matrix_aligned(shifted, z), 1e-10);

  std::normal_distribution<double> g;
  for (int n = 0; n < 20; ++n) {
    Eigen::MatrixXd e(2, 5);
    for (int i = 0; i < 10; ++i) e(i) = g(rng);
    EXPECT_LE(rmse_matrix_aligned({z + e}, z), e.norm() + 1e-9);
  }
}

TEST(ExperimentConfig, Validation) {
  EXPECT_THROW(small(SweepKind::messages, {}).validate(), ConfigError);
  auto cfg = small(SweepKind::messages, {10});
  cfg.trials = 0;
  EXPECT_THROW(cfg.validate(), ConfigError);
  EXPECT_THROW(small(SweepKind::messages, {3}).validate(), ConfigError);
  EXPECT_THROW(small(SweepKind::messages, {10.5}).validate(), ConfigError);
  EXPECT_THROW(small(SweepKind::time, {4.0}).validate(), ConfigError);
  EXPECT_NO_THROW(small(SweepKind::sigma_db, {-10, 0}).validate());
}

TEST(RunExperiment, NoiselessPipelineIsTight) {
  auto cfg = small(SweepKind::messages, {100}, 1);
  cfg.sigma_m = 0.0;
  const auto report = run_experiment(cfg);
  ASSERT_EQ(report.rows.size(), 6u);
  for (const auto& row : report.rows) {
    EXPECT_EQ(row.n_fail, 0);
    EXPECT_GE(row.rmse, 0.0);
    // Only Taylor truncation remains.
    if (row.quantity == "r" || row.quantity == "rdot" || row.quantity == "x_rel" ||
        row.quantity == "h_y")
      EXPECT_LT(row.rmse, 1e-2) << row.quantity;
  }
  EXPECT_EQ(report.find(100, "r")->rcrb, 0.0);
  EXPECT_TRUE(std::isnan(report.find(100, "h_y")->rcrb));
}

TEST(RunExperiment, SerialAndThreadedRunsAgreeExactly) {
  auto cfg = small(SweepKind::messages, {20, 60}, 24);
  const auto serial = run_experiment(cfg);
  cfg.threads = 4;
  const auto threaded = run_experiment(cfg);
  EXPECT_EQ(report_csv(serial), report_csv(threaded));
  cfg.seed = 43;
  EXPECT_NE(report_csv(serial), report_csv(run_experiment(cfg)));
}

TEST(RunExperiment, MessageSweepTracksBound) {
  auto cfg = small(SweepKind::messages, {10, 40, 100}, 200);
  const auto report = run_experiment(cfg);
  for (const std::string q : {"r", "rdot", "rddot"}) {
    double prev = INFINITY;
    for (double k : {10.0, 40.0, 100.0}) {
      const auto* row = report.find(k, q);
      ASSERT_NE(row, nullptr);
      EXPECT_LT(row->rmse, prev) << q << " K=" << k;
      EXPECT_NEAR(row->rmse / row->rcrb, 1.0, 0.25) << q << " K=" << k;
      prev = row->rmse;
    }
  }
}

TEST(RunExperiment, SigmaSweepUsesDecibelMetres) {
  const auto report = run_experiment(small(SweepKind::sigma_db, {-10, 0}, 50));
  const double low = report.find(-10, "r")->rcrb;
  const double high = report.find(0, "r")->rcrb;
  EXPECT_NEAR(high / low, 10.0, 1e-9);
}

TEST(RunExperiment, TimeSweepSnapsToMarkers) {
  auto cfg = small(SweepKind::time, {-3, 0, 3}, 30);
  const auto report = run_experiment(cfg);
  EXPECT_EQ(report.quantities(), (std::vector<std::string>{"x_dr", "x_cmds"}));
  EXPECT_DOUBLE_EQ(report.find(-3, "x_dr")->time, -3.0);
  EXPECT_NEAR(report.find(0, "x_dr")->time, 3.0 / 99.0, 1e-12);
  EXPECT_LT(report.find(0, "x_dr")->rmse, report.find(0, "x_cmds")->rmse);
  EXPECT_GT(report.find(3, "x_dr")->rmse, report.find(0, "x_dr")->rmse);
}

TEST(RunExperiment, TooFewMessagesForOrderIsRejected) {
  // Three messages cannot support four coefficients.
  auto cfg = small(SweepKind::sigma_db, {0}, 2);
  cfg.messages = 3;
  EXPECT_THROW(run_experiment(cfg), ConfigError);
}

TEST(SuiteConfig, ParseDefaultsAndOverrides) {
  const auto suite = parse_suite_config(R"({
    "seed": 7, "trials": 12, "interval": [-2, 2], "output": "out_dir",
    "experiments": [
      {"name": "k", "sweep": "K", "values": [10, 20]},
      {"name": "s", "sweep": "sigma_dB_m", "values": [-10], "trials": 3, "global_solve": true},
      {"name": "t", "sweep": "time_grid", "values": [0, 1]}
    ]})");
  ASSERT_EQ(suite.experiments.size(), 3u);
  EXPECT_EQ(suite.output_dir, "out_dir");
  EXPECT_EQ(suite.experiments[0].seed, 7u);
  EXPECT_EQ(suite.experiments[0].trials, 12);
  EXPECT_EQ(suite.experiments[0].t_start, -2.0);
  EXPECT_EQ(suite.experiments[1].trials, 3);
  EXPECT_TRUE(suite.experiments[1].global_solve);
  EXPECT_EQ(suite.experiments[1].sweep, SweepKind::sigma_db);
  EXPECT_EQ(suite.experiments[2].sweep, SweepKind::time);

  auto copy = suite;
  override_suite(copy, 200, 99u, 2);
  for (const auto& e : copy.experiments) {
    EXPECT_EQ(e.trials, 200);
    EXPECT_EQ(e.seed, 99u);
    EXPECT_EQ(e.threads, 2);
  }
}

TEST(SuiteConfig, RejectsBadInput) {
  EXPECT_THROW(parse_suite_config("not json"), ConfigError);
  EXPECT_THROW(parse_suite_config(R"({"experiments": []})"), ConfigError);
  EXPECT_THROW(parse_suite_config(R"({"experiments": [{"name":"a","sweep":"K","values":[]}]})"),
               ConfigError);
  EXPECT_THROW(parse_suite_config(R"({"bogus": 1, "experiments": [{"sweep":"K","values":[10]}]})"),
               ConfigError);
  EXPECT_THROW(parse_suite_config(R"({"experiments": [{"sweep":"nope","values":[10]}]})"),
               ConfigError);
  EXPECT_THROW(parse_suite_config(
                   R"({"experiments": [{"name":"a","sweep":"K","values":[10]},{"name":"a","sweep":"K","values":[20]}]})"),
               ConfigError);
  EXPECT_THROW(load_suite_config("/nonexistent/suite.json"), IoError);
}

TEST(EmitOutputs, DefaultSuiteFilesAndDeterminism) {
  auto suite = default_suite();
  ASSERT_EQ(suite.experiments.size(), 3u);
  override_suite(suite, 5, std::nullopt, 0);
  std::vector<RmseReport> reports;
  for (const auto& e : suite.experiments) reports.push_back(run_experiment(e));

  const auto a = fresh_dir("a");
  const auto b = fresh_dir("b");
  emit_outputs(suite, reports, a);
  std::vector<RmseReport> again;
  for (const auto& e : suite.experiments) again.push_back(run_experiment(e));
  emit_outputs(suite, again, b);

  for (const auto& e : suite.experiments) {
    ASSERT_TRUE(std::filesystem::exists(a / (e.name + ".csv")));
    ASSERT_TRUE(std::filesystem::exists(a / (e.name + ".dat")));
    EXPECT_EQ(slurp(a / (e.name + ".csv")), slurp(b / (e.name + ".csv")));
  }
  ASSERT_TRUE(std::filesystem::exists(a / "manifest.json"));
  const std::string manifest = slurp(a / "manifest.json");
  EXPECT_NE(manifest.find("\"seed\""), std::string::npos);
  EXPECT_NE(manifest.find("rmse_vs_time"), std::string::npos);
  const std::string csv = slurp(a / "rmse_vs_messages.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sweep_value,quantity,rmse,rcrb,n_fail");
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST(EmitOutputs, UnwritableDirectoryNamesThePath) {
  RmseReport r;
  r.name = "x";
  try {
    emit_outputs({}, {r}, "/proc/relkin_cannot_write_here");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("/proc/relkin_cannot_write_here"), std::string::npos);
  }
}

TEST(CheckInvariants, FlagsRatiosOutsideTheWindow) {
  SuiteConfig suite;
  suite.experiments.push_back(small(SweepKind::messages, {100}));
  RmseReport r;
  r.name = "small";
  r.sweep = SweepKind::messages;
  for (const std::string q : {"r", "rdot", "rddot"}) {
    ReportRow row;
    row.sweep_value = 100;
    row.quantity = q;
    row.rcrb = 1.0;
    row.rmse = q == "rdot" ? 1.3 : 1.0;
    r.rows.push_back(row);
  }
  const auto checks = check_invariants(suite, {r});
  ASSERT_EQ(checks.size(), 3u);
  EXPECT_TRUE(checks[0].passed);
  EXPECT_FALSE(checks[1].passed);
  EXPECT_TRUE(checks[2].passed);
}
