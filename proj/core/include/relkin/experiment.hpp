#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "relkin/kinematics.hpp"
#include "relkin/twr.hpp"

namespace relkin {

enum class SweepKind {
  messages,  // K per link
  sigma_db,  // 10 log10(sigma / 1 m)
  time,      // evaluation instants within the exchange interval
};

const char* to_string(SweepKind kind);
SweepKind sweep_kind_from_string(const std::string& s);

struct ExperimentConfig {
  std::string name = "experiment";
  std::string fixture = "reference";
  SweepKind sweep = SweepKind::messages;
  std::vector<double> values;
  int messages = 100;
  double sigma_m = 0.1;  // std of the pairwise delay noise, metres
  double t_start = -3.0;
  double t_end = 3.0;
  int order = 4;
  int trials = 1000;
  std::uint64_t seed = 1;
  int threads = 1;
  double propagation_speed = kSpeedOfLight;
  /// Use the global WLS solve instead of the equivalent per-link solves.
  bool global_solve = false;

  void validate() const;
};

struct ReportRow {
  double sweep_value = 0.0;
  double time = 0.0;  // marker time actually used (time sweeps); equals sweep_value otherwise
  std::string quantity;
  double rmse = 0.0;
  double rcrb = 0.0;  // NaN when no bound is defined
  int trials = 0;     // successful trials
  int n_fail = 0;
};

struct RmseReport {
  std::string name;
  SweepKind sweep = SweepKind::messages;
  std::vector<ReportRow> rows;
  std::vector<double> wall_seconds;  // per sweep point

  const ReportRow* find(double sweep_value, const std::string& quantity) const;
  std::vector<std::string> quantities() const;
};

/// Monte Carlo over the sweep: simulate -> dynamic ranging -> relative MDS.
/// Trials that raise relkin::Error are counted in n_fail and excluded.
RmseReport run_experiment(const ExperimentConfig& cfg, const TrajectorySet& traj);
RmseReport run_experiment(const ExperimentConfig& cfg);

/// sqrt(mean_n ||est_n - truth||^2).
double rmse_vector(const std::vector<Eigen::VectorXd>& estimates, const Eigen::VectorXd& truth);

/// ||Z P - H (Zhat P)||_F^2 with H the Procrustes rotation.
double aligned_squared_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth);

/// RMSE over trials of aligned_squared_error.
double rmse_matrix_aligned(const std::vector<Eigen::MatrixXd>& estimates,
                           const Eigen::MatrixXd& truth);

struct SuiteConfig {
  std::vector<ExperimentConfig> experiments;
  std::filesystem::path output_dir = "results";
};

/// Three experiments over the reference fixture: K sweep, noise sweep, time grid.
SuiteConfig default_suite();

/// JSON config. Top-level keys are shared defaults (fixture, seed, trials,
/// order, messages, sigma_m, interval, threads, speed, global_solve) plus
/// "output"; "experiments" is a list
/// of {name, sweep, values} objects that may override any shared key.
SuiteConfig parse_suite_config(const std::string& json_text);
SuiteConfig load_suite_config(const std::filesystem::path& path);

/// Applies CLI overrides: trials (when > 0), seed, threads.
void override_suite(SuiteConfig& suite, int trials, std::optional<std::uint64_t> seed,
                    int threads);

/// <name>.csv (sweep_value,quantity,rmse,rcrb,n_fail), <name>.dat (wide
/// plot table) and manifest.json. Throws IoError with the failing path.
void emit_outputs(const SuiteConfig& suite, const std::vector<RmseReport>& reports,
                  const std::filesystem::path& dir);

std::string report_csv(const RmseReport& report);
std::string report_plot_data(const RmseReport& report);

struct InvariantCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Acceptance-style checks that apply to the given reports (K = 100 ratio
/// window, time-grid behaviour). Reports without a matching sweep point are skipped.
std::vector<InvariantCheck> check_invariants(const SuiteConfig& suite,
                                             const std::vector<RmseReport>& reports);

}  // namespace relkin
