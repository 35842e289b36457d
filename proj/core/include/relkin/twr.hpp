#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "relkin/kinematics.hpp"
#include "relkin/pairs.hpp"

namespace relkin {

inline constexpr double kSpeedOfLight = 3e8;

enum class DirectionPolicy { one_way, alternating, custom };

/// Message schedule shared by every pair in the network.
struct ExchangeConfig {
  int messages = 100;
  double t_start = -3.0;
  double t_end = 3.0;
  DirectionPolicy policy = DirectionPolicy::one_way;
  std::vector<int> custom_directions;  // +1 / -1 per message, used when policy == custom
  double propagation_speed = kSpeedOfLight;

  /// Throws ConfigError on K < 1, t_start >= t_end (unless K == 1), or a bad custom vector.
  void validate() const;

  /// +1 (node i transmits) or -1 (node j transmits) for message k.
  int direction(int k) const;
};

/// Per-node timing noise in seconds. Pair variance is sigma_i^2 + sigma_j^2.
struct NoiseModel {
  std::vector<double> node_std_seconds;
  bool pairwise_independent = true;

  static NoiseModel noiseless(int nodes);
  static NoiseModel uniform(int nodes, double std_seconds);
  /// Per-node std chosen so that the pair delay noise has std sigma_m / c.
  static NoiseModel from_pair_sigma_meters(int nodes, double sigma_m,
                                           double propagation_speed = kSpeedOfLight);

  double pair_variance(int i, int j) const;
  bool is_noiseless() const;
};

/// How marker noise enters the simulated data.
enum class NoiseInjection {
  markers,     // perturb both endpoint markers (full model)
  delay_only,  // perturb only the delay, keep node-i markers clean (first-order model)
};

/// Markers recorded for one link. times_i[k] is T_ij,k (node i clock),
/// times_j[k] is T_ji,k (node j clock), direction[k] is E_ij,k.
struct PairExchange {
  NodePair pair;
  Eigen::VectorXd times_i;
  Eigen::VectorXd times_j;
  Eigen::VectorXi direction;

  int messages() const noexcept { return static_cast<int>(times_i.size()); }

  /// e o (t_ji - t_ij), seconds.
  Eigen::VectorXd delays() const;
};

struct TimestampExchangeSet {
  int node_count = 0;
  double propagation_speed = kSpeedOfLight;
  std::vector<PairExchange> links;  // canonical pair order
};

/// K linearly spaced markers over the configured interval, one identical grid per pair.
std::vector<Eigen::VectorXd> generate_timestamps(const ExchangeConfig& cfg, std::size_t n_pairs);

/// Simulates every pair of the network. Node i's marker follows the grid;
/// node j's marker is offset by E * d_ij(T_ij,k) / c, so the noiseless delay
/// equals d_ij(T_ij,k) / c for either direction. Deterministic given seed.
TimestampExchangeSet simulate_exchanges(const TrajectorySet& traj, const ExchangeConfig& cfg,
                                        const NoiseModel& noise, std::uint64_t seed,
                                        NoiseInjection injection = NoiseInjection::markers);

/// Block-diagonal delay covariance bdiag(Sigma_ij I_K) in seconds^2.
struct NoiseCovariance {
  std::vector<double> pair_variances;
  int messages = 0;

  Eigen::MatrixXd dense() const;
  bool is_scaled_identity() const;
};

/// Throws UnsupportedCovarianceError unless the model is pairwise independent.
NoiseCovariance effective_noise_covariance(const NoiseModel& noise, int nodes, int messages);

/// CSV columns: i,j,k,E,T_tx,T_rx with T_tx = T_ij,k and T_rx = T_ji,k.
void write_exchanges_csv(const TimestampExchangeSet& set, std::ostream& out);
void write_exchanges_csv(const TimestampExchangeSet& set, const std::filesystem::path& path);
TimestampExchangeSet read_exchanges_csv(const std::filesystem::path& path,
                                        double propagation_speed = kSpeedOfLight);

}  // namespace relkin
