#pragma once

#include <Eigen/Core>

namespace relkin {

/// Ground-truth node states under linear motion, anchored at t0 = 0.
///
/// Columns are nodes, rows are spatial dimensions. Position at time t is
/// positions() + t * velocities(). Construction rejects mismatched shapes,
/// N < P, and coincident initial positions.
class TrajectorySet {
 public:
  TrajectorySet(Eigen::MatrixXd positions, Eigen::MatrixXd velocities);

  int dim() const noexcept { return static_cast<int>(positions_.rows()); }
  int count() const noexcept { return static_cast<int>(positions_.cols()); }

  const Eigen::MatrixXd& positions() const noexcept { return positions_; }
  const Eigen::MatrixXd& velocities() const noexcept { return velocities_; }

  Eigen::MatrixXd positions_at(double t) const { return positions_ + t * velocities_; }

  /// The five-node planar scenario used throughout the simulation study.
  static TrajectorySet reference_fixture();

 private:
  Eigen::MatrixXd positions_;
  Eigen::MatrixXd velocities_;
};

/// Distance r and its first three time derivatives at t0.
struct RangeDerivatives {
  double r = 0.0;
  double rdot = 0.0;
  double rddot = 0.0;
  double rdddot = 0.0;
};

/// Exact range derivatives for one pair under constant velocities.
/// Throws DegenerateGeometryError when x_i == x_j.
RangeDerivatives range_derivatives(const Eigen::Ref<const Eigen::VectorXd>& x_i,
                                   const Eigen::Ref<const Eigen::VectorXd>& x_j,
                                   const Eigen::Ref<const Eigen::VectorXd>& y_i,
                                   const Eigen::Ref<const Eigen::VectorXd>& y_j);

/// Symmetric N x N matrices of ranges, range rates and range accelerations.
struct RangeMatrices {
  Eigen::MatrixXd range;
  Eigen::MatrixXd rate;
  Eigen::MatrixXd accel;

  int count() const noexcept { return static_cast<int>(range.rows()); }
};

RangeMatrices range_matrices(const TrajectorySet& traj);

/// Pairwise distances of the configuration at time t.
Eigen::MatrixXd edm_at_time(const TrajectorySet& traj, double t);

/// I - 11^T / n.
Eigen::MatrixXd centering_matrix(int n);

/// Third time derivative of the doubly-centred squared EDM,
/// -0.5 P (R o R''' + 3 R' o R'') P, with R''' = -3 R^-1 o R' o R''.
/// Vanishes for any linear-motion configuration.
Eigen::MatrixXd third_derivative_gram_check(const RangeMatrices& rm);

}  // namespace relkin
