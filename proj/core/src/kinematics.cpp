#include "relkin/kinematics.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "relkin/errors.hpp"

namespace relkin {

namespace {

std::string pair_label(int i, int j) {
  return "(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

}  // namespace

TrajectorySet::TrajectorySet(Eigen::MatrixXd positions, Eigen::MatrixXd velocities)
    : positions_(std::move(positions)), velocities_(std::move(velocities)) {
  if (positions_.rows() < 1 || positions_.cols() < 1)
    throw ConfigError("TrajectorySet: empty configuration");
  if (positions_.rows() != velocities_.rows() || positions_.cols() != velocities_.cols())
    throw ConfigError("TrajectorySet: positions and velocities must have the same shape");
  if (positions_.cols() < positions_.rows())
    throw ConfigError("TrajectorySet: need at least as many nodes as dimensions");
  if (!positions_.allFinite() || !velocities_.allFinite())
    throw ConfigError("TrajectorySet: non-finite entries");
  for (int i = 0; i < count(); ++i)
    for (int j = i + 1; j < count(); ++j)
      if ((positions_.col(i) - positions_.col(j)).norm() == 0.0)
        throw DegenerateGeometryError("TrajectorySet: coincident nodes " + pair_label(i, j),
                                      std::pair{i, j});
}

TrajectorySet TrajectorySet::reference_fixture() {
  Eigen::MatrixXd x(2, 5);
  Eigen::MatrixXd y(2, 5);
  x << -382, 735, 959, 630, 800,
          9,   7, 727, 366, -858;
  y << -6,  8, -1, -10,  3,
        8, -9, -7,  -2, -8;
  return TrajectorySet(std::move(x), std::move(y));
}

RangeDerivatives range_derivatives(const Eigen::Ref<const Eigen::VectorXd>& x_i,
                                   const Eigen::Ref<const Eigen::VectorXd>& x_j,
                                   const Eigen::Ref<const Eigen::VectorXd>& y_i,
                                   const Eigen::Ref<const Eigen::VectorXd>& y_j) {
  const Eigen::VectorXd dx = x_i - x_j;
  const Eigen::VectorXd dy = y_i - y_j;
  const double r = dx.norm();
  if (r == 0.0) throw DegenerateGeometryError("range_derivatives: coincident positions");

  RangeDerivatives d;
  d.r = r;
  d.rdot = dx.dot(dy) / r;
  d.rddot = (dy.squaredNorm() - d.rdot * d.rdot) / r;
  d.rdddot = -3.0 * d.rdot * d.rddot / r;
  return d;
}

RangeMatrices range_matrices(const TrajectorySet& traj) {
  const int n = traj.count();
  RangeMatrices rm;
  rm.range = Eigen::MatrixXd::Zero(n, n);
  rm.rate = Eigen::MatrixXd::Zero(n, n);
  rm.accel = Eigen::MatrixXd::Zero(n, n);
  const auto& x = traj.positions();
  const auto& y = traj.velocities();
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      RangeDerivatives d;
      try {
        d = range_derivatives(x.col(i), x.col(j), y.col(i), y.col(j));
      } catch (const DegenerateGeometryError&) {
        throw DegenerateGeometryError("range_matrices: coincident nodes " + pair_label(i, j),
                                      std::pair{i, j});
      }
      rm.range(i, j) = rm.range(j, i) = d.r;
      rm.rate(i, j) = rm.rate(j, i) = d.rdot;
      rm.accel(i, j) = rm.accel(j, i) = d.rddot;
    }
  }
  return rm;
}

Eigen::MatrixXd edm_at_time(const TrajectorySet& traj, double t) {
  const Eigen::MatrixXd xt = traj.positions_at(t);
  const int n = traj.count();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) d(i, j) = d(j, i) = (xt.col(i) - xt.col(j)).norm();
  return d;
}

Eigen::MatrixXd centering_matrix(int n) {
  return Eigen::MatrixXd::Identity(n, n) -
         Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
}

Eigen::MatrixXd third_derivative_gram_check(const RangeMatrices& rm) {
  const int n = rm.count();
  Eigen::MatrixXd jerk = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const double r = rm.range(i, j);
      if (r == 0.0)
        throw DegenerateGeometryError("third_derivative_gram_check: zero range " + pair_label(i, j),
                                      std::pair{std::min(i, j), std::max(i, j)});
      jerk(i, j) = -3.0 * rm.rate(i, j) * rm.accel(i, j) / r;
    }
  }
  const Eigen::MatrixXd p = centering_matrix(n);
  const Eigen::MatrixXd inner =
      rm.range.cwiseProduct(jerk) + 3.0 * rm.rate.cwiseProduct(rm.accel);
  return -0.5 * p * inner * p;
}

}  // namespace relkin
