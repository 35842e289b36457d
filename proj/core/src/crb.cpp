#include "relkin/crb.hpp"

#include <string>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "relkin/errors.hpp"
#include "relkin/pairs.hpp"

namespace relkin {

namespace {

Eigen::VectorXd symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (m + m.transpose()),
                                                     Eigen::EigenvaluesOnly);
  return eig.eigenvalues();
}

// J^T S^-1 J for S = bdiag(block, block) (doubled) or S = block (unique),
// with the doubled Jacobian being [J; J].
FisherInfo assemble(const Eigen::MatrixXd& jacobian, Eigen::MatrixXd noise, int dim, int nodes,
                    const FimOptions& opts) {
  FisherInfo fim;
  fim.dim = dim;
  fim.structural_deficiency = dim * (dim + 1) / 2;

  Eigen::MatrixXd j = jacobian;
  if (opts.counting == PairCounting::doubled) {
    const auto m = jacobian.rows();
    j.resize(2 * m, jacobian.cols());
    j << jacobian, jacobian;
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    s.topLeftCorner(m, m) = noise;
    s.bottomRightCorner(m, m) = noise;
    noise = std::move(s);
  }

  Eigen::LLT<Eigen::MatrixXd> llt(noise);
  if (llt.info() != Eigen::Success) {
    double mean = noise.trace() / static_cast<double>(noise.rows());
    if (!(mean > 0.0)) mean = 1.0;
    noise += opts.ridge * mean * Eigen::MatrixXd::Identity(noise.rows(), noise.cols());
    llt.compute(noise);
    fim.regularized = true;
    if (llt.info() != Eigen::Success)
      throw Error("fisher information: noise covariance is not positive semidefinite");
  }
  fim.matrix = j.transpose() * llt.solve(j);
  fim.matrix = 0.5 * (fim.matrix + fim.matrix.transpose());
  fim.degenerate = fim.rank() < nodes * dim - fim.structural_deficiency;
  return fim;
}

Eigen::VectorXd pair_values(const Eigen::MatrixXd& m, const std::vector<NodePair>& pairs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t p = 0; p < pairs.size(); ++p) v(static_cast<Eigen::Index>(p)) = m(pairs[p].i, pairs[p].j);
  return v;
}

}  // namespace

int FisherInfo::rank(double rel_threshold) const {
  if (matrix.size() == 0) return 0;
  const Eigen::VectorXd lambda = symmetric_eigenvalues(matrix);
  const double top = lambda.maxCoeff();
  if (!(top > 0.0)) return 0;
  return static_cast<int>((lambda.array() > rel_threshold * top).count());
}

int FisherInfo::null_count(double rel_threshold) const {
  return static_cast<int>(matrix.rows()) - rank(rel_threshold);
}

RangeNoiseCovariances range_noise_covariances(const ThetaCovariance& theta) {
  if (theta.order < 3)
    throw ConfigError("range_noise_covariances: need at least three range coefficients");
  return {theta.block(0), theta.block(1), theta.block(2)};
}

FisherInfo fim_position(const Eigen::MatrixXd& positions, const Eigen::MatrixXd& range_cov,
                        const FimOptions& opts) {
  const int dim = static_cast<int>(positions.rows());
  const int n = static_cast<int>(positions.cols());
  const auto pairs = canonical_pairs(n);
  const auto m = static_cast<Eigen::Index>(pairs.size());
  if (range_cov.rows() != m || range_cov.cols() != m)
    throw ConfigError("fim_position: range covariance must be pairs x pairs");

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, n * dim);
  for (Eigen::Index p = 0; p < m; ++p) {
    const auto [j, k] = pairs[static_cast<std::size_t>(p)];
    const Eigen::VectorXd diff = positions.col(j) - positions.col(k);
    const double d = diff.norm();
    if (d == 0.0)
      throw DegenerateGeometryError("fim_position: coincident nodes (" + std::to_string(j) + "," +
                                        std::to_string(k) + ")",
                                    std::pair{j, k});
    jac.block(p, j * dim, 1, dim) = diff.transpose() / d;
    jac.block(p, k * dim, 1, dim) = -diff.transpose() / d;
  }
  return assemble(jac, range_cov, dim, n, opts);
}

FisherInfo fim_velocity(const Eigen::MatrixXd& velocities, const RangeMatrices& rm,
                        const RangeNoiseCovariances& covs, const FimOptions& opts) {
  const int dim = static_cast<int>(velocities.rows());
  const int n = static_cast<int>(velocities.cols());
  if (rm.count() != n) throw ConfigError("fim_velocity: range matrices do not match node count");
  const auto pairs = canonical_pairs(n);
  const auto m = static_cast<Eigen::Index>(pairs.size());
  if (covs.range.rows() != m || covs.rate.rows() != m || covs.accel.rows() != m)
    throw ConfigError("fim_velocity: covariance blocks must be pairs x pairs");

  const Eigen::VectorXd r = pair_values(rm.range, pairs);
  for (Eigen::Index p = 0; p < m; ++p)
    if (r(p) == 0.0)
      throw DegenerateGeometryError("fim_velocity: zero range",
                                    std::pair{pairs[static_cast<std::size_t>(p)].i,
                                              pairs[static_cast<std::size_t>(p)].j});
  const Eigen::VectorXd rdot = pair_values(rm.rate, pairs);
  const Eigen::VectorXd rddot = pair_values(rm.accel, pairs);
  const Eigen::MatrixXd& middle =
      opts.velocity_noise == VelocityNoiseForm::rate ? covs.rate : covs.accel;
  const Eigen::MatrixXd noise = r.asDiagonal() * covs.accel * r.asDiagonal() +
                                rddot.asDiagonal() * covs.range * rddot.asDiagonal() +
                                4.0 * (rdot.asDiagonal() * middle * rdot.asDiagonal());

  Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, n * dim);
  for (Eigen::Index p = 0; p < m; ++p) {
    const auto [j, k] = pairs[static_cast<std::size_t>(p)];
    const Eigen::VectorXd diff = velocities.col(j) - velocities.col(k);
    jac.block(p, j * dim, 1, dim) = 2.0 * diff.transpose();
    jac.block(p, k * dim, 1, dim) = -2.0 * diff.transpose();
  }
  return assemble(jac, noise, dim, n, opts);
}

double crb_trace(const FisherInfo& fim, double rel_threshold) {
  if (fim.matrix.size() == 0) return 0.0;
  const Eigen::VectorXd lambda = symmetric_eigenvalues(fim.matrix);
  const double top = lambda.maxCoeff();
  if (!(top > 0.0)) return 0.0;
  double trace = 0.0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k)
    if (lambda(k) > rel_threshold * top) trace += 1.0 / lambda(k);
  return trace;
}

}  // namespace relkin
