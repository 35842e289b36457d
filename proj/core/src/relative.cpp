#include "relkin/relative.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "relkin/errors.hpp"

namespace relkin {

KinematicGrams grams_from_ranges(const RangeMatrices& rm) {
  const int n = rm.count();
  if (rm.rate.rows() != n || rm.accel.rows() != n || rm.range.cols() != n)
    throw ConfigError("grams_from_ranges: inconsistent range matrix sizes");
  const Eigen::MatrixXd p = centering_matrix(n);
  KinematicGrams g;
  g.position = -0.5 * p * rm.range.cwiseProduct(rm.range) * p;
  g.cross = -p * rm.range.cwiseProduct(rm.rate) * p;
  g.velocity =
      -0.5 * p * (rm.range.cwiseProduct(rm.accel) + rm.rate.cwiseProduct(rm.rate)) * p;
  return g;
}

Embedding spectral_embed(const Eigen::MatrixXd& gram, int dim) {
  const auto n = gram.rows();
  if (gram.cols() != n) throw EmbeddingError("spectral_embed: Gram matrix must be square");
  if (dim < 1 || n < dim)
    throw EmbeddingError("spectral_embed: need at least " + std::to_string(dim) + " nodes");

  const Eigen::MatrixXd sym = 0.5 * (gram + gram.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sym);
  if (eig.info() != Eigen::Success) throw EmbeddingError("spectral_embed: eigensolver failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const double top = lambda(n - 1);
  const double magnitude = lambda.cwiseAbs().maxCoeff();
  if (top < 0.0 && -top > 1e-12 * magnitude)
    throw EmbeddingError("spectral_embed: Gram matrix has no nonnegative spectrum to embed");

  Embedding out;
  out.coordinates.resize(dim, n);
  for (int r = 0; r < dim; ++r) {
    const Eigen::Index k = n - 1 - r;
    double l = lambda(k);
    if (l < 0.0) {
      ++out.clamped_eigenvalues;
      l = 0.0;
    }
    out.coordinates.row(r) = std::sqrt(l) * eig.eigenvectors().col(k).transpose();

    Eigen::Index arg = 0;
    out.coordinates.row(r).cwiseAbs().maxCoeff(&arg);
    if (out.coordinates(r, arg) < 0.0) out.coordinates.row(r) *= -1.0;
  }
  return out;
}

Embedding classical_mds(const Eigen::MatrixXd& edm, int dim) {
  const auto n = static_cast<int>(edm.rows());
  if (edm.cols() != n) throw EmbeddingError("classical_mds: EDM must be square");
  const Eigen::MatrixXd p = centering_matrix(n);
  return spectral_embed(-0.5 * p * edm.cwiseProduct(edm) * p, dim);
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Eigen::MatrixXd commutation_matrix(int m, int n) {
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(m * n, m * n);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) k(j + i * n, i + j * m) = 1.0;
  return k;
}

Eigen::MatrixXd rotation_design(const Eigen::MatrixXd& positions,
                                const Eigen::MatrixXd& velocities) {
  if (positions.rows() != velocities.rows() || positions.cols() != velocities.cols())
    throw ConfigError("rotation_design: positions and velocities must have the same shape");
  const auto n = positions.cols();
  const Eigen::MatrixXd base = kron(velocities.transpose(), positions.transpose());
  // (I + J) base, where J swaps row (i + j n) with row (j + i n).
  Eigen::MatrixXd g = base;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g.row(j + i * n) += base.row(i + j * n);
  return g;
}

RotationEstimate estimate_rotation(const Eigen::MatrixXd& positions,
                                   const Eigen::MatrixXd& velocities,
                                   const Eigen::MatrixXd& cross_gram, bool orthogonalize) {
  const auto dim = positions.rows();
  const auto n = positions.cols();
  if (n < dim) throw IllPosedRotationError("estimate_rotation: need at least as many nodes as dimensions");
  if (cross_gram.rows() != n || cross_gram.cols() != n)
    throw ConfigError("estimate_rotation: cross Gram must be N x N");

  const Eigen::MatrixXd g = rotation_design(positions, velocities);
  const Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(cross_gram.data(), n * n);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g);
  if (qr.rank() < dim * dim)
    throw IllPosedRotationError("estimate_rotation: rotation is not identifiable (rank " +
                                std::to_string(qr.rank()) + " < " + std::to_string(dim * dim) + ")");
  const Eigen::VectorXd h = qr.solve(b);

  RotationEstimate est;
  est.rotation = Eigen::Map<const Eigen::MatrixXd>(h.data(), dim, dim);
  est.residual = (g * h - b).norm();
  const double bn = b.norm();
  est.relative_residual = bn > 0.0 ? est.residual / bn : est.residual;
  if (orthogonalize) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(est.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    est.rotation = svd.matrixU() * svd.matrixV().transpose();
    est.orthogonalized = true;
  }
  return est;
}

RelativeSolution solve_relative(const RangeMatrices& rm, const RelativeSolveOptions& opts) {
  const KinematicGrams g = grams_from_ranges(rm);
  const Embedding x = spectral_embed(g.position, opts.dim);
  const Embedding y = spectral_embed(g.velocity, opts.dim);
  const RotationEstimate rot =
      estimate_rotation(x.coordinates, y.coordinates, g.cross, opts.orthogonalize);

  RelativeSolution sol;
  sol.positions = x.coordinates;
  sol.velocities = y.coordinates;
  sol.rotation = rot.rotation;
  sol.rotation_residual = rot.relative_residual;
  sol.clamped_eigenvalues = x.clamped_eigenvalues + y.clamped_eigenvalues;
  sol.orthogonalized = rot.orthogonalized;
  return sol;
}

Eigen::MatrixXd position_at_time(const RelativeSolution& sol, double dt) {
  return sol.positions + dt * sol.rotation * sol.velocities;
}

ProcrustesResult procrustes_align(const Eigen::MatrixXd& reference,
                                  const Eigen::MatrixXd& estimate) {
  if (reference.rows() != estimate.rows() || reference.cols() != estimate.cols())
    throw ConfigError("procrustes_align: shapes differ");
  const Eigen::MatrixXd m = estimate * reference.transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  ProcrustesResult out;
  out.rotation = svd.matrixV() * svd.matrixU().transpose();
  out.aligned = out.rotation * estimate;
  out.residual = (reference - out.aligned).norm();
  return out;
}

Eigen::MatrixXd center_columns(const Eigen::MatrixXd& z) {
  return z.colwise() - z.rowwise().mean();
}

}  // namespace relkin
