#pragma once

#include <Eigen/Core>

#include "relkin/kinematics.hpp"

namespace relkin {

/// Doubly-centred kinematic Gram matrices.
///   position = -0.5 P (R o R) P          = X^T X
///   cross    = -P (R o R') P             = X^T H Y + Y^T H^T X
///   velocity = -0.5 P (R o R'' + R' o R') P = Y^T Y
struct KinematicGrams {
  Eigen::MatrixXd position;
  Eigen::MatrixXd cross;
  Eigen::MatrixXd velocity;
};

KinematicGrams grams_from_ranges(const RangeMatrices& rm);

struct Embedding {
  Eigen::MatrixXd coordinates;  // dim x N, centred
  int clamped_eigenvalues = 0;  // negative eigenvalues among the top `dim` set to zero
};

/// Rank-`dim` factor L^{1/2} U^T from the `dim` algebraically largest
/// eigenpairs. Each row is sign-normalised so its largest-magnitude entry is
/// positive. Throws EmbeddingError if N < dim or the top eigenvalue is negative.
Embedding spectral_embed(const Eigen::MatrixXd& gram, int dim);

/// -0.5 P (D o D) P followed by spectral_embed.
Embedding classical_mds(const Eigen::MatrixXd& edm, int dim);

/// Kronecker product a (x) b.
Eigen::MatrixXd kron(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Commutation matrix K with K vec(M) = vec(M^T) for an m x n matrix M.
Eigen::MatrixXd commutation_matrix(int m, int n);

/// G = (I + J)(Y^T (x) X^T), so that G vec(H) = vec(X^T H Y + Y^T H^T X).
Eigen::MatrixXd rotation_design(const Eigen::MatrixXd& positions,
                                const Eigen::MatrixXd& velocities);

struct RotationEstimate {
  Eigen::MatrixXd rotation;
  double residual = 0.0;           // ||G vec(H) - vec(B_xy)||
  double relative_residual = 0.0;  // residual / ||vec(B_xy)||
  bool orthogonalized = false;
};

/// Unconstrained least-squares fit of H to the cross Gram. With
/// `orthogonalize`, the LS solution is replaced by its polar factor.
/// Throws IllPosedRotationError if G is rank deficient.
RotationEstimate estimate_rotation(const Eigen::MatrixXd& positions,
                                   const Eigen::MatrixXd& velocities,
                                   const Eigen::MatrixXd& cross_gram, bool orthogonalize = false);

/// Relative positions, relative velocities and the rotation tying their
/// frames. Translations are fixed to zero and the position frame is the
/// reference, so positions are only meaningful up to a common translation.
struct RelativeSolution {
  Eigen::MatrixXd positions;
  Eigen::MatrixXd velocities;
  Eigen::MatrixXd rotation;
  double rotation_residual = 0.0;
  int clamped_eigenvalues = 0;
  bool orthogonalized = false;
};

struct RelativeSolveOptions {
  int dim = 2;
  bool orthogonalize = false;
};

/// Grams -> embeddings -> rotation.
RelativeSolution solve_relative(const RangeMatrices& rm, const RelativeSolveOptions& opts = {});

/// X + dt * H * Y.
Eigen::MatrixXd position_at_time(const RelativeSolution& sol, double dt);

struct ProcrustesResult {
  Eigen::MatrixXd rotation;  // orthogonal, reflections allowed
  Eigen::MatrixXd aligned;   // rotation * estimate
  double residual = 0.0;     // ||reference - aligned||_F
};

/// Orthogonal H minimising ||reference - H estimate||_F, from the SVD of
/// estimate * reference^T = U S V^T as H = V U^T.
ProcrustesResult procrustes_align(const Eigen::MatrixXd& reference,
                                  const Eigen::MatrixXd& estimate);

/// Columns minus their mean.
Eigen::MatrixXd center_columns(const Eigen::MatrixXd& z);

}  // namespace relkin
