#pragma once

#include <Eigen/Core>

#include "relkin/kinematics.hpp"
#include "relkin/ranging.hpp"

namespace relkin {

/// Fisher information for a stacked configuration vec(Z), Z being dim x N.
struct FisherInfo {
  Eigen::MatrixXd matrix;
  int dim = 0;
  /// Translation plus rotation freedom: dim (dim + 1) / 2, i.e. 3 in the plane.
  int structural_deficiency = 0;
  /// Noise covariance was not positive definite and a ridge was added.
  bool regularized = false;
  /// Rank fell below N*dim - structural_deficiency (e.g. identical velocities).
  bool degenerate = false;

  /// Eigenvalues below rel_threshold * lambda_max are treated as zero.
  int rank(double rel_threshold = 1e-10) const;
  int null_count(double rel_threshold = 1e-10) const;
};

/// How many rows each unordered link contributes to the measurement vector.
enum class PairCounting {
  doubled,  // both (i,j) and (j,i): 2 * pairs rows, noise bdiag(S, S)
  unique,   // one row per link
};

/// Which covariance multiplies the range-rate term in the velocity model.
enum class VelocityNoiseForm {
  rate,          // 4 R' Sigma_r' R' (consistent with the first-order noise expansion)
  accel,         // 4 R' Sigma_r'' R'
};

/// Sigma_r, Sigma_r', Sigma_r'' blocks, each pairs x pairs.
struct RangeNoiseCovariances {
  Eigen::MatrixXd range;
  Eigen::MatrixXd rate;
  Eigen::MatrixXd accel;
};

RangeNoiseCovariances range_noise_covariances(const ThetaCovariance& theta);

struct FimOptions {
  PairCounting counting = PairCounting::doubled;
  VelocityNoiseForm velocity_noise = VelocityNoiseForm::rate;
  /// Ridge, relative to mean diagonal, added when the noise covariance is singular.
  double ridge = 1e-12;
};

/// J^T Sigma_eta^-1 J for distance measurements with Jacobian rows
/// d_jk^-1 (x_j - x_k)^T at node j and the negative at node k.
/// Throws DegenerateGeometryError on coincident nodes.
FisherInfo fim_position(const Eigen::MatrixXd& positions, const Eigen::MatrixXd& range_cov,
                        const FimOptions& opts = {});

/// Same construction for squared velocity differences |y_j - y_k|^2 with
/// Jacobian 2 (y_j - y_k)^T and noise covariance
/// diag(r) S_r'' diag(r) + diag(r'') S_r diag(r'') + 4 diag(r') S diag(r').
FisherInfo fim_velocity(const Eigen::MatrixXd& velocities, const RangeMatrices& rm,
                        const RangeNoiseCovariances& covs, const FimOptions& opts = {});

/// trace(F^+), discarding eigenvalues below rel_threshold * lambda_max.
double crb_trace(const FisherInfo& fim, double rel_threshold = 1e-10);

}  // namespace relkin
