#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Core>

#include "relkin/kinematics.hpp"
#include "relkin/pairs.hpp"
#include "relkin/twr.hpp"

namespace relkin {

/// Diagonal map f = c [0!, 1!, 2!, ...] between seconds-domain and physical coefficients.
Eigen::VectorXd scale_factors(int order, double propagation_speed);

/// theta_l = c * l! * scaled_l.
Eigen::VectorXd rescale(const Eigen::VectorXd& scaled, double propagation_speed);
/// Inverse of rescale.
Eigen::VectorXd unscale(const Eigen::VectorXd& physical, double propagation_speed);

/// Polynomial range coefficients for every link.
///
/// `scaled` is pairs x order in the delay (seconds) domain, row p holding
/// [r, r', r'', ...] / f for canonical pair p.
struct RangeCoefficients {
  int node_count = 0;
  int order = 0;
  double propagation_speed = kSpeedOfLight;
  std::vector<NodePair> pairs;
  Eigen::MatrixXd scaled;

  /// pairs x order, metres and derivatives thereof.
  Eigen::MatrixXd physical() const;

  /// Order-major stacking [r; r'; r''; ...] of the scaled coefficients.
  Eigen::VectorXd stacked_scaled() const;

  /// R, R', R'' as symmetric matrices; missing orders are zero.
  RangeMatrices range_matrices() const;
};

/// One link's Vandermonde data.
struct PairBlock {
  NodePair pair;
  Eigen::VectorXd times;   // T_ij,k
  Eigen::VectorXd delays;  // tau_ij,k
  double variance = 1.0;   // Sigma_ij
  int order = 1;
};

/// Stacked network system A theta = tau + q with Sigma = bdiag(Sigma_ij I).
///
/// Columns are order-major: the first block of pair_count() columns multiplies
/// the constant terms, the next block the linear terms, and so on.
struct DesignSystem {
  int node_count = 0;
  int order = 0;
  double propagation_speed = kSpeedOfLight;
  std::vector<NodePair> pairs;
  std::vector<Eigen::Index> row_offsets;  // size pairs.size() + 1
  Eigen::MatrixXd design;
  Eigen::VectorXd delays;
  Eigen::VectorXd times;                  // stacked T_ij,k
  std::vector<double> pair_variances;

  std::size_t pair_count() const noexcept { return pairs.size(); }
  Eigen::VectorXd noise_variances() const;
  PairBlock block(std::size_t p) const;
};

/// Throws RankError naming the pair when a link has fewer than `order` distinct markers.
DesignSystem build_design(const TimestampExchangeSet& exchanges, int order,
                          const NoiseCovariance& covariance);

struct SolveOptions {
  /// Solve on t / max|t| and map back; improves conditioning for long spans.
  bool scaled_basis = false;
};

/// Network WLS via Householder QR of Sigma^-1/2 A.
RangeCoefficients wls_solve(const DesignSystem& sys, const SolveOptions& opts = {});

/// WLS for a single link; returns the scaled coefficients.
Eigen::VectorXd pairwise_solve(const PairBlock& block, const SolveOptions& opts = {});

/// Runs pairwise_solve for every link and stacks the results.
RangeCoefficients solve_pairwise(const DesignSystem& sys, const SolveOptions& opts = {});

/// F (A^T Sigma^-1 A)^-1 F in physical units, order-major like the design.
struct ThetaCovariance {
  int order = 0;
  std::size_t pairs = 0;
  Eigen::MatrixXd covariance;

  /// pairs x pairs block for derivative order l (Sigma_r, Sigma_r', ...).
  Eigen::MatrixXd block(int l) const;
  /// sqrt(trace(block(l))): the bound on the RMSE of the whole order-l vector.
  double rcrb(int l) const;
};

ThetaCovariance crb_theta(const DesignSystem& sys);

struct OrderSelection {
  int order = 1;
  RangeCoefficients coefficients;
  std::vector<double> residuals;  // weighted RSS for L = 1..max_order
};

/// Order-recursive fit for L = 1..max_order. Picks the smallest L whose
/// weighted RSS is at the numerical floor or improves by less than
/// `threshold` (relative) when one more term is added.
OrderSelection order_select(const TimestampExchangeSet& exchanges, int max_order,
                            const NoiseCovariance& covariance, double threshold = 0.01);

}  // namespace relkin
