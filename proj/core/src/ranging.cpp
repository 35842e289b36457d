#include "relkin/ranging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include <Eigen/QR>

#include "relkin/errors.hpp"

namespace relkin {

namespace {

std::string pair_label(const NodePair& p) {
  return "(" + std::to_string(p.i) + "," + std::to_string(p.j) + ")";
}

double factorial(int l) {
  double f = 1.0;
  for (int k = 2; k <= l; ++k) f *= k;
  return f;
}

// Row weights Sigma^-1/2. An all-zero covariance (noiseless data) falls back
// to unit weights: the WLS estimate does not depend on a common scale.
Eigen::VectorXd row_weights(const DesignSystem& sys) {
  const Eigen::VectorXd var = sys.noise_variances();
  if (var.size() > 0 && (var.array() == 0.0).all()) return Eigen::VectorXd::Ones(var.size());
  if ((var.array() <= 0.0).any())
    throw ConfigError("noise covariance must be positive definite (or identically zero)");
  return var.cwiseSqrt().cwiseInverse();
}

Eigen::MatrixXd vandermonde(const Eigen::VectorXd& t, int order) {
  Eigen::MatrixXd a(t.size(), order);
  if (order > 0) a.col(0).setOnes();
  for (int l = 1; l < order; ++l) a.col(l) = a.col(l - 1).cwiseProduct(t);
  return a;
}

// Design rebuilt on times / scale; column block l is divided by scale^l.
Eigen::MatrixXd scaled_design(const DesignSystem& sys, double scale) {
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(sys.design.rows(), sys.design.cols());
  const auto np = static_cast<Eigen::Index>(sys.pair_count());
  for (Eigen::Index p = 0; p < np; ++p) {
    const auto off = sys.row_offsets[static_cast<std::size_t>(p)];
    const auto len = sys.row_offsets[static_cast<std::size_t>(p) + 1] - off;
    const Eigen::MatrixXd v = vandermonde(sys.times.segment(off, len) / scale, sys.order);
    for (int l = 0; l < sys.order; ++l) a.block(off, l * np + p, len, 1) = v.col(l);
  }
  return a;
}

Eigen::VectorXd solve_least_squares(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                                    const std::string& context) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
  if (qr.rank() < a.cols())
    throw RankError(context + ": design matrix is rank deficient (rank " +
                    std::to_string(qr.rank()) + " < " + std::to_string(a.cols()) + ")");
  return qr.solve(b);
}

RangeCoefficients empty_coefficients(const DesignSystem& sys) {
  RangeCoefficients rc;
  rc.node_count = sys.node_count;
  rc.order = sys.order;
  rc.propagation_speed = sys.propagation_speed;
  rc.pairs = sys.pairs;
  rc.scaled = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(sys.pair_count()), sys.order);
  return rc;
}

double max_abs_time(const Eigen::VectorXd& t) {
  const double s = t.size() ? t.cwiseAbs().maxCoeff() : 0.0;
  return s > 0.0 ? s : 1.0;
}

}  // namespace

Eigen::VectorXd scale_factors(int order, double propagation_speed) {
  Eigen::VectorXd f(order);
  for (int l = 0; l < order; ++l) f(l) = propagation_speed * factorial(l);
  return f;
}

Eigen::VectorXd rescale(const Eigen::VectorXd& scaled, double propagation_speed) {
  return scaled.cwiseProduct(scale_factors(static_cast<int>(scaled.size()), propagation_speed));
}

Eigen::VectorXd unscale(const Eigen::VectorXd& physical, double propagation_speed) {
  return physical.cwiseQuotient(scale_factors(static_cast<int>(physical.size()), propagation_speed));
}

Eigen::MatrixXd RangeCoefficients::physical() const {
  return scaled * scale_factors(order, propagation_speed).asDiagonal();
}

Eigen::VectorXd RangeCoefficients::stacked_scaled() const {
  // Column-major storage of a pairs x order matrix is exactly order-major stacking.
  return Eigen::Map<const Eigen::VectorXd>(scaled.data(), scaled.size());
}

RangeMatrices RangeCoefficients::range_matrices() const {
  if (pairs.size() != pair_count(node_count))
    throw ConfigError("range_matrices: coefficients do not cover every node pair");
  const Eigen::MatrixXd theta = physical();
  RangeMatrices rm;
  rm.range = Eigen::MatrixXd::Zero(node_count, node_count);
  rm.rate = Eigen::MatrixXd::Zero(node_count, node_count);
  rm.accel = Eigen::MatrixXd::Zero(node_count, node_count);
  Eigen::MatrixXd* targets[] = {&rm.range, &rm.rate, &rm.accel};
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    for (int l = 0; l < std::min(order, 3); ++l) {
      auto& m = *targets[l];
      m(i, j) = m(j, i) = theta(static_cast<Eigen::Index>(p), l);
    }
  }
  return rm;
}

Eigen::VectorXd DesignSystem::noise_variances() const {
  Eigen::VectorXd v(design.rows());
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto off = row_offsets[p];
    v.segment(off, row_offsets[p + 1] - off).setConstant(pair_variances[p]);
  }
  return v;
}

PairBlock DesignSystem::block(std::size_t p) const {
  const auto off = row_offsets.at(p);
  const auto len = row_offsets.at(p + 1) - off;
  PairBlock b;
  b.pair = pairs[p];
  b.times = times.segment(off, len);
  b.delays = delays.segment(off, len);
  b.variance = pair_variances[p];
  b.order = order;
  return b;
}

DesignSystem build_design(const TimestampExchangeSet& exchanges, int order,
                          const NoiseCovariance& covariance) {
  if (order < 1) throw ConfigError("build_design: order must be at least 1");
  const auto np = exchanges.links.size();
  if (np == 0) throw ConfigError("build_design: no links");

  const bool full_network = covariance.pair_variances.size() == pair_count(exchanges.node_count);
  if (!full_network && covariance.pair_variances.size() != np)
    throw ConfigError("build_design: covariance does not match the exchange set");

  DesignSystem sys;
  sys.node_count = exchanges.node_count;
  sys.order = order;
  sys.propagation_speed = exchanges.propagation_speed;
  sys.row_offsets.push_back(0);
  for (std::size_t p = 0; p < np; ++p) {
    const auto& link = exchanges.links[p];
    std::set<double> distinct(link.times_i.data(), link.times_i.data() + link.times_i.size());
    if (static_cast<int>(distinct.size()) < order)
      throw RankError("build_design: pair " + pair_label(link.pair) + " has " +
                      std::to_string(distinct.size()) + " distinct markers, order " +
                      std::to_string(order) + " needs at least " + std::to_string(order));
    sys.pairs.push_back(link.pair);
    sys.row_offsets.push_back(sys.row_offsets.back() + link.messages());
    sys.pair_variances.push_back(
        full_network ? covariance.pair_variances[pair_index(exchanges.node_count, link.pair.i,
                                                            link.pair.j)]
                     : covariance.pair_variances[p]);
  }

  const auto rows = sys.row_offsets.back();
  const auto cols = static_cast<Eigen::Index>(np) * order;
  sys.design = Eigen::MatrixXd::Zero(rows, cols);
  sys.delays.resize(rows);
  sys.times.resize(rows);
  for (std::size_t p = 0; p < np; ++p) {
    const auto& link = exchanges.links[p];
    const auto off = sys.row_offsets[p];
    const auto len = static_cast<Eigen::Index>(link.messages());
    const Eigen::MatrixXd v = vandermonde(link.times_i, order);
    for (int l = 0; l < order; ++l)
      sys.design.block(off, l * static_cast<Eigen::Index>(np) + static_cast<Eigen::Index>(p), len, 1) =
          v.col(l);
    sys.delays.segment(off, len) = link.delays();
    sys.times.segment(off, len) = link.times_i;
  }
  return sys;
}

RangeCoefficients wls_solve(const DesignSystem& sys, const SolveOptions& opts) {
  const Eigen::VectorXd w = row_weights(sys);
  const double scale = opts.scaled_basis ? max_abs_time(sys.times) : 1.0;
  const Eigen::MatrixXd a = opts.scaled_basis ? scaled_design(sys, scale) : sys.design;
  const Eigen::VectorXd theta =
      solve_least_squares(w.asDiagonal() * a, w.cwiseProduct(sys.delays), "wls_solve");

  RangeCoefficients rc = empty_coefficients(sys);
  const auto np = static_cast<Eigen::Index>(sys.pair_count());
  for (int l = 0; l < sys.order; ++l)
    rc.scaled.col(l) = theta.segment(l * np, np) / std::pow(scale, l);
  return rc;
}

Eigen::VectorXd pairwise_solve(const PairBlock& block, const SolveOptions& opts) {
  if (block.times.size() < block.order)
    throw RankError("pairwise_solve: pair " + pair_label(block.pair) + " has fewer messages than the order");
  const double scale = opts.scaled_basis ? max_abs_time(block.times) : 1.0;
  // A single link has a scalar covariance, which cancels from the WLS estimate.
  Eigen::VectorXd theta = solve_least_squares(vandermonde(block.times / scale, block.order),
                                              block.delays, "pairwise_solve " + pair_label(block.pair));
  for (int l = 1; l < block.order; ++l) theta(l) /= std::pow(scale, l);
  return theta;
}

RangeCoefficients solve_pairwise(const DesignSystem& sys, const SolveOptions& opts) {
  RangeCoefficients rc = empty_coefficients(sys);
  for (std::size_t p = 0; p < sys.pair_count(); ++p)
    rc.scaled.row(static_cast<Eigen::Index>(p)) = pairwise_solve(sys.block(p), opts).transpose();
  return rc;
}

Eigen::MatrixXd ThetaCovariance::block(int l) const {
  const auto np = static_cast<Eigen::Index>(pairs);
  return covariance.block(l * np, l * np, np, np);
}

double ThetaCovariance::rcrb(int l) const { return std::sqrt(block(l).trace()); }

ThetaCovariance crb_theta(const DesignSystem& sys) {
  ThetaCovariance out;
  out.order = sys.order;
  out.pairs = sys.pair_count();
  const auto cols = sys.design.cols();

  const Eigen::VectorXd var = sys.noise_variances();
  if ((var.array() == 0.0).all()) {
    out.covariance = Eigen::MatrixXd::Zero(cols, cols);
    return out;
  }
  const Eigen::VectorXd w = row_weights(sys);
  const Eigen::MatrixXd wa = w.asDiagonal() * sys.design;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(wa);
  if (qr.rank() < cols) throw RankError("crb_theta: design matrix is rank deficient");
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(cols, cols).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(cols, cols));
  // (WA)^T WA = Pi R^T R Pi^T  =>  inverse = Pi R^-1 R^-T Pi^T.
  const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
  const auto& perm = qr.colsPermutation();
  const Eigen::MatrixXd scaled_cov = perm * inner * perm.transpose();

  const Eigen::VectorXd f = scale_factors(sys.order, sys.propagation_speed);
  Eigen::VectorXd fdiag(cols);
  const auto np = static_cast<Eigen::Index>(out.pairs);
  for (int l = 0; l < sys.order; ++l) fdiag.segment(l * np, np).setConstant(f(l));
  out.covariance = fdiag.asDiagonal() * scaled_cov * fdiag.asDiagonal();
  return out;
}

OrderSelection order_select(const TimestampExchangeSet& exchanges, int max_order,
                            const NoiseCovariance& covariance, double threshold) {
  if (max_order < 1) throw ConfigError("order_select: max_order must be at least 1");
  std::vector<RangeCoefficients> fits;
  OrderSelection sel;
  double floor = 0.0;
  for (int l = 1; l <= max_order; ++l) {
    const DesignSystem sys = build_design(exchanges, l, covariance);
    RangeCoefficients rc = solve_pairwise(sys);
    const Eigen::VectorXd w = row_weights(sys);
    const Eigen::VectorXd resid = w.cwiseProduct(sys.design * rc.stacked_scaled() - sys.delays);
    sel.residuals.push_back(resid.squaredNorm());
    if (l == 1) {
      const double scale = 1e-10 * w.cwiseProduct(sys.delays).norm();
      floor = scale * scale;
    }
    fits.push_back(std::move(rc));
  }

  int chosen = max_order;
  for (int l = 1; l <= max_order; ++l) {
    const double rss = sel.residuals[static_cast<std::size_t>(l - 1)];
    if (rss <= floor || l == max_order) {
      chosen = l;
      break;
    }
    const double next = sel.residuals[static_cast<std::size_t>(l)];
    if (rss - next < threshold * rss) {
      chosen = l;
      break;
    }
  }
  sel.order = chosen;
  sel.coefficients = std::move(fits[static_cast<std::size_t>(chosen - 1)]);
  return sel;
}

}  // namespace relkin
