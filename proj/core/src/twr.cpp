#include "relkin/twr.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "relkin/errors.hpp"

namespace relkin {

void ExchangeConfig::validate() const {
  if (messages < 1) throw ConfigError("exchange: need at least one message per pair");
  if (!(t_start < t_end)) throw ConfigError("exchange: interval must satisfy t_start < t_end");
  if (!(propagation_speed > 0.0)) throw ConfigError("exchange: propagation speed must be positive");
  if (policy == DirectionPolicy::custom) {
    if (static_cast<int>(custom_directions.size()) != messages)
      throw ConfigError("exchange: custom direction vector must have one entry per message");
    for (int e : custom_directions)
      if (e != 1 && e != -1) throw ConfigError("exchange: direction entries must be +1 or -1");
  }
}

int ExchangeConfig::direction(int k) const {
  switch (policy) {
    case DirectionPolicy::one_way:
      return 1;
    case DirectionPolicy::alternating:
      return (k % 2 == 0) ? 1 : -1;
    case DirectionPolicy::custom:
      return custom_directions.at(static_cast<std::size_t>(k));
  }
  return 1;
}

NoiseModel NoiseModel::noiseless(int nodes) { return uniform(nodes, 0.0); }

NoiseModel NoiseModel::uniform(int nodes, double std_seconds) {
  if (std_seconds < 0.0) throw ConfigError("noise: standard deviation must be nonnegative");
  NoiseModel m;
  m.node_std_seconds.assign(static_cast<std::size_t>(nodes), std_seconds);
  return m;
}

NoiseModel NoiseModel::from_pair_sigma_meters(int nodes, double sigma_m, double propagation_speed) {
  if (sigma_m < 0.0) throw ConfigError("noise: sigma must be nonnegative");
  return uniform(nodes, sigma_m / propagation_speed / std::sqrt(2.0));
}

double NoiseModel::pair_variance(int i, int j) const {
  const double si = node_std_seconds.at(static_cast<std::size_t>(i));
  const double sj = node_std_seconds.at(static_cast<std::size_t>(j));
  return si * si + sj * sj;
}

bool NoiseModel::is_noiseless() const {
  return std::all_of(node_std_seconds.begin(), node_std_seconds.end(),
                     [](double s) { return s == 0.0; });
}

Eigen::VectorXd PairExchange::delays() const {
  return direction.cast<double>().cwiseProduct(times_j - times_i);
}

std::vector<Eigen::VectorXd> generate_timestamps(const ExchangeConfig& cfg, std::size_t n_pairs) {
  cfg.validate();
  Eigen::VectorXd grid = Eigen::VectorXd::Constant(1, cfg.t_start);
  if (cfg.messages > 1) grid = Eigen::VectorXd::LinSpaced(cfg.messages, cfg.t_start, cfg.t_end);
  return std::vector<Eigen::VectorXd>(n_pairs, grid);
}

TimestampExchangeSet simulate_exchanges(const TrajectorySet& traj, const ExchangeConfig& cfg,
                                        const NoiseModel& noise, std::uint64_t seed,
                                        NoiseInjection injection) {
  cfg.validate();
  const int n = traj.count();
  if (static_cast<int>(noise.node_std_seconds.size()) != n)
    throw ConfigError("simulate_exchanges: noise model must have one entry per node");

  const auto pairs = canonical_pairs(n);
  const auto grids = generate_timestamps(cfg, pairs.size());
  const double c = cfg.propagation_speed;

  std::mt19937_64 gen(seed);
  std::normal_distribution<double> standard(0.0, 1.0);

  TimestampExchangeSet out;
  out.node_count = n;
  out.propagation_speed = c;
  out.links.reserve(pairs.size());

  const auto& x = traj.positions();
  const auto& y = traj.velocities();
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto [i, j] = pairs[p];
    const auto& grid = grids[p];
    const int k_count = static_cast<int>(grid.size());
    const double sigma_i = noise.node_std_seconds[static_cast<std::size_t>(i)];
    const double sigma_j = noise.node_std_seconds[static_cast<std::size_t>(j)];

    PairExchange link;
    link.pair = pairs[p];
    link.times_i.resize(k_count);
    link.times_j.resize(k_count);
    link.direction.resize(k_count);
    for (int k = 0; k < k_count; ++k) {
      const double t = grid(k);
      const double d = ((x.col(i) + t * y.col(i)) - (x.col(j) + t * y.col(j))).norm();
      if (d == 0.0)
        throw DegenerateGeometryError("simulate_exchanges: nodes collide at t=" + std::to_string(t),
                                      std::pair{i, j});
      const int e = cfg.direction(k);
      const double q_i = sigma_i * standard(gen);
      const double q_j = sigma_j * standard(gen);

      link.direction(k) = e;
      const double t_j = t + e * d / c;
      if (injection == NoiseInjection::markers) {
        link.times_i(k) = t + q_i;
        link.times_j(k) = t_j + q_j;
      } else {
        link.times_i(k) = t;
        link.times_j(k) = t_j + q_j - q_i;
      }
    }
    out.links.push_back(std::move(link));
  }
  return out;
}

Eigen::MatrixXd NoiseCovariance::dense() const {
  const auto blocks = static_cast<Eigen::Index>(pair_variances.size());
  Eigen::VectorXd diag(blocks * messages);
  for (Eigen::Index p = 0; p < blocks; ++p)
    diag.segment(p * messages, messages).setConstant(pair_variances[static_cast<std::size_t>(p)]);
  return diag.asDiagonal();
}

bool NoiseCovariance::is_scaled_identity() const {
  return std::adjacent_find(pair_variances.begin(), pair_variances.end(),
                            std::not_equal_to<>()) == pair_variances.end();
}

NoiseCovariance effective_noise_covariance(const NoiseModel& noise, int nodes, int messages) {
  if (!noise.pairwise_independent)
    throw UnsupportedCovarianceError(
        "only pairwise-independent links are supported; correlated broadcast noise is not modelled");
  if (static_cast<int>(noise.node_std_seconds.size()) != nodes)
    throw ConfigError("noise model must have one entry per node");
  NoiseCovariance cov;
  cov.messages = messages;
  for (const auto& [i, j] : canonical_pairs(nodes)) cov.pair_variances.push_back(noise.pair_variance(i, j));
  return cov;
}

void write_exchanges_csv(const TimestampExchangeSet& set, std::ostream& out) {
  const auto old_precision = out.precision(17);
  out << "i,j,k,E,T_tx,T_rx\n";
  for (const auto& link : set.links)
    for (int k = 0; k < link.messages(); ++k)
      out << link.pair.i << ',' << link.pair.j << ',' << k << ',' << link.direction(k) << ','
          << link.times_i(k) << ',' << link.times_j(k) << '\n';
  out.precision(old_precision);
}

void write_exchanges_csv(const TimestampExchangeSet& set, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_exchanges_csv(set, out);
  if (!out) throw IoError("error while writing " + path.string());
}

TimestampExchangeSet read_exchanges_csv(const std::filesystem::path& path, double propagation_speed) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());

  struct Row {
    int k;
    int e;
    double t_i;
    double t_j;
  };
  std::map<std::pair<int, int>, std::vector<Row>> rows;
  std::string line;
  int line_no = 0;
  int max_node = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("i,", 0) == 0) continue;
    std::istringstream ls(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (fields.size() != 6)
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 6 columns");
    try {
      int i = std::stoi(fields[0]);
      int j = std::stoi(fields[1]);
      Row r{std::stoi(fields[2]), std::stoi(fields[3]), std::stod(fields[4]), std::stod(fields[5])};
      if (i == j || i < 0 || j < 0 || (r.e != 1 && r.e != -1))
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": invalid row");
      if (i > j) {
        // Re-express from the lower-index node's point of view.
        std::swap(i, j);
        std::swap(r.t_i, r.t_j);
        r.e = -r.e;
      }
      max_node = std::max(max_node, j);
      rows[{i, j}].push_back(r);
    } catch (const std::logic_error&) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": malformed number");
    }
  }

  TimestampExchangeSet set;
  set.node_count = max_node + 1;
  set.propagation_speed = propagation_speed;
  for (auto& [key, list] : rows) {
    std::sort(list.begin(), list.end(), [](const Row& a, const Row& b) { return a.k < b.k; });
    PairExchange link;
    link.pair = {key.first, key.second};
    const auto m = static_cast<Eigen::Index>(list.size());
    link.times_i.resize(m);
    link.times_j.resize(m);
    link.direction.resize(m);
    for (Eigen::Index k = 0; k < m; ++k) {
      const auto& r = list[static_cast<std::size_t>(k)];
      link.times_i(k) = r.t_i;
      link.times_j(k) = r.t_j;
      link.direction(k) = r.e;
    }
    set.links.push_back(std::move(link));
  }
  return set;
}

}  // namespace relkin
