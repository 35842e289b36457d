#include "relkin/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "relkin/crb.hpp"
#include "relkin/errors.hpp"
#include "relkin/fixture_io.hpp"
#include "relkin/pairs.hpp"
#include "relkin/ranging.hpp"
#include "relkin/relative.hpp"
#include "relkin/rng.hpp"

namespace relkin {

namespace {

using json = nlohmann::json;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

const std::vector<std::string> kPointQuantities = {"r", "rdot", "rddot", "x_rel", "y_rel", "h_y"};
const std::vector<std::string> kTimeQuantities = {"x_dr", "x_cmds"};

// Per-pair vector of the upper triangle, canonical order.
Eigen::VectorXd upper(const Eigen::MatrixXd& m) {
  const int n = static_cast<int>(m.rows());
  Eigen::VectorXd v(pair_count(n));
  Eigen::Index p = 0;
  for (const auto& pr : canonical_pairs(n)) v(p++) = m(pr.i, pr.j);
  return v;
}

struct Truth {
  Eigen::MatrixXd xc, yc;
  Eigen::VectorXd r, rdot, rddot;
  RangeMatrices rm;
};

Truth make_truth(const TrajectorySet& traj) {
  Truth t;
  t.xc = center_columns(traj.positions());
  t.yc = center_columns(traj.velocities());
  t.rm = range_matrices(traj);
  t.r = upper(t.rm.range);
  t.rdot = upper(t.rm.rate);
  t.rddot = upper(t.rm.accel);
  return t;
}

ExchangeConfig exchange_for(const ExperimentConfig& cfg, int messages) {
  ExchangeConfig ex;
  ex.messages = messages;
  ex.t_start = cfg.t_start;
  ex.t_end = cfg.t_end;
  ex.propagation_speed = cfg.propagation_speed;
  return ex;
}

struct PointSpec {
  double value = 0.0;
  int messages = 0;
  double sigma_m = 0.0;
};

// Nominal marker index nearest to time t.
int nearest_marker(const ExchangeConfig& ex, double t) {
  if (ex.messages == 1) return 0;
  const double dt = (ex.t_end - ex.t_start) / (ex.messages - 1);
  const long k = std::lround((t - ex.t_start) / dt);
  return static_cast<int>(std::clamp<long>(k, 0, ex.messages - 1));
}

double marker_time(const ExchangeConfig& ex, int k) {
  if (ex.messages == 1) return ex.t_start;
  return ex.t_start + k * (ex.t_end - ex.t_start) / (ex.messages - 1);
}

struct TrialOutcome {
  bool ok = false;
  std::vector<double> sq;  // squared error per quantity slot
};

// Runs fn(trial) for every trial, in parallel when threads > 1. Results land
// in trial order so aggregation does not depend on scheduling.
template <typename Fn>
std::vector<TrialOutcome> run_trials(int trials, int threads, Fn fn) {
  std::vector<TrialOutcome> out(static_cast<std::size_t>(trials));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (int t = next++; t < trials; t = next++) {
      try {
        out[static_cast<std::size_t>(t)] = fn(t);
      } catch (const Error&) {
        out[static_cast<std::size_t>(t)].ok = false;
      } catch (...) {
        std::lock_guard<std::mutex> lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  const int n = std::max(1, std::min(threads, trials));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(n));
    for (int w = 0; w < n; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

RangeCoefficients estimate(const ExperimentConfig& cfg, const TimestampExchangeSet& ex,
                           const NoiseCovariance& cov) {
  const DesignSystem sys = build_design(ex, cfg.order, cov);
  return cfg.global_solve ? wls_solve(sys) : solve_pairwise(sys);
}

struct Bounds {
  double r = kNaN, rdot = kNaN, rddot = kNaN, x = kNaN, y = kNaN;
};

Bounds point_bounds(const ExperimentConfig& cfg, const TrajectorySet& traj, const Truth& truth,
                    int messages, const NoiseModel& noise, const NoiseCovariance& cov) {
  Bounds b;
  if (noise.is_noiseless()) {
    b.r = b.rdot = b.rddot = b.x = b.y = 0.0;
    return b;
  }
  const auto ex = simulate_exchanges(traj, exchange_for(cfg, messages),
                                     NoiseModel::noiseless(traj.count()), 0);
  const ThetaCovariance theta = crb_theta(build_design(ex, cfg.order, cov));
  b.r = theta.rcrb(0);
  b.rdot = theta.rcrb(1);
  b.rddot = theta.rcrb(2);
  const auto covs = range_noise_covariances(theta);
  b.x = std::sqrt(crb_trace(fim_position(traj.positions(), covs.range)));
  b.y = std::sqrt(crb_trace(fim_velocity(traj.velocities(), truth.rm, covs)));
  return b;
}

void run_point_sweep(const ExperimentConfig& cfg, const TrajectorySet& traj, RmseReport& report) {
  const Truth truth = make_truth(traj);
  const int n = traj.count();
  const int dim = traj.dim();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(dim, dim);

  for (std::size_t pi = 0; pi < cfg.values.size(); ++pi) {
    const auto start = std::chrono::steady_clock::now();
    PointSpec pt{cfg.values[pi], cfg.messages, cfg.sigma_m};
    if (cfg.sweep == SweepKind::messages) pt.messages = static_cast<int>(std::lround(pt.value));
    if (cfg.sweep == SweepKind::sigma_db) pt.sigma_m = std::pow(10.0, pt.value / 10.0);

    const ExchangeConfig exch = exchange_for(cfg, pt.messages);
    const NoiseModel noise = NoiseModel::from_pair_sigma_meters(n, pt.sigma_m, cfg.propagation_speed);
    const NoiseCovariance cov = effective_noise_covariance(noise, n, pt.messages);
    const Bounds bounds = point_bounds(cfg, traj, truth, pt.messages, noise, cov);

    auto trial = [&](int t) {
      TrialOutcome o;
      const auto seed = derive_seed(cfg.seed, {static_cast<std::uint64_t>(pi),
                                               static_cast<std::uint64_t>(t)});
      const auto ex = simulate_exchanges(traj, exch, noise, seed);
      const RangeCoefficients rc = estimate(cfg, ex, cov);
      const Eigen::MatrixXd theta = rc.physical();
      const RelativeSolution sol = solve_relative(rc.range_matrices(), {dim, false});
      const auto hx = procrustes_align(truth.xc, sol.positions);
      const auto hy = procrustes_align(truth.yc, center_columns(sol.velocities));
      o.sq = {
          (theta.col(0) - truth.r).squaredNorm(),
          (theta.col(1) - truth.rdot).squaredNorm(),
          (theta.col(2) - truth.rddot).squaredNorm(),
          hx.residual * hx.residual,
          hy.residual * hy.residual,
          (hx.rotation * sol.rotation * hy.rotation.transpose() - eye).squaredNorm(),
      };
      o.ok = true;
      return o;
    };
    const auto outcomes = run_trials(cfg.trials, cfg.threads, trial);

    std::vector<double> sums(kPointQuantities.size(), 0.0);
    int ok = 0;
    for (const auto& o : outcomes) {
      if (!o.ok) continue;
      ++ok;
      for (std::size_t q = 0; q < sums.size(); ++q) sums[q] += o.sq[q];
    }
    const double rcrbs[] = {bounds.r, bounds.rdot, bounds.rddot, bounds.x, bounds.y, kNaN};
    for (std::size_t q = 0; q < kPointQuantities.size(); ++q) {
      ReportRow row;
      row.sweep_value = pt.value;
      row.time = pt.value;
      row.quantity = kPointQuantities[q];
      row.rmse = ok > 0 ? std::sqrt(sums[q] / ok) : kNaN;
      row.rcrb = rcrbs[q];
      row.trials = ok;
      row.n_fail = cfg.trials - ok;
      report.rows.push_back(row);
    }
    report.wall_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  }
}

void run_time_sweep(const ExperimentConfig& cfg, const TrajectorySet& traj, RmseReport& report) {
  const auto start = std::chrono::steady_clock::now();
  const int n = traj.count();
  const int dim = traj.dim();
  const ExchangeConfig exch = exchange_for(cfg, cfg.messages);
  const NoiseModel noise = NoiseModel::from_pair_sigma_meters(n, cfg.sigma_m, cfg.propagation_speed);
  const NoiseCovariance cov = effective_noise_covariance(noise, n, cfg.messages);

  std::vector<int> marker;
  std::vector<double> when;
  std::vector<Eigen::MatrixXd> truth_at;
  for (double v : cfg.values) {
    const int k = nearest_marker(exch, v);
    marker.push_back(k);
    when.push_back(marker_time(exch, k));
    truth_at.push_back(center_columns(traj.positions_at(when.back())));
  }
  const std::size_t slots = cfg.values.size();

  auto trial = [&](int t) {
    TrialOutcome o;
    const auto seed = derive_seed(cfg.seed, {0, static_cast<std::uint64_t>(t)});
    const auto ex = simulate_exchanges(traj, exch, noise, seed);
    const RangeCoefficients rc = estimate(cfg, ex, cov);
    const RelativeSolution sol = solve_relative(rc.range_matrices(), {dim, false});
    o.sq.assign(2 * slots, 0.0);
    for (std::size_t s = 0; s < slots; ++s) {
      const auto dr = procrustes_align(truth_at[s], center_columns(position_at_time(sol, when[s])));
      Eigen::MatrixXd edm = Eigen::MatrixXd::Zero(n, n);
      for (const auto& link : ex.links) {
        const int k = marker[s];
        const double d = ex.propagation_speed * link.direction(k) *
                         (link.times_j(k) - link.times_i(k));
        edm(link.pair.i, link.pair.j) = edm(link.pair.j, link.pair.i) = d;
      }
      const auto cm = procrustes_align(truth_at[s], classical_mds(edm, dim).coordinates);
      o.sq[2 * s] = dr.residual * dr.residual;
      o.sq[2 * s + 1] = cm.residual * cm.residual;
    }
    o.ok = true;
    return o;
  };
  const auto outcomes = run_trials(cfg.trials, cfg.threads, trial);

  std::vector<double> sums(2 * slots, 0.0);
  int ok = 0;
  for (const auto& o : outcomes) {
    if (!o.ok) continue;
    ++ok;
    for (std::size_t q = 0; q < sums.size(); ++q) sums[q] += o.sq[q];
  }
  for (std::size_t s = 0; s < slots; ++s) {
    for (std::size_t q = 0; q < 2; ++q) {
      ReportRow row;
      row.sweep_value = cfg.values[s];
      row.time = when[s];
      row.quantity = kTimeQuantities[q];
      row.rmse = ok > 0 ? std::sqrt(sums[2 * s + q] / ok) : kNaN;
      row.rcrb = kNaN;
      row.trials = ok;
      row.n_fail = cfg.trials - ok;
      report.rows.push_back(row);
    }
  }
  const double total =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  report.wall_seconds.assign(slots, total / static_cast<double>(std::max<std::size_t>(slots, 1)));
}

std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os << std::setprecision(12) << v;
  return os.str();
}

// Key set accepted both at top level and per experiment.
const std::set<std::string> kSharedKeys = {"fixture",  "seed",     "trials",  "order",
                                           "messages", "sigma_m",  "interval", "threads",
                                           "speed",    "global_solve"};

void apply_keys(const json& j, ExperimentConfig& cfg, bool top_level) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& v = it.value();
    if (key == "fixture") {
      cfg.fixture = v.is_string() ? v.get<std::string>() : v.dump();
    } else if (key == "seed") {
      cfg.seed = v.get<std::uint64_t>();
    } else if (key == "trials") {
      cfg.trials = v.get<int>();
    } else if (key == "order") {
      cfg.order = v.get<int>();
    } else if (key == "messages") {
      cfg.messages = v.get<int>();
    } else if (key == "sigma_m") {
      cfg.sigma_m = v.get<double>();
    } else if (key == "interval") {
      if (!v.is_array() || v.size() != 2) throw ConfigError("config: interval must be [t0, t1]");
      cfg.t_start = v[0].get<double>();
      cfg.t_end = v[1].get<double>();
    } else if (key == "threads") {
      cfg.threads = v.get<int>();
    } else if (key == "speed") {
      cfg.propagation_speed = v.get<double>();
    } else if (key == "global_solve") {
      cfg.global_solve = v.get<bool>();
    } else if (top_level && (key == "experiments" || key == "output")) {
      continue;
    } else if (!top_level && key == "name") {
      cfg.name = v.get<std::string>();
    } else if (!top_level && key == "sweep") {
      cfg.sweep = sweep_kind_from_string(v.get<std::string>());
    } else if (!top_level && key == "values") {
      cfg.values = v.get<std::vector<double>>();
    } else {
      throw ConfigError("config: unknown key '" + key + "'");
    }
  }
}

json config_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["sweep"] = to_string(c.sweep);
  j["values"] = c.values;
  j["messages"] = c.messages;
  j["sigma_m"] = c.sigma_m;
  j["interval"] = {c.t_start, c.t_end};
  j["order"] = c.order;
  j["trials"] = c.trials;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["speed"] = c.propagation_speed;
  j["global_solve"] = c.global_solve;
  if (!c.fixture.empty() && c.fixture.front() == '{')
    j["fixture"] = json::parse(c.fixture);
  else
    j["fixture"] = c.fixture;
  return j;
}

const ReportRow* nearest_row(const RmseReport& r, double value, const std::string& q) {
  const ReportRow* best = nullptr;
  for (const auto& row : r.rows) {
    if (row.quantity != q) continue;
    if (!best || std::abs(row.sweep_value - value) < std::abs(best->sweep_value - value))
      best = &row;
  }
  return best;
}

}  // namespace

const char* to_string(SweepKind kind) {
  switch (kind) {
    case SweepKind::messages: return "messages";
    case SweepKind::sigma_db: return "sigma_db";
    case SweepKind::time: return "time";
  }
  return "unknown";
}

SweepKind sweep_kind_from_string(const std::string& s) {
  if (s == "messages" || s == "K") return SweepKind::messages;
  if (s == "sigma_db" || s == "sigma_dB_m" || s == "sigma") return SweepKind::sigma_db;
  if (s == "time" || s == "time_grid") return SweepKind::time;
  throw ConfigError("config: unknown sweep '" + s + "'");
}

void ExperimentConfig::validate() const {
  if (values.empty()) throw ConfigError("experiment '" + name + "': empty sweep");
  if (trials < 1) throw ConfigError("experiment '" + name + "': trials must be positive");
  if (threads < 1) throw ConfigError("experiment '" + name + "': threads must be positive");
  if (order < 3) throw ConfigError("experiment '" + name + "': order must be at least 3");
  if (!(t_start < t_end)) throw ConfigError("experiment '" + name + "': empty interval");
  if (!(propagation_speed > 0.0)) throw ConfigError("experiment '" + name + "': bad speed");
  if (!(sigma_m >= 0.0)) throw ConfigError("experiment '" + name + "': sigma must be >= 0");
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError("experiment '" + name + "': non-finite sweep value");
    if (sweep == SweepKind::messages && (v < order || std::abs(v - std::round(v)) > 1e-9))
      throw ConfigError("experiment '" + name + "': message counts must be integers >= order");
    if (sweep == SweepKind::time && (v < t_start || v > t_end))
      throw ConfigError("experiment '" + name + "': time outside the exchange interval");
  }
  if (sweep != SweepKind::messages && messages < order)
    throw ConfigError("experiment '" + name + "': messages must be >= order");
}

const ReportRow* RmseReport::find(double sweep_value, const std::string& quantity) const {
  for (const auto& row : rows)
    if (row.quantity == quantity && std::abs(row.sweep_value - sweep_value) < 1e-9) return &row;
  return nullptr;
}

std::vector<std::string> RmseReport::quantities() const {
  std::vector<std::string> out;
  for (const auto& row : rows)
    if (std::find(out.begin(), out.end(), row.quantity) == out.end()) out.push_back(row.quantity);
  return out;
}

RmseReport run_experiment(const ExperimentConfig& cfg, const TrajectorySet& traj) {
  cfg.validate();
  RmseReport report;
  report.name = cfg.name;
  report.sweep = cfg.sweep;
  if (cfg.sweep == SweepKind::time)
    run_time_sweep(cfg, traj, report);
  else
    run_point_sweep(cfg, traj, report);
  return report;
}

RmseReport run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  return run_experiment(cfg, resolve_fixture(cfg.fixture));
}

double rmse_vector(const std::vector<Eigen::VectorXd>& estimates, const Eigen::VectorXd& truth) {
  if (estimates.empty()) throw ConfigError("rmse: no estimates");
  double sum = 0.0;
  for (const auto& e : estimates) sum += (e - truth).squaredNorm();
  return std::sqrt(sum / static_cast<double>(estimates.size()));
}

double aligned_squared_error(const Eigen::MatrixXd& estimate, const Eigen::MatrixXd& truth) {
  const auto res = procrustes_align(center_columns(truth), center_columns(estimate));
  return res.residual * res.residual;
}

double rmse_matrix_aligned(const std::vector<Eigen::MatrixXd>& estimates,
                           const Eigen::MatrixXd& truth) {
  if (estimates.empty()) throw ConfigError("rmse: no estimates");
  double sum = 0.0;
  for (const auto& e : estimates) sum += aligned_squared_error(e, truth);
  return std::sqrt(sum / static_cast<double>(estimates.size()));
}

SuiteConfig default_suite() {
  SuiteConfig suite;
  ExperimentConfig k;
  k.name = "rmse_vs_messages";
  k.sweep = SweepKind::messages;
  for (int v = 10; v <= 100; v += 10) k.values.push_back(v);
  suite.experiments.push_back(k);

  ExperimentConfig s;
  s.name = "rmse_vs_sigma";
  s.sweep = SweepKind::sigma_db;
  for (int v = -10; v <= 0; v += 2) s.values.push_back(v);
  suite.experiments.push_back(s);

  ExperimentConfig t;
  t.name = "rmse_vs_time";
  t.sweep = SweepKind::time;
  for (int v = -6; v <= 6; ++v) t.values.push_back(0.5 * v);
  suite.experiments.push_back(t);
  return suite;
}

SuiteConfig parse_suite_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  SuiteConfig suite;
  try {
    ExperimentConfig shared;
    apply_keys(root, shared, true);
    if (root.contains("output")) suite.output_dir = root["output"].get<std::string>();
    if (!root.contains("experiments") || !root["experiments"].is_array() ||
        root["experiments"].empty())
      throw ConfigError("config: 'experiments' must be a non-empty list");
    std::set<std::string> names;
    for (const auto& e : root["experiments"]) {
      ExperimentConfig cfg = shared;
      apply_keys(e, cfg, false);
      if (!names.insert(cfg.name).second)
        throw ConfigError("config: duplicate experiment name '" + cfg.name + "'");
      cfg.validate();
      suite.experiments.push_back(cfg);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return suite;
}

SuiteConfig load_suite_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_suite_config(ss.str());
}

void override_suite(SuiteConfig& suite, int trials, std::optional<std::uint64_t> seed,
                    int threads) {
  for (auto& e : suite.experiments) {
    if (trials > 0) e.trials = trials;
    if (seed) e.seed = *seed;
    if (threads > 0) e.threads = threads;
  }
}

std::string report_csv(const RmseReport& report) {
  std::ostringstream os;
  os << "sweep_value,quantity,rmse,rcrb,n_fail\n";
  for (const auto& row : report.rows)
    os << fmt_num(row.sweep_value) << ',' << row.quantity << ',' << fmt_num(row.rmse) << ','
       << fmt_num(row.rcrb) << ',' << row.n_fail << '\n';
  return os.str();
}

std::string report_plot_data(const RmseReport& report) {
  const auto qs = report.quantities();
  std::vector<double> xs;
  for (const auto& row : report.rows)
    if (std::find(xs.begin(), xs.end(), row.sweep_value) == xs.end()) xs.push_back(row.sweep_value);

  std::ostringstream os;
  os << "# " << report.name << " (" << to_string(report.sweep) << ")\n";
  os << "sweep_value time";
  for (const auto& q : qs) os << ' ' << q << "_rmse " << q << "_rcrb";
  os << '\n';
  for (double x : xs) {
    const ReportRow* first = report.find(x, qs.front());
    os << fmt_num(x) << ' ' << fmt_num(first ? first->time : x);
    for (const auto& q : qs) {
      const ReportRow* row = report.find(x, q);
      os << ' ' << fmt_num(row ? row->rmse : kNaN) << ' ' << fmt_num(row ? row->rcrb : kNaN);
    }
    os << '\n';
  }
  return os.str();
}

void emit_outputs(const SuiteConfig& suite, const std::vector<RmseReport>& reports,
                  const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory " + dir.string() + ": " + ec.message());

  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw IoError("cannot write " + p.string());
    out << text;
    if (!out) throw IoError("write failed for " + p.string());
  };

  json manifest;
  manifest["tool"] = "relkin";
  manifest["output"] = suite.output_dir.string();
  manifest["experiments"] = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const RmseReport& r = reports[i];
    write(dir / (r.name + ".csv"), report_csv(r));
    write(dir / (r.name + ".dat"), report_plot_data(r));
    json e = i < suite.experiments.size() ? config_json(suite.experiments[i]) : json::object();
    e["name"] = r.name;
    e["csv"] = r.name + ".csv";
    e["plot_data"] = r.name + ".dat";
    e["wall_seconds"] = r.wall_seconds;
    int fails = 0;
    for (const auto& row : r.rows) fails = std::max(fails, row.n_fail);
    e["max_n_fail"] = fails;
    manifest["experiments"].push_back(e);
  }
  write(dir / "manifest.json", manifest.dump(2) + "\n");
}

std::vector<InvariantCheck> check_invariants(const SuiteConfig& suite,
                                             const std::vector<RmseReport>& reports) {
  std::vector<InvariantCheck> out;
  for (std::size_t i = 0; i < reports.size() && i < suite.experiments.size(); ++i) {
    const auto& cfg = suite.experiments[i];
    const auto& rep = reports[i];

    const ReportRow* probe = nullptr;
    if (rep.sweep == SweepKind::messages && std::abs(cfg.sigma_m - 0.1) < 1e-12)
      probe = rep.find(100.0, "r");
    if (rep.sweep == SweepKind::sigma_db && cfg.messages == 100) probe = rep.find(-10.0, "r");
    if (probe) {
      for (const std::string q : {"r", "rdot", "rddot"}) {
        const ReportRow* row = rep.find(probe->sweep_value, q);
        const double ratio = row->rmse / row->rcrb;
        InvariantCheck c;
        c.name = rep.name + ": " + q + " RMSE/RCRB at K=100, sigma=0.1 m";
        c.passed = ratio >= 0.97 && ratio <= 1.15;
        c.detail = "ratio " + fmt_num(ratio) + " (window [0.97, 1.15])";
        out.push_back(c);
      }
    }

    if (rep.sweep == SweepKind::time) {
      const ReportRow* dr0 = nearest_row(rep, 0.0, "x_dr");
      const ReportRow* cm0 = nearest_row(rep, 0.0, "x_cmds");
      if (dr0 && cm0 && std::abs(dr0->time) < 0.1) {
        InvariantCheck c;
        c.name = rep.name + ": dynamic ranging beats per-instant MDS near t=0";
        c.passed = dr0->rmse < cm0->rmse;
        c.detail = "x_dr " + fmt_num(dr0->rmse) + " vs x_cmds " + fmt_num(cm0->rmse);
        out.push_back(c);

        for (double edge : {cfg.t_start, cfg.t_end}) {
          const ReportRow* e = nearest_row(rep, edge, "x_dr");
          if (!e || std::abs(e->time - edge) > 0.1) continue;
          InvariantCheck g;
          g.name = rep.name + ": dynamic ranging error grows toward t=" + fmt_num(edge);
          g.passed = e->rmse > dr0->rmse;
          g.detail = "x_dr(edge) " + fmt_num(e->rmse) + " vs x_dr(0) " + fmt_num(dr0->rmse);
          out.push_back(g);
        }
      }
      std::vector<double> cm;
      for (const auto& row : rep.rows)
        if (row.quantity == "x_cmds") cm.push_back(row.rmse);
      if (cm.size() >= 2) {
        std::vector<double> sorted = cm;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t m = sorted.size();
        const double median =
            m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
        const double worst =
            std::max(std::abs(sorted.front() / median - 1.0), std::abs(sorted.back() / median - 1.0));
        InvariantCheck c;
        c.name = rep.name + ": per-instant MDS error flat over time";
        c.passed = worst <= 0.20;
        c.detail = "max deviation from median " + fmt_num(100.0 * worst) + "% (limit 20%)";
        out.push_back(c);
      }
    }
  }
  return out;
}

}  // namespace relkin
