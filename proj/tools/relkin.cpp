#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relkin/crb.hpp"
#include "relkin/errors.hpp"
#include "relkin/experiment.hpp"
#include "relkin/fixture_io.hpp"
#include "relkin/ranging.hpp"
#include "relkin/relative.hpp"
#include "relkin/twr.hpp"

namespace {

using namespace relkin;

// Writes to the given file, or stdout when the path is empty or "-".
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path);
      if (!file_) throw IoError("cannot write " + path);
    }
    out().precision(17);
  }
  std::ostream& out() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

DirectionPolicy parse_policy(const std::string& s) {
  if (s == "one_way") return DirectionPolicy::one_way;
  if (s == "alternating") return DirectionPolicy::alternating;
  throw ConfigError("unknown direction policy '" + s + "'");
}

struct ExchangeArgs {
  std::string fixture = "reference";
  int messages = 100;
  std::vector<double> interval = {-3.0, 3.0};
  double sigma_m = 0.1;
  double speed = kSpeedOfLight;

  ExchangeConfig config() const {
    ExchangeConfig cfg;
    cfg.messages = messages;
    cfg.t_start = interval.at(0);
    cfg.t_end = interval.at(1);
    cfg.propagation_speed = speed;
    cfg.validate();
    return cfg;
  }
};

void add_exchange_options(CLI::App* app, ExchangeArgs& a) {
  app->add_option("--fixture", a.fixture, "Built-in fixture name ('reference'), inline JSON or path")
      ->capture_default_str();
  app->add_option("--messages,-K", a.messages, "Messages per link")->capture_default_str();
  app->add_option("--interval", a.interval, "Exchange interval t0 t1 (s)")->expected(2);
  app->add_option("--sigma-meters", a.sigma_m, "Pairwise delay noise std (m)")
      ->capture_default_str();
  app->add_option("--speed", a.speed, "Propagation speed (m/s)")->capture_default_str();
}

// --- estimate / solve CSV -------------------------------------------------

struct ThetaRow {
  int i = 0, j = 0, l = 0;
  double theta = 0.0;
};

std::vector<ThetaRow> read_theta_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty file");
  const auto header = split(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
  for (const char* need : {"i", "j", "l", "theta"})
    if (!col.count(need)) throw IoError(path + ": missing column '" + need + "'");

  std::vector<ThetaRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split(line);
    try {
      ThetaRow r;
      r.i = std::stoi(cells.at(col["i"]));
      r.j = std::stoi(cells.at(col["j"]));
      r.l = std::stoi(cells.at(col["l"]));
      r.theta = std::stod(cells.at(col["theta"]));
      rows.push_back(r);
    } catch (const std::exception&) {
      throw IoError(path + ":" + std::to_string(lineno) + ": malformed row");
    }
  }
  return rows;
}

RangeMatrices range_matrices_from_theta(const std::vector<ThetaRow>& rows) {
  int n = 0;
  for (const auto& r : rows) n = std::max({n, r.i + 1, r.j + 1});
  RangeMatrices rm{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n),
                   Eigen::MatrixXd::Zero(n, n)};
  std::vector<int> seen(static_cast<std::size_t>(n * n), 0);
  for (const auto& r : rows) {
    if (r.i == r.j || r.i < 0 || r.j < 0) throw ConfigError("theta: invalid pair");
    Eigen::MatrixXd* target = r.l == 0 ? &rm.range : r.l == 1 ? &rm.rate : r.l == 2 ? &rm.accel
                                                                                   : nullptr;
    if (!target) continue;
    (*target)(r.i, r.j) = (*target)(r.j, r.i) = r.theta;
    if (r.l == 0) seen[static_cast<std::size_t>(std::min(r.i, r.j) * n + std::max(r.i, r.j))] = 1;
  }
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (!seen[static_cast<std::size_t>(i * n + j)])
        throw ConfigError("theta: missing range for pair " + std::to_string(i) + "-" +
                          std::to_string(j));
  return rm;
}

void write_matrix(std::ostream& os, const std::string& q, double t, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      os << q << ',' << t << ',' << r << ',' << c << ',' << m(r, c) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Relative kinematics from two-way ranging timestamps"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "Simulate timestamp exchanges to CSV");
  ExchangeArgs sim_args;
  std::string sim_policy = "one_way";
  std::uint64_t sim_seed = 1;
  std::string sim_out;
  add_exchange_options(sim, sim_args);
  sim->add_option("--directions", sim_policy, "one_way | alternating")->capture_default_str();
  sim->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
  sim->add_option("--out,-o", sim_out, "Output CSV (default stdout)");

  // estimate
  auto* est = app.add_subcommand("estimate", "Dynamic ranging from an exchange CSV");
  std::string est_in, est_out;
  int est_order = 4;
  double est_sigma = 0.0;
  double est_speed = kSpeedOfLight;
  bool est_global = false, est_pairwise = false;
  est->add_option("--input,-i", est_in, "Exchange CSV")->required();
  est->add_option("--order,-L", est_order, "Taylor order (coefficients per link)")
      ->capture_default_str();
  est->add_option("--sigma-meters", est_sigma, "Pairwise delay noise std (m)")->required();
  est->add_option("--speed", est_speed, "Propagation speed (m/s)")->capture_default_str();
  auto* g = est->add_flag("--global", est_global, "Solve the stacked system at once");
  auto* pw = est->add_flag("--pairwise", est_pairwise, "Solve link by link (default)");
  g->excludes(pw);
  est->add_option("--out,-o", est_out, "Output CSV (default stdout)");

  // solve
  auto* sol = app.add_subcommand("solve", "Relative positions and velocities from theta CSV");
  std::string sol_in, sol_out;
  std::vector<double> sol_times;
  bool sol_ortho = false;
  int sol_dim = 2;
  sol->add_option("--input,-i", sol_in, "Theta CSV from 'estimate'")->required();
  sol->add_option("--times", sol_times, "Evaluation times (comma separated)")->delimiter(',');
  sol->add_option("--dim", sol_dim, "Embedding dimension")->capture_default_str();
  sol->add_flag("--orthogonalize", sol_ortho, "Project the rotation onto O(P)");
  sol->add_option("--out,-o", sol_out, "Output CSV (default stdout)");

  // crb
  auto* crb = app.add_subcommand("crb", "Root CRBs for a fixture and exchange schedule");
  ExchangeArgs crb_args;
  int crb_order = 4;
  std::string crb_pairs = "doubled";
  std::string crb_velocity_noise = "rate";
  add_exchange_options(crb, crb_args);
  crb->add_option("--order,-L", crb_order, "Taylor order")->capture_default_str();
  crb->add_option("--pairs", crb_pairs, "doubled | unique")->capture_default_str();
  crb->add_option("--velocity-noise", crb_velocity_noise,
                  "Covariance in the cross term of the velocity noise: rate | accel")
      ->check(CLI::IsMember({"rate", "accel"}))
      ->capture_default_str();

  // experiment
  auto* exp = app.add_subcommand("experiment", "Monte Carlo sweeps with RMSE and RCRB");
  std::string exp_config, exp_out;
  bool exp_ci = false, exp_check = false;
  std::optional<std::uint64_t> exp_seed;
  int exp_threads = 0, exp_trials = 0;
  exp->add_option("--config,-c", exp_config, "JSON suite config (default: built-in suite)");
  exp->add_flag("--ci", exp_ci, "Use 200 trials per point");
  exp->add_option("--trials", exp_trials, "Override trials per point");
  exp->add_option("--seed", exp_seed, "Override the master seed");
  exp->add_option("--threads", exp_threads, "Worker threads");
  exp->add_option("--out,-o", exp_out, "Output directory");
  exp->add_flag("--check", exp_check, "Exit nonzero if an invariant check fails");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*sim) {
      const auto traj = resolve_fixture(sim_args.fixture);
      auto cfg = sim_args.config();
      cfg.policy = parse_policy(sim_policy);
      const auto noise =
          NoiseModel::from_pair_sigma_meters(traj.count(), sim_args.sigma_m, sim_args.speed);
      const auto set = simulate_exchanges(traj, cfg, noise, sim_seed);
      Sink sink(sim_out);
      write_exchanges_csv(set, sink.out());
      return 0;
    }

    if (*est) {
      const auto set = read_exchanges_csv(est_in, est_speed);
      const auto noise = NoiseModel::from_pair_sigma_meters(set.node_count, est_sigma, est_speed);
      const int k = set.links.empty() ? 0 : set.links.front().messages();
      const auto sys = build_design(set, est_order, effective_noise_covariance(noise, set.node_count, k));
      const auto rc = est_global ? wls_solve(sys) : solve_pairwise(sys);
      const auto theta = rc.physical();
      const auto cov = crb_theta(sys);
      Sink sink(est_out);
      auto& os = sink.out();
      os << "pair,i,j,l,theta,rcrb\n";
      for (std::size_t p = 0; p < rc.pairs.size(); ++p)
        for (int l = 0; l < rc.order; ++l) {
          const auto pp = static_cast<Eigen::Index>(p);
          os << p << ',' << rc.pairs[p].i << ',' << rc.pairs[p].j << ',' << l << ','
             << theta(pp, l) << ',' << std::sqrt(std::max(0.0, cov.block(l)(pp, pp))) << '\n';
        }
      return 0;
    }

    if (*sol) {
      const auto rm = range_matrices_from_theta(read_theta_csv(sol_in));
      const auto s = solve_relative(rm, {sol_dim, sol_ortho});
      Sink sink(sol_out);
      auto& os = sink.out();
      os << "quantity,time,row,col,value\n";
      write_matrix(os, "x_rel", 0.0, s.positions);
      write_matrix(os, "y_rel", 0.0, s.velocities);
      write_matrix(os, "h_y", 0.0, s.rotation);
      for (double t : sol_times) write_matrix(os, "x_k", t, position_at_time(s, t));
      if (s.clamped_eigenvalues > 0)
        std::cerr << "warning: clamped " << s.clamped_eigenvalues << " negative eigenvalue(s)\n";
      return 0;
    }

    if (*crb) {
      const auto traj = resolve_fixture(crb_args.fixture);
      const auto cfg = crb_args.config();
      const int n = traj.count();
      const auto noise = NoiseModel::from_pair_sigma_meters(n, crb_args.sigma_m, crb_args.speed);
      const auto set = simulate_exchanges(traj, cfg, NoiseModel::noiseless(n), 0);
      const auto theta =
          crb_theta(build_design(set, crb_order, effective_noise_covariance(noise, n, cfg.messages)));
      FimOptions opts;
      if (crb_pairs == "unique")
        opts.counting = PairCounting::unique;
      else if (crb_pairs != "doubled")
        throw ConfigError("--pairs must be 'doubled' or 'unique'");
      if (crb_velocity_noise == "accel") opts.velocity_noise = VelocityNoiseForm::accel;
      std::cout.precision(17);
      std::cout << "quantity,rcrb\n";
      for (int l = 0; l < crb_order; ++l) std::cout << "theta_" << l << ',' << theta.rcrb(l) << '\n';
      if (crb_order >= 3 && !noise.is_noiseless()) {
        const auto covs = range_noise_covariances(theta);
        const auto fx = fim_position(traj.positions(), covs.range, opts);
        const auto fy = fim_velocity(traj.velocities(), range_matrices(traj), covs, opts);
        std::cout << "x_rel," << std::sqrt(crb_trace(fx)) << '\n';
        std::cout << "y_rel," << std::sqrt(crb_trace(fy)) << '\n';
      }
      return 0;
    }

    if (*exp) {
      SuiteConfig suite = exp_config.empty() ? default_suite() : load_suite_config(exp_config);
      const int trials = exp_trials > 0 ? exp_trials : exp_ci ? 200 : 0;
      override_suite(suite, trials, exp_seed, exp_threads);
      for (const auto& e : suite.experiments) e.validate();
      const std::filesystem::path out = exp_out.empty() ? suite.output_dir : std::filesystem::path(exp_out);

      std::vector<RmseReport> reports;
      for (const auto& e : suite.experiments) {
        std::cerr << "running " << e.name << " (" << e.values.size() << " points x " << e.trials
                  << " trials)\n";
        reports.push_back(run_experiment(e));
      }
      emit_outputs(suite, reports, out);
      std::cerr << "wrote " << out.string() << '\n';

      bool all_ok = true;
      for (const auto& c : check_invariants(suite, reports)) {
        std::cout << (c.passed ? "PASS " : "FAIL ") << c.name << ": " << c.detail << '\n';
        all_ok = all_ok && c.passed;
      }
      return exp_check && !all_ok ? 3 : 0;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
