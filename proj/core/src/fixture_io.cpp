#include "relkin/fixture_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "relkin/errors.hpp"

namespace relkin {

namespace {

using nlohmann::json;

Eigen::MatrixXd matrix_from_json(const json& rows, int p, int n, const char* key) {
  if (!rows.is_array() || static_cast<int>(rows.size()) != p)
    throw ConfigError(std::string("fixture: '") + key + "' must have P rows");
  Eigen::MatrixXd m(p, n);
  for (int r = 0; r < p; ++r) {
    const auto& row = rows[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<int>(row.size()) != n)
      throw ConfigError(std::string("fixture: each row of '") + key + "' must have N entries");
    for (int c = 0; c < n; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

TrajectorySet trajectory_from_json_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("fixture: invalid JSON: ") + e.what());
  }
  try {
    const int p = doc.at("P").get<int>();
    const int n = doc.at("N").get<int>();
    if (p < 1 || n < 1) throw ConfigError("fixture: P and N must be positive");
    return TrajectorySet(matrix_from_json(doc.at("X"), p, n, "X"),
                         matrix_from_json(doc.at("Y"), p, n, "Y"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("fixture: ") + e.what());
  }
}

std::string trajectory_to_json_text(const TrajectorySet& traj) {
  json doc;
  doc["P"] = traj.dim();
  doc["N"] = traj.count();
  doc["X"] = matrix_to_json(traj.positions());
  doc["Y"] = matrix_to_json(traj.velocities());
  return doc.dump(2);
}

TrajectorySet load_trajectory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open fixture " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return trajectory_from_json_text(ss.str());
}

TrajectorySet resolve_fixture(const std::string& name_or_path) {
  if (name_or_path == "reference")
    return TrajectorySet::reference_fixture();
  if (!name_or_path.empty() && name_or_path.front() == '{')
    return trajectory_from_json_text(name_or_path);
  return load_trajectory(name_or_path);
}

}  // namespace relkin
