#pragma once

#include <filesystem>
#include <string>

#include "relkin/kinematics.hpp"

namespace relkin {

/// Parses {"P":int,"N":int,"X":[[...]],"Y":[[...]]} where X and Y are P rows of N entries.
TrajectorySet trajectory_from_json_text(const std::string& text);
std::string trajectory_to_json_text(const TrajectorySet& traj);

TrajectorySet load_trajectory(const std::filesystem::path& path);

/// "reference" resolves to the built-in fixture, text starting
/// with '{' is parsed as inline JSON, anything else is a path.
TrajectorySet resolve_fixture(const std::string& name_or_path);

}  // namespace relkin
