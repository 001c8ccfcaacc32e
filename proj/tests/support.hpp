#pragma once
// Shared helpers for the test binaries.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <string>

#include "adp/map_io.hpp"

namespace adp::test {

inline std::filesystem::path fixture_dir() { return ADP_FIXTURE_DIR; }

inline MapSpec fixture(const std::string& id) { return load_map(fixture_dir() / "maps" / (id + ".json")); }

// A fresh, empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
  auto dir = std::filesystem::temp_directory_path() /
             ("adp-test-" + tag + "-" + std::to_string(stamp) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Minimal valid map: start at the center, holds given as points.
inline MapSpec make_map(std::vector<Point> holds, Point goal, double goal_radius = 40.0, double reach = 160.0) {
  MapSpec m;
  m.id = "synthetic";
  m.bounds = {1000.0, 1000.0};
  m.start = {500.0, 500.0};
  m.reach_radius = reach;
  m.fovea_radius = 150.0;
  m.goals = {{goal, goal_radius}};
  for (std::size_t i = 0; i < holds.size(); ++i) m.holds.push_back({static_cast<int>(i), holds[i]});
  return m;
}

}  // namespace adp::test
