#pragma once
// Map file format (JSON, "format": 1). See docs/formats.md.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "adp/map_model.hpp"

namespace adp {

inline constexpr int kMapFormatVersion = 1;

namespace detail {

// Field access that reports the JSON pointer of whatever is missing or wrong.
inline const nlohmann::json& require(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) throw MapError(where + ": expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw MapError(where + "/" + key + ": missing field '" + key + "'");
  return *it;
}

inline double require_number(const nlohmann::json& obj, const std::string& key, const std::string& where) {
  const auto& v = require(obj, key, where);
  if (!v.is_number()) throw MapError(where + "/" + key + ": expected a number");
  return v.get<double>();
}

inline Point require_point(const nlohmann::json& obj, const std::string& where) {
  return {require_number(obj, "x", where), require_number(obj, "y", where)};
}

inline nlohmann::json point_json(const Point& p) { return {{"x", p.x}, {"y", p.y}}; }

}  // namespace detail

inline nlohmann::json map_to_json(const MapSpec& map) {
  nlohmann::json holds = nlohmann::json::array();
  for (const Hold& h : map.holds) holds.push_back({{"id", h.id}, {"x", h.position.x}, {"y", h.position.y}});
  nlohmann::json goals = nlohmann::json::array();
  for (const Goal& g : map.goals) goals.push_back({{"x", g.position.x}, {"y", g.position.y}, {"radius", g.radius}});
  nlohmann::json j = {
      {"format", kMapFormatVersion},
      {"id", map.id},
      {"bounds", {{"width", map.bounds.width}, {"height", map.bounds.height}}},
      {"start", detail::point_json(map.start)},
      {"reach_radius", map.reach_radius},
      {"fovea_radius", map.fovea_radius},
      {"goals", std::move(goals)},
      {"holds", std::move(holds)},
  };
  if (!map.notes.empty()) j["notes"] = map.notes;
  return j;
}

inline MapSpec map_from_json(const nlohmann::json& j) {
  using detail::require;
  using detail::require_number;
  if (!j.is_object()) throw MapError("/: expected a JSON object");
  const auto& fmt = require(j, "format", "");
  if (!fmt.is_number_integer() || fmt.get<int>() != kMapFormatVersion)
    throw MapError("/format: unsupported map format (expected " + std::to_string(kMapFormatVersion) + ")");

  MapSpec map;
  const auto& id = require(j, "id", "");
  if (!id.is_string()) throw MapError("/id: expected a string");
  map.id = id.get<std::string>();
  const auto& bounds = require(j, "bounds", "");
  map.bounds = {require_number(bounds, "width", "/bounds"), require_number(bounds, "height", "/bounds")};
  map.start = detail::require_point(require(j, "start", ""), "/start");
  map.reach_radius = require_number(j, "reach_radius", "");
  map.fovea_radius = require_number(j, "fovea_radius", "");

  const auto& goals = require(j, "goals", "");
  if (!goals.is_array()) throw MapError("/goals: expected an array");
  for (std::size_t i = 0; i < goals.size(); ++i) {
    const std::string where = "/goals/" + std::to_string(i);
    map.goals.push_back({detail::require_point(goals[i], where), require_number(goals[i], "radius", where)});
  }

  const auto& holds = require(j, "holds", "");
  if (!holds.is_array()) throw MapError("/holds: expected an array");
  for (std::size_t i = 0; i < holds.size(); ++i) {
    const std::string where = "/holds/" + std::to_string(i);
    const auto& hid = require(holds[i], "id", where);
    if (!hid.is_number_integer()) throw MapError(where + "/id: expected an integer");
    map.holds.push_back({hid.get<int>(), detail::require_point(holds[i], where)});
  }
  if (auto it = j.find("notes"); it != j.end() && it->is_string()) map.notes = it->get<std::string>();

  // Bounds violations are reported with the offending element's location.
  for (std::size_t i = 0; i < map.holds.size(); ++i)
    if (!map.bounds.contains(map.holds[i].position))
      throw MapError("/holds/" + std::to_string(i) + ": coordinate out of bounds");
  for (std::size_t i = 0; i < map.goals.size(); ++i)
    if (!map.bounds.contains(map.goals[i].position))
      throw MapError("/goals/" + std::to_string(i) + ": coordinate out of bounds");
  if (!map.bounds.contains(map.start)) throw MapError("/start: coordinate out of bounds");

  validate(map);
  return map;
}

inline MapSpec parse_map(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MapError(std::string("malformed document at byte ") + std::to_string(e.byte) + ": " + e.what());
  }
  return map_from_json(j);
}

inline std::string serialize_map(const MapSpec& map) { return map_to_json(map).dump(2) + "\n"; }

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline MapSpec load_map(const std::filesystem::path& path) {
  try {
    return parse_map(read_text_file(path));
  } catch (const MapError& e) {
    throw MapError(path.string() + ": " + e.what());
  }
}

inline void save_map(const MapSpec& map, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << serialize_map(map);
}

// All *.json maps in a directory, sorted by map id.
inline std::vector<MapSpec> load_map_dir(const std::filesystem::path& dir) {
  std::vector<MapSpec> maps;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") maps.push_back(load_map(entry.path()));
  }
  std::sort(maps.begin(), maps.end(), [](const MapSpec& a, const MapSpec& b) { return a.id < b.id; });
  return maps;
}

}  // namespace adp
