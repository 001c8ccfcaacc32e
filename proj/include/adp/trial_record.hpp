#pragma once
// TrialRecord: the unified per-trial log shared by agent simulations and the
// human task service. One JSON document per trial; see docs/formats.md.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "adp/planner.hpp"
#include "adp/task_env.hpp"

namespace adp {

inline constexpr int kTrialFormatVersion = 1;
inline constexpr double kHumanSampleRate = 30.0;  // Hz

enum class Actor { kAgent, kHuman };
enum class Outcome { kSuccess, kTimeout };

struct TrialRecord {
  std::string map_id;
  Actor actor = Actor::kAgent;
  Outcome outcome = Outcome::kTimeout;
  double duration = 0.0;
  std::vector<AttentionSample> attention;
  std::vector<NavigationAttempt> navigation;
  int path_length = 0;  // successful moves
  std::optional<int> reached_goal;
  // Agent provenance.
  std::optional<std::uint64_t> seed;
  std::optional<AgentParams> params;
  // Human provenance.
  std::optional<std::string> session_id;

  bool success() const { return outcome == Outcome::kSuccess; }
  friend bool operator==(const TrialRecord&, const TrialRecord&) = default;
};

class RecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- AgentParams <-> JSON -------------------------------------------------

inline nlohmann::json params_to_json(const AgentParams& p) {
  return {
      {"k", p.k},
      {"tau", p.tau},
      {"mass", p.mass},
      {"alpha", p.alpha},
      {"eta", p.eta},
      {"decay", p.decay},
      {"floor_offset", p.floor_offset},
      {"momentum_init", p.momentum_init},
      {"base_drain", p.base_drain},
      {"max_rollout_length", p.max_rollout_length},
      {"well_radius", p.well_radius},
      {"learn_radius", p.learn_radius},
      {"grid_width", p.grid_width},
      {"grid_height", p.grid_height},
  };
}

// Sets one named parameter; throws std::invalid_argument for unknown names.
inline void set_param(AgentParams& p, std::string_view name, double v) {
  if (name == "k") p.k = static_cast<int>(v);
  else if (name == "tau") p.tau = v;
  else if (name == "mass" || name == "m") p.mass = v;
  else if (name == "alpha") p.alpha = v;
  else if (name == "eta") p.eta = v;
  else if (name == "decay" || name == "d") p.decay = v;
  else if (name == "floor_offset" || name == "C") p.floor_offset = v;
  else if (name == "momentum_init") p.momentum_init = v;
  else if (name == "base_drain") p.base_drain = v;
  else if (name == "max_rollout_length") p.max_rollout_length = static_cast<int>(v);
  else if (name == "well_radius") p.well_radius = v;
  else if (name == "learn_radius") p.learn_radius = v;
  else if (name == "grid_width") p.grid_width = static_cast<int>(v);
  else if (name == "grid_height") p.grid_height = static_cast<int>(v);
  else throw std::invalid_argument("unknown agent parameter '" + std::string(name) + "'");
}

inline void check_params(const AgentParams& p) {
  const auto fail = [](const std::string& what) { throw std::invalid_argument("agent parameter " + what); };
  if (p.k < 0) fail("k must be >= 0");
  if (!(p.tau > 0.0)) fail("tau must be > 0");
  if (!(p.mass > 0.0)) fail("mass must be > 0");
  if (!(p.alpha >= 0.0 && p.alpha <= 1.0)) fail("alpha must be in [0, 1]");
  if (!(p.decay >= 0.0 && p.decay <= 1.0)) fail("decay must be in [0, 1]");
  if (!(p.momentum_init > 0.0)) fail("momentum_init must be > 0");
  if (!(p.base_drain >= 0.0)) fail("base_drain must be >= 0");
  if (p.max_rollout_length < 1) fail("max_rollout_length must be >= 1");
  if (!(p.well_radius >= 0.0) || !(p.learn_radius >= 0.0)) fail("radii must be >= 0");
  if (p.grid_width < 16 || p.grid_height < 16) fail("grid must be at least 16x16");
}

// Missing keys keep their defaults; unknown keys are rejected.
inline AgentParams params_from_json(const nlohmann::json& j, AgentParams base = {}) {
  if (!j.is_object()) throw std::invalid_argument("agent parameters: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!value.is_number()) throw std::invalid_argument("agent parameter '" + key + "': expected a number");
    set_param(base, key, value.get<double>());
  }
  check_params(base);
  return base;
}

// ---- TrialRecord <-> JSON -------------------------------------------------

inline nlohmann::json record_to_json(const TrialRecord& r) {
  nlohmann::json t = nlohmann::json::array(), x = nlohmann::json::array(), y = nlohmann::json::array();
  for (const AttentionSample& s : r.attention) {
    t.push_back(s.t);
    x.push_back(s.position.x);
    y.push_back(s.position.y);
  }
  nlohmann::json nav = nlohmann::json::array();
  for (const NavigationAttempt& a : r.navigation) {
    nav.push_back({{"t", a.t},
                   {"hold", a.target_hold ? nlohmann::json(*a.target_hold) : nlohmann::json(nullptr)},
                   {"success", a.success}});
  }
  nlohmann::json j = {
      {"format", kTrialFormatVersion},
      {"map_id", r.map_id},
      {"actor", r.actor == Actor::kAgent ? "agent" : "human"},
      {"outcome", r.outcome == Outcome::kSuccess ? "success" : "timeout"},
      {"duration", r.duration},
      {"path_length", r.path_length},
      {"reached_goal", r.reached_goal ? nlohmann::json(*r.reached_goal) : nlohmann::json(nullptr)},
      {"attention", {{"t", std::move(t)}, {"x", std::move(x)}, {"y", std::move(y)}}},
      {"navigation", std::move(nav)},
  };
  if (r.seed) j["seed"] = *r.seed;
  if (r.params) j["params"] = params_to_json(*r.params);
  if (r.session_id) j["session_id"] = *r.session_id;
  return j;
}

inline std::string serialize_record(const TrialRecord& r) { return record_to_json(r).dump(1) + "\n"; }

struct IngestResult {
  TrialRecord record;
  std::vector<std::string> anomalies;  // tolerated irregularities, e.g. sampling gaps
};

namespace detail {

inline const nlohmann::json& field(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw RecordError(std::string("missing field '") + key + "'");
  return *it;
}

inline double number(const nlohmann::json& v, const std::string& where) {
  if (!v.is_number()) throw RecordError(where + ": expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw RecordError(where + ": non-finite value");
  return d;
}

}  // namespace detail

/// Parses and validates a trial record. Structural problems (malformed rows,
/// non-monotone timestamps, inconsistent counts) throw RecordError; sampling
/// gaps longer than 1.5 nominal periods are reported as anomalies.
inline IngestResult ingest_record(const nlohmann::json& j, double agent_step_duration = EnvConfig{}.step_duration) {
  using detail::field;
  using detail::number;
  if (!j.is_object()) throw RecordError("record: expected a JSON object");
  if (field(j, "format") != kTrialFormatVersion) throw RecordError("format: unsupported trial record format");

  IngestResult out;
  TrialRecord& r = out.record;
  const auto& map_id = field(j, "map_id");
  if (!map_id.is_string()) throw RecordError("map_id: expected a string");
  r.map_id = map_id.get<std::string>();

  const auto& actor = field(j, "actor");
  if (actor == "agent") r.actor = Actor::kAgent;
  else if (actor == "human") r.actor = Actor::kHuman;
  else throw RecordError("actor: expected 'agent' or 'human'");

  const auto& outcome = field(j, "outcome");
  if (outcome == "success") r.outcome = Outcome::kSuccess;
  else if (outcome == "timeout") r.outcome = Outcome::kTimeout;
  else throw RecordError("outcome: expected 'success' or 'timeout'");

  r.duration = number(field(j, "duration"), "duration");
  if (r.duration < 0.0 || r.duration > EnvConfig{}.time_limit + 1e-6) throw RecordError("duration: outside [0, 60] s");

  const auto& pl = field(j, "path_length");
  if (!pl.is_number_integer() || pl.get<int>() < 0) throw RecordError("path_length: expected a non-negative integer");
  r.path_length = pl.get<int>();

  if (auto it = j.find("reached_goal"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw RecordError("reached_goal: expected an integer or null");
    r.reached_goal = it->get<int>();
  }

  const auto& att = field(j, "attention");
  const auto& ts = field(att, "t");
  const auto& xs = field(att, "x");
  const auto& ys = field(att, "y");
  if (!ts.is_array() || !xs.is_array() || !ys.is_array()) throw RecordError("attention: columns must be arrays");
  if (ts.size() != xs.size() || ts.size() != ys.size()) throw RecordError("attention: column lengths differ");
  const double nominal = r.actor == Actor::kHuman ? 1.0 / kHumanSampleRate : agent_step_duration;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const std::string where = "attention row " + std::to_string(i);
    AttentionSample s{number(ts[i], where + " t"), {number(xs[i], where + " x"), number(ys[i], where + " y")}};
    if (!r.attention.empty()) {
      const double gap = s.t - r.attention.back().t;
      if (gap <= 0.0) throw RecordError(where + ": non-monotone timestamp");
      if (gap > 1.5 * nominal)
        out.anomalies.push_back(where + ": sampling gap of " + std::to_string(gap) + " s");
    }
    r.attention.push_back(s);
  }

  const auto& nav = field(j, "navigation");
  if (!nav.is_array()) throw RecordError("navigation: expected an array");
  int successes = 0;
  for (std::size_t i = 0; i < nav.size(); ++i) {
    const std::string where = "navigation row " + std::to_string(i);
    const auto& row = nav[i];
    if (!row.is_object()) throw RecordError(where + ": expected an object");
    NavigationAttempt a;
    a.t = number(field(row, "t"), where + " t");
    const auto& hold = field(row, "hold");
    if (!hold.is_null()) {
      if (!hold.is_number_integer()) throw RecordError(where + " hold: expected an integer or null");
      a.target_hold = hold.get<int>();
    }
    const auto& ok = field(row, "success");
    if (!ok.is_boolean()) throw RecordError(where + " success: expected a boolean");
    a.success = ok.get<bool>();
    if (a.success && !a.target_hold) throw RecordError(where + ": successful attempt without a hold");
    if (!r.navigation.empty() && a.t < r.navigation.back().t) throw RecordError(where + ": non-monotone timestamp");
    successes += a.success ? 1 : 0;
    r.navigation.push_back(a);
  }
  if (successes != r.path_length) throw RecordError("path_length: does not match successful navigation events");
  if (r.success() && r.path_length == 0) throw RecordError("outcome: success without any successful move");

  if (auto it = j.find("seed"); it != j.end()) {
    if (!it->is_number_unsigned()) throw RecordError("seed: expected an unsigned integer");
    r.seed = it->get<std::uint64_t>();
  }
  if (auto it = j.find("params"); it != j.end()) {
    try {
      r.params = params_from_json(*it);
    } catch (const std::invalid_argument& e) {
      throw RecordError(std::string("params: ") + e.what());
    }
  }
  if (auto it = j.find("session_id"); it != j.end()) {
    if (!it->is_string()) throw RecordError("session_id: expected a string");
    r.session_id = it->get<std::string>();
  }
  return out;
}

inline IngestResult ingest_record(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw RecordError(std::string("malformed document: ") + e.what());
  }
  return ingest_record(j);
}

inline IngestResult ingest_record(const std::string& text) { return ingest_record(std::string_view(text)); }
inline IngestResult ingest_record(const char* text) { return ingest_record(std::string_view(text)); }

// Human logs use the same format as agent records.
inline IngestResult ingest_human_log(std::string_view text) { return ingest_record(text); }

}  // namespace adp
