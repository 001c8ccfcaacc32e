#pragma once
// Task service core: sessions, bonus tiers, the server-side spotlight and the
// append-only record store. Transport-free; see service_http.hpp for routes.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adp/harness.hpp"
#include "adp/map_io.hpp"
#include "adp/metrics.hpp"
#include "adp/rng.hpp"
#include "adp/trial_record.hpp"

namespace adp {

class ServiceError : public std::runtime_error {
 public:
  enum class Kind { kUnknownSession, kUnknownTrial, kOutOfRange, kDuplicate, kInvalid };
  ServiceError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct BonusPolicy {
  double base = 6.0;
  double low_threshold = 0.60;   // below: tier 0
  double high_threshold = 0.80;  // above: top tier
  double tiers[3] = {0.0, 2.0, 4.0};

  // 60% and 80% themselves fall in the middle tier.
  double bonus(double score_fraction) const {
    if (score_fraction < low_threshold) return tiers[0];
    if (score_fraction > high_threshold) return tiers[2];
    return tiers[1];
  }
  int tier(double score_fraction) const {
    if (score_fraction < low_threshold) return 0;
    return score_fraction > high_threshold ? 2 : 1;
  }
};

struct Session {
  std::string id;
  std::string practice_map;         // served at index 0
  std::vector<std::string> order;   // scored maps, served at 1..n
  bool practice_done = false;
  std::map<std::string, std::string> completed;  // map id -> trial id
  double cumulative_score = 0.0;
  int bonus_tier = 0;

  std::size_t size() const { return order.size() + 1; }
  const std::string& map_at(std::size_t index) const { return index == 0 ? practice_map : order.at(index - 1); }
  // Fraction of the maximum attainable score (one per scored map).
  double score_fraction() const { return order.empty() ? 0.0 : cumulative_score / static_cast<double>(order.size()); }
};

/// Fisher-Yates permutation of `map_set` driven by `seed`; the practice map is
/// prepended at index 0.
inline Session create_session(const std::vector<std::string>& map_set, std::uint64_t seed,
                              const std::string& practice_map = "practice") {
  if (map_set.empty()) throw std::invalid_argument("create_session: empty map set");
  Session s;
  Rng rng(splitmix64(seed));
  s.order = map_set;
  for (std::size_t i = s.order.size(); i > 1; --i) std::swap(s.order[i - 1], s.order[rng.below(i)]);
  char buf[24];
  std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(splitmix64(seed ^ 0x5E55104ULL)));
  s.id = buf;
  s.practice_map = practice_map;
  return s;
}

// Client payload: everything needed to draw the map except hold positions.
inline nlohmann::json client_payload(const MapSpec& map, std::size_t index, bool practice) {
  nlohmann::json goals = nlohmann::json::array();
  for (const Goal& g : map.goals) goals.push_back({{"x", g.position.x}, {"y", g.position.y}, {"radius", g.radius}});
  return {{"format", kMapFormatVersion},
          {"id", map.id},
          {"index", index},
          {"practice", practice},
          {"bounds", {{"width", map.bounds.width}, {"height", map.bounds.height}}},
          {"start", {{"x", map.start.x}, {"y", map.start.y}}},
          {"reach_radius", map.reach_radius},
          {"fovea_radius", map.fovea_radius},
          {"goals", goals}};
}

// Holds inside the fovea disc, with the same inclusion rule as the simulator.
inline std::vector<Hold> reveal(const MapSpec& map, const Point& fovea) {
  TrialState probe;
  probe.fovea_position = fovea;
  return observe(probe, map).visible_holds;
}

struct SubmitResult {
  std::string trial_id;
  double score = 0.0;
  std::vector<std::string> anomalies;
};

/// Sessions live in memory; accepted records are persisted under
/// <store>/trials/<session>/<map>.json plus one line in <store>/index.jsonl.
/// The scored maps are written to <store>/maps so `adp report --in <store>`
/// works directly.
class TaskService {
 public:
  TaskService(std::vector<MapSpec> maps, MapSpec practice, std::filesystem::path store, BonusPolicy policy = {})
      : practice_(std::move(practice)), store_(std::move(store)), policy_(policy) {
    if (maps.empty()) throw ConfigError("task service: empty map set");
    for (auto& m : maps) {
      validate(m);
      if (!min_path(m).reachable()) throw ConfigError("task service: map '" + m.id + "' has no reachable goal");
      ids_.push_back(m.id);
      const std::string id = m.id;
      if (!maps_.emplace(id, std::move(m)).second) throw ConfigError("task service: duplicate map id '" + id + "'");
    }
    if (maps_.count(practice_.id)) throw ConfigError("task service: practice map '" + practice_.id + "' is also scored");
    std::filesystem::create_directories(store_ / "trials");
    for (const auto& [id, m] : maps_) write_text(store_ / "maps" / (id + ".json"), serialize_map(m));
    write_text(store_ / "maps" / (practice_.id + ".json"), serialize_map(practice_));
  }

  const BonusPolicy& policy() const { return policy_; }
  const std::filesystem::path& store() const { return store_; }

  // Seeds come from the caller when given, otherwise from a counter.
  Session open_session(std::optional<std::uint64_t> seed = std::nullopt) {
    std::lock_guard lock(sessions_mu_);
    const std::uint64_t s = seed.value_or(derive_seed(0xADF, "session", next_session_++));
    Session session = create_session(ids_, s, practice_.id);
    while (sessions_.count(session.id)) session.id += "x";
    auto slot = std::make_shared<Slot>();
    slot->session = session;
    sessions_.emplace(session.id, slot);
    return session;
  }

  Session session(const std::string& id) const {
    auto slot = find(id);
    std::lock_guard lock(slot->mu);
    return slot->session;
  }

  nlohmann::json serve_map(const std::string& session_id, std::size_t index) const {
    const auto slot = find(session_id);
    std::lock_guard lock(slot->mu);
    return client_payload(map_for(slot->session, index), index, index == 0);
  }

  std::vector<Hold> reveal_at(const std::string& session_id, std::size_t index, const Point& fovea) const {
    if (!is_finite(fovea)) throw ServiceError(ServiceError::Kind::kInvalid, "fovea position must be finite");
    const auto slot = find(session_id);
    std::lock_guard lock(slot->mu);
    return reveal(map_for(slot->session, index), fovea);
  }

  /// Validates, scores and persists one human trial. Throws ServiceError on
  /// schema violations, foreign maps and duplicate submissions; the store is
  /// untouched in those cases.
  SubmitResult submit_trial(const std::string& session_id, const nlohmann::json& body, Session* updated = nullptr) {
    const auto slot = find(session_id);
    std::lock_guard lock(slot->mu);
    Session& s = slot->session;

    IngestResult ingested;
    try {
      ingested = ingest_record(body);
    } catch (const RecordError& e) {
      throw ServiceError(ServiceError::Kind::kInvalid, e.what());
    }
    TrialRecord& rec = ingested.record;
    if (rec.actor != Actor::kHuman) throw ServiceError(ServiceError::Kind::kInvalid, "actor must be HUMAN");
    if (rec.session_id && *rec.session_id != s.id)
      throw ServiceError(ServiceError::Kind::kInvalid, "record session_id does not match the session");
    rec.session_id = s.id;

    const bool practice = rec.map_id == s.practice_map;
    const MapSpec* map = practice ? &practice_ : nullptr;
    if (!practice) {
      if (std::find(s.order.begin(), s.order.end(), rec.map_id) == s.order.end())
        throw ServiceError(ServiceError::Kind::kInvalid, "map '" + rec.map_id + "' is not part of this session");
      map = &maps_.at(rec.map_id);
    }
    if (s.completed.count(rec.map_id))
      throw ServiceError(ServiceError::Kind::kDuplicate, "map '" + rec.map_id + "' already submitted");

    ScoreResult score;
    try {
      score = trial_score(rec, *map);
    } catch (const RecordError& e) {
      throw ServiceError(ServiceError::Kind::kInvalid, e.what());
    }

    SubmitResult out;
    out.trial_id = s.id + "-" + rec.map_id;
    out.score = score.sigma;
    out.anomalies = ingested.anomalies;
    persist(out.trial_id, s.id, rec);

    s.completed.emplace(rec.map_id, out.trial_id);
    if (practice) {
      s.practice_done = true;
    } else {
      s.cumulative_score += score.sigma;
      s.bonus_tier = policy_.tier(s.score_fraction());
    }
    if (updated) *updated = s;
    return out;
  }

  // The stored document, byte for byte.
  std::string trial_text(const std::string& trial_id) const {
    const auto path = trial_path(trial_id);
    if (!path || !std::filesystem::exists(*path))
      throw ServiceError(ServiceError::Kind::kUnknownTrial, "unknown trial '" + trial_id + "'");
    return read_text_file(*path);
  }

 private:
  struct Slot {
    mutable std::mutex mu;
    Session session;
  };

  std::shared_ptr<Slot> find(const std::string& id) const {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(ServiceError::Kind::kUnknownSession, "unknown session '" + id + "'");
    return it->second;
  }

  const MapSpec& map_for(const Session& s, std::size_t index) const {
    if (index >= s.size())
      throw ServiceError(ServiceError::Kind::kOutOfRange,
                         "map index " + std::to_string(index) + " out of range [0, " + std::to_string(s.size()) + ")");
    return index == 0 ? practice_ : maps_.at(s.map_at(index));
  }

  // Trial ids are "<session>-<map>"; session ids never contain '-'.
  std::optional<std::filesystem::path> trial_path(const std::string& trial_id) const {
    const auto dash = trial_id.find('-');
    if (dash == std::string::npos || trial_id.find("..") != std::string::npos || trial_id.find('/') != std::string::npos)
      return std::nullopt;
    return store_ / "trials" / trial_id.substr(0, dash) / (trial_id.substr(dash + 1) + ".json");
  }

  void persist(const std::string& trial_id, const std::string& session_id, const TrialRecord& rec) {
    const auto path = *trial_path(trial_id);
    std::lock_guard lock(store_mu_);
    if (std::filesystem::exists(path))
      throw ServiceError(ServiceError::Kind::kDuplicate, "trial '" + trial_id + "' already stored");
    write_text(path, serialize_record(rec));
    const nlohmann::json line = {{"trial_id", trial_id},
                                 {"session_id", session_id},
                                 {"map_id", rec.map_id},
                                 {"path", std::filesystem::relative(path, store_).generic_string()}};
    std::ofstream index(store_ / "index.jsonl", std::ios::app);
    index << line.dump() << "\n";
    index.flush();
  }

  std::map<std::string, MapSpec> maps_;
  std::vector<std::string> ids_;
  MapSpec practice_;
  std::filesystem::path store_;
  BonusPolicy policy_;

  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::uint64_t next_session_ = 0;
  std::mutex store_mu_;
};

inline nlohmann::json session_to_json(const Session& s, const BonusPolicy& policy) {
  nlohmann::json completed = nlohmann::json::object();
  for (const auto& [map, trial] : s.completed) completed[map] = trial;
  return {{"id", s.id},
          {"practice_map", s.practice_map},
          {"practice_done", s.practice_done},
          {"order", s.order},
          {"map_count", s.size()},
          {"completed", completed},
          {"cumulative_score", s.cumulative_score},
          {"score_fraction", s.score_fraction()},
          {"bonus_tier", s.bonus_tier},
          {"bonus", policy.bonus(s.score_fraction())},
          {"base_payment", policy.base}};
}

}  // namespace adp
