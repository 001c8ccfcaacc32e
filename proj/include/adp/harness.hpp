#pragma once
// Batch experiment driver: seeded trials, the multi-run protocol, parameter
// grid search and aggregate reports.

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "adp/agent.hpp"
#include "adp/map_io.hpp"
#include "adp/map_model.hpp"
#include "adp/metrics.hpp"
#include "adp/rng.hpp"
#include "adp/task_env.hpp"
#include "adp/trial_record.hpp"

namespace adp {

inline constexpr int kDefaultRunsPerMap = 81;
inline constexpr int kAttentionBins = 10;

/// Runs one agent trial to SUCCESS or TIMEOUT. Deterministic in
/// (map, params, seed, env).
inline TrialRecord run_trial(const MapSpec& map, const AgentParams& params, std::uint64_t seed,
                             const EnvConfig& env = {}) {
  AdpAgent agent(MapGeometry::of(map), params, seed);
  TrialState state = initial_state(map);
  while (state.status == TrialStatus::kRunning) {
    const Observation obs = observe(state, map);
    const Action action = agent.step(state, obs);
    state = apply_action(std::move(state), action, map, env);
  }
  TrialRecord r;
  r.map_id = map.id;
  r.actor = Actor::kAgent;
  r.outcome = state.status == TrialStatus::kSuccess ? Outcome::kSuccess : Outcome::kTimeout;
  r.duration = state.elapsed(env);
  r.attention = std::move(state.attention);
  r.navigation = std::move(state.attempts);
  r.path_length = static_cast<int>(state.path.size());
  if (state.reached_goal) r.reached_goal = static_cast<int>(*state.reached_goal);
  r.seed = seed;
  r.params = params;
  return r;
}

// Runs fn(i) for i in [0, n) on `threads` workers (0 = hardware concurrency).
// Results must be written to per-index slots; scheduling order is irrelevant.
inline void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(threads);
  {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < threads; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = next++; i < n; i = next++) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

inline std::uint64_t trial_seed(std::uint64_t master, const std::string& map_id, int run) {
  return derive_seed(master, map_id, static_cast<std::uint64_t>(run));
}

// ---- Aggregation ----------------------------------------------------------

struct MapSummary {
  std::string map_id;
  std::optional<int> lambda_min;
  int runs = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_score = 0.0;
  std::vector<int> score_histogram;     // 10 bins over [0, 1]
  double mean_duration = 0.0;
  double median_duration = 0.0;
  std::vector<int> duration_histogram;  // 6 bins of 10 s
  std::vector<int> goal_counts;         // per goal index
  double mean_attention_distance = 0.0;
  double beyond_reach_fraction = 0.0;
  std::vector<double> binned_max_attention;  // mean over trials of per-bin maxima; NaN when no trial has samples
  double mean_delay_to_first_move = 0.0;
};

struct ComparisonRow {
  std::string map_id;
  double success_rate_a = 0.0;
  double success_rate_b = 0.0;
  double mean_duration_a = 0.0;
  double mean_duration_b = 0.0;
};

struct Comparison {
  std::vector<ComparisonRow> rows;
  std::optional<Correlation> success_rate;
  std::optional<Correlation> duration;
};

struct TrialFailure {
  std::string map_id;
  int run = 0;
  std::string error;
};

struct AggregateReport {
  std::vector<MapSummary> maps;
  std::vector<TrialFailure> failures;
  std::optional<Comparison> comparison;
};

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Folds records into per-map summaries. Maps are reported in id order;
/// `maps` supplies optimal path lengths and goal counts (a record whose map
/// is unknown is still counted, with scores treated as unavailable).
inline std::vector<MapSummary> summarize(const std::vector<TrialRecord>& records, const std::vector<MapSpec>& maps) {
  std::map<std::string, std::vector<const TrialRecord*>> by_map;
  for (const TrialRecord& r : records) by_map[r.map_id].push_back(&r);
  std::map<std::string, const MapSpec*> map_index;
  for (const MapSpec& m : maps) map_index[m.id] = &m;

  std::vector<MapSummary> out;
  for (const auto& [id, recs] : by_map) {
    MapSummary s;
    s.map_id = id;
    s.runs = static_cast<int>(recs.size());
    s.score_histogram.assign(10, 0);
    s.duration_histogram.assign(6, 0);
    const MapSpec* map = map_index.count(id) ? map_index[id] : nullptr;
    std::optional<PathSolution> opt;
    if (map) {
      opt = min_path(*map);
      if (opt->reachable()) s.lambda_min = *opt->hop_count;
      s.goal_counts.assign(map->goals.size(), 0);
    }
    std::vector<double> durations;
    std::vector<double> bin_sum(kAttentionBins, 0.0);
    std::vector<int> bin_n(kAttentionBins, 0);
    double score_sum = 0.0, att_sum = 0.0, delay_sum = 0.0;
    std::size_t att_n = 0, beyond_n = 0;
    for (const TrialRecord* r : recs) {
      if (r->success()) ++s.successes;
      double sigma = 0.0;
      if (s.lambda_min) sigma = score_from(*s.lambda_min, r->path_length, r->success()).sigma;
      score_sum += sigma;
      s.score_histogram[static_cast<std::size_t>(std::min(9, static_cast<int>(std::floor(sigma * 10.0))))]++;
      durations.push_back(r->duration);
      s.duration_histogram[static_cast<std::size_t>(std::clamp(static_cast<int>(std::floor(r->duration / 10.0)), 0, 5))]++;
      if (r->reached_goal) {
        const auto g = static_cast<std::size_t>(*r->reached_goal);
        if (g >= s.goal_counts.size()) s.goal_counts.resize(g + 1, 0);
        s.goal_counts[g]++;
      }
      const AttentionDistance ad = attention_distance(r->attention);
      for (double d : ad.distances) att_sum += d;
      att_n += ad.distances.size();
      if (map) beyond_n += segment_reachable(r->attention, map->reach_radius).beyond.size();
      const auto bins = binned_max_attention(*r, kAttentionBins);
      for (int b = 0; b < kAttentionBins; ++b) {
        if (bins[static_cast<std::size_t>(b)]) {
          bin_sum[static_cast<std::size_t>(b)] += *bins[static_cast<std::size_t>(b)];
          bin_n[static_cast<std::size_t>(b)]++;
        }
      }
      delay_sum += delay_to_first_move(*r);
    }
    const double n = static_cast<double>(s.runs);
    s.success_rate = s.successes / n;
    s.mean_score = score_sum / n;
    double dur_sum = 0.0;
    for (double d : durations) dur_sum += d;
    s.mean_duration = dur_sum / n;
    s.median_duration = median(durations);
    s.mean_attention_distance = att_n ? att_sum / static_cast<double>(att_n) : 0.0;
    s.beyond_reach_fraction = att_n ? static_cast<double>(beyond_n) / static_cast<double>(att_n) : 0.0;
    for (int b = 0; b < kAttentionBins; ++b)
      s.binned_max_attention.push_back(bin_n[static_cast<std::size_t>(b)] ? bin_sum[static_cast<std::size_t>(b)] / bin_n[static_cast<std::size_t>(b)]
                                                                      : std::numeric_limits<double>::quiet_NaN());
    s.mean_delay_to_first_move = delay_sum / n;
    out.push_back(std::move(s));
  }
  return out;
}

// Per-map success rate and duration of population B against population A,
// over the maps both populations cover.
inline Comparison compare_populations(const std::vector<MapSummary>& a, const std::vector<MapSummary>& b) {
  Comparison c;
  std::map<std::string, const MapSummary*> bi;
  for (const MapSummary& s : b) bi[s.map_id] = &s;
  std::vector<double> ra, rb, da, db;
  for (const MapSummary& s : a) {
    auto it = bi.find(s.map_id);
    if (it == bi.end()) continue;
    c.rows.push_back({s.map_id, s.success_rate, it->second->success_rate, s.mean_duration, it->second->mean_duration});
    ra.push_back(s.success_rate);
    rb.push_back(it->second->success_rate);
    da.push_back(s.mean_duration);
    db.push_back(it->second->mean_duration);
  }
  if (c.rows.size() >= 3) {
    c.success_rate = correlate(ra, rb);
    c.duration = correlate(da, db);
  }
  return c;
}

// ---- Report rendering -----------------------------------------------------

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

// Shortest text that parses back to the same double.
inline std::string exact(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <typename T>
std::string join(const std::vector<T>& v, const char* sep, std::string (*f)(T)) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += f(v[i]);
  }
  return out;
}

inline std::string int_str(int v) { return std::to_string(v); }

}  // namespace detail

// Machine-readable tables, keyed by file name.
inline std::map<std::string, std::string> render_tables(const AggregateReport& report) {
  using detail::fmt;
  std::map<std::string, std::string> t;
  std::string summary =
      "map_id,lambda_min,runs,successes,success_rate,mean_score,mean_duration,median_duration,"
      "mean_attention_distance,beyond_reach_fraction,mean_delay_to_first_move,difficulty\n";
  // Terciles over this population only; blank with fewer than three maps.
  std::map<std::string, Difficulty> difficulty;
  if (report.maps.size() >= 3) {
    std::map<std::string, double> rates;
    for (const MapSummary& s : report.maps) rates[s.map_id] = s.success_rate;
    difficulty = difficulty_terciles(rates);
  }
  std::string scores = "map_id,bin_lo,bin_hi,count\n";
  std::string durations = "map_id,bin_lo_s,bin_hi_s,count\n";
  std::string goals = "map_id,goal_index,count\n";
  std::string attention = "map_id,bin,mean_max_attention_distance\n";
  for (const MapSummary& s : report.maps) {
    summary += s.map_id + "," + (s.lambda_min ? std::to_string(*s.lambda_min) : "") + "," + std::to_string(s.runs) + "," +
               std::to_string(s.successes) + "," + fmt(s.success_rate) + "," + fmt(s.mean_score) + "," +
               fmt(s.mean_duration) + "," + fmt(s.median_duration) + "," + fmt(s.mean_attention_distance) + "," +
               fmt(s.beyond_reach_fraction) + "," + fmt(s.mean_delay_to_first_move) + "," +
               (difficulty.count(s.map_id) ? to_string(difficulty.at(s.map_id)) : "") + "\n";
    for (std::size_t b = 0; b < s.score_histogram.size(); ++b)
      scores += s.map_id + "," + fmt(b / 10.0) + "," + fmt((b + 1) / 10.0) + "," + std::to_string(s.score_histogram[b]) + "\n";
    for (std::size_t b = 0; b < s.duration_histogram.size(); ++b)
      durations += s.map_id + "," + std::to_string(b * 10) + "," + std::to_string((b + 1) * 10) + "," +
                   std::to_string(s.duration_histogram[b]) + "\n";
    for (std::size_t g = 0; g < s.goal_counts.size(); ++g)
      goals += s.map_id + "," + std::to_string(g) + "," + std::to_string(s.goal_counts[g]) + "\n";
    for (std::size_t b = 0; b < s.binned_max_attention.size(); ++b)
      attention += s.map_id + "," + std::to_string(b) + "," +
                   (std::isnan(s.binned_max_attention[b]) ? std::string() : fmt(s.binned_max_attention[b])) + "\n";
  }
  t["summary.csv"] = summary;
  t["score_distribution.csv"] = scores;
  t["duration_distribution.csv"] = durations;
  t["goal_distribution.csv"] = goals;
  t["attention_bins.csv"] = attention;
  if (!report.failures.empty()) {
    std::string f = "map_id,run,error\n";
    for (const TrialFailure& e : report.failures) f += e.map_id + "," + std::to_string(e.run) + ",\"" + e.error + "\"\n";
    t["failures.csv"] = f;
  }
  if (report.comparison) {
    std::string c = "map_id,success_rate_a,success_rate_b,mean_duration_a,mean_duration_b\n";
    for (const ComparisonRow& r : report.comparison->rows)
      c += r.map_id + "," + fmt(r.success_rate_a) + "," + fmt(r.success_rate_b) + "," + fmt(r.mean_duration_a) + "," +
           fmt(r.mean_duration_b) + "\n";
    t["comparison.csv"] = c;
  }
  return t;
}

inline std::string render_summary(const AggregateReport& report) {
  std::ostringstream os;
  os << "map                 runs  success  mean_score  mean_dur(s)  attn_dist  beyond\n";
  for (const MapSummary& s : report.maps) {
    char line[256];
    std::snprintf(line, sizeof line, "%-18s %5d  %6.3f   %9.3f  %11.2f  %9.1f  %6.3f\n", s.map_id.c_str(), s.runs,
                  s.success_rate, s.mean_score, s.mean_duration, s.mean_attention_distance, s.beyond_reach_fraction);
    os << line;
  }
  if (!report.failures.empty()) os << report.failures.size() << " trial(s) failed; see failures.csv\n";
  if (report.comparison) {
    const auto show = [&](const char* name, const std::optional<Correlation>& c) {
      os << name << ": ";
      if (c) {
        char line[128];
        std::snprintf(line, sizeof line, "Pearson r = %.4f, p = %.4g (n = %zu)\n", c->r, c->p, c->n);
        os << line;
      } else {
        os << "undefined (fewer than 3 shared maps or zero variance)\n";
      }
    };
    show("success rate", report.comparison->success_rate);
    show("duration", report.comparison->duration);
  }
  return os.str();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + tmp);
    out << text;
  }
  std::filesystem::rename(tmp, path);
}

inline void write_report(const AggregateReport& report, const std::filesystem::path& dir) {
  for (const auto& [name, text] : render_tables(report)) write_text(dir / name, text);
  write_text(dir / "summary.txt", render_summary(report));
}

// ---- Batches --------------------------------------------------------------

struct ExperimentConfig {
  std::vector<MapSpec> maps;
  int runs = kDefaultRunsPerMap;
  AgentParams params;
  std::map<std::string, AgentParams> per_map_params;  // overrides `params`
  std::uint64_t master_seed = 0;
  unsigned threads = 1;
  EnvConfig env;

  const AgentParams& params_for(const std::string& map_id) const {
    auto it = per_map_params.find(map_id);
    return it == per_map_params.end() ? params : it->second;
  }
};

struct BatchResult {
  std::vector<TrialRecord> records;  // map order, then run index
  AggregateReport report;
};

inline BatchResult run_batch(const ExperimentConfig& cfg) {
  if (cfg.runs < 1) throw ConfigError("runs must be >= 1");
  if (cfg.maps.empty()) throw ConfigError("no maps configured");
  const std::size_t runs = static_cast<std::size_t>(cfg.runs);
  const std::size_t n = cfg.maps.size() * runs;
  std::vector<std::optional<TrialRecord>> slots(n);
  std::vector<std::string> errors(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    const MapSpec& map = cfg.maps[i / runs];
    const int run = static_cast<int>(i % runs);
    try {
      slots[i] = run_trial(map, cfg.params_for(map.id), trial_seed(cfg.master_seed, map.id, run), cfg.env);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });
  BatchResult out;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) out.records.push_back(std::move(*slots[i]));
    else out.report.failures.push_back({cfg.maps[i / runs].id, static_cast<int>(i % runs), errors[i]});
  }
  out.report.maps = summarize(out.records, cfg.maps);
  return out;
}

// Persists records as <dir>/trials/<map_id>/run_<NNN>.json and maps under
// <dir>/maps so the report can be recomputed from disk.
inline void persist_batch(const BatchResult& batch, const std::vector<MapSpec>& maps, const std::filesystem::path& dir) {
  std::map<std::string, int> counters;
  for (const TrialRecord& r : batch.records) {
    char name[32];
    std::snprintf(name, sizeof name, "run_%03d.json", counters[r.map_id]++);
    write_text(dir / "trials" / r.map_id / name, serialize_record(r));
  }
  for (const MapSpec& m : maps) write_text(dir / "maps" / (m.id + ".json"), serialize_map(m));
  write_report(batch.report, dir);
}

// Every *.json record below `dir` (recursively), in path order.
inline std::vector<TrialRecord> load_records(const std::filesystem::path& dir, std::vector<std::string>* anomalies = nullptr) {
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<TrialRecord> out;
  for (const auto& f : files) {
    IngestResult res;
    try {
      res = ingest_record(read_text_file(f));
    } catch (const RecordError& e) {
      throw RecordError(f.string() + ": " + e.what());
    }
    if (anomalies)
      for (auto& a : res.anomalies) anomalies->push_back(f.string() + ": " + a);
    out.push_back(std::move(res.record));
  }
  return out;
}

// ---- Grid search ----------------------------------------------------------

struct GridSpec {
  std::vector<std::pair<std::string, std::vector<double>>> axes;

  std::size_t cells() const {
    std::size_t n = 1;
    for (const auto& a : axes) n *= a.second.size();
    return n;
  }

  // Cartesian product, last axis fastest.
  std::vector<std::pair<std::string, double>> assignment(std::size_t cell) const {
    std::vector<std::pair<std::string, double>> out(axes.size());
    for (std::size_t a = axes.size(); a-- > 0;) {
      const auto& values = axes[a].second;
      out[a] = {axes[a].first, values[cell % values.size()]};
      cell /= values.size();
    }
    return out;
  }
};

inline std::string canonical_axis(const std::string& name) {
  if (name == "m") return "mass";
  if (name == "d") return "decay";
  if (name == "C") return "floor_offset";
  return name;
}

// {"mass": [...], "eta": [...], ...}; axes keep document order.
inline GridSpec parse_grid(const nlohmann::ordered_json& j) {
  if (!j.is_object()) throw ConfigError("grid: expected a JSON object of axis -> values");
  GridSpec g;
  AgentParams probe;
  for (const auto& [key, values] : j.items()) {
    if (!values.is_array() || values.empty()) throw ConfigError("grid axis '" + key + "': expected a non-empty array");
    std::vector<double> v;
    for (const auto& x : values) {
      if (!x.is_number()) throw ConfigError("grid axis '" + key + "': values must be numbers");
      v.push_back(x.get<double>());
    }
    try {
      set_param(probe, key, v.front());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
    g.axes.emplace_back(canonical_axis(key), std::move(v));
  }
  const auto has = [&](const char* n) {
    return std::any_of(g.axes.begin(), g.axes.end(), [&](const auto& a) { return a.first == n; });
  };
  if (!has("mass") || !has("eta")) throw ConfigError("grid: axes must include at least mass (m) and eta");
  return g;
}

struct GridCell {
  std::vector<std::pair<std::string, double>> assignment;
  AgentParams params;
  int runs = 0;
  int successes = 0;
  double success_rate = 0.0;
  double mean_score = 0.0;
  double mean_duration = 0.0;
};

struct GridResult {
  std::vector<GridCell> cells;
  std::size_t best = 0;
};

// Success rate, then mean score, then shorter mean duration; earlier cells
// win exact ties.
inline bool grid_cell_better(const GridCell& a, const GridCell& b) {
  if (a.success_rate != b.success_rate) return a.success_rate > b.success_rate;
  if (a.mean_score != b.mean_score) return a.mean_score > b.mean_score;
  return a.mean_duration < b.mean_duration;
}

inline std::size_t best_cell(const std::vector<GridCell>& cells) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < cells.size(); ++i)
    if (grid_cell_better(cells[i], cells[best])) best = i;
  return best;
}

/// Evaluates every grid cell with the same `runs_per_cell` trial seeds, so
/// cells differ only in parameters.
inline GridResult grid_search(const MapSpec& map, const GridSpec& grid, int runs_per_cell, std::uint64_t seed,
                              const AgentParams& base = {}, unsigned threads = 1, const EnvConfig& env = {}) {
  if (grid.axes.empty() || grid.cells() == 0) throw ConfigError("grid: no cells");
  if (runs_per_cell < 1) throw ConfigError("runs_per_cell must be >= 1");
  const PathSolution opt = min_path(map);
  GridResult res;
  for (std::size_t c = 0; c < grid.cells(); ++c) {
    GridCell cell;
    cell.assignment = grid.assignment(c);
    cell.params = base;
    for (const auto& [name, v] : cell.assignment) set_param(cell.params, name, v);
    check_params(cell.params);
    cell.runs = runs_per_cell;
    res.cells.push_back(std::move(cell));
  }
  const std::size_t runs = static_cast<std::size_t>(runs_per_cell);
  std::vector<TrialRecord> records(res.cells.size() * runs);
  parallel_for(records.size(), threads, [&](std::size_t i) {
    records[i] = run_trial(map, res.cells[i / runs].params, trial_seed(seed, map.id, static_cast<int>(i % runs)), env);
  });
  for (std::size_t c = 0; c < res.cells.size(); ++c) {
    GridCell& cell = res.cells[c];
    double score = 0.0, dur = 0.0;
    for (std::size_t r = 0; r < runs; ++r) {
      const TrialRecord& rec = records[c * runs + r];
      cell.successes += rec.success() ? 1 : 0;
      if (opt.reachable()) score += score_from(*opt.hop_count, rec.path_length, rec.success()).sigma;
      dur += rec.duration;
    }
    cell.success_rate = static_cast<double>(cell.successes) / runs_per_cell;
    cell.mean_score = score / runs_per_cell;
    cell.mean_duration = dur / runs_per_cell;
  }
  res.best = best_cell(res.cells);
  return res;
}

inline std::string render_grid_table(const GridResult& res) {
  std::string out = "cell";
  if (!res.cells.empty())
    for (const auto& [name, v] : res.cells.front().assignment) out += "," + name;
  out += ",runs,successes,success_rate,mean_score,mean_duration,best\n";
  for (std::size_t c = 0; c < res.cells.size(); ++c) {
    const GridCell& cell = res.cells[c];
    out += std::to_string(c);
    for (const auto& [name, v] : cell.assignment) out += "," + detail::exact(v);
    out += "," + std::to_string(cell.runs) + "," + std::to_string(cell.successes) + "," + detail::exact(cell.success_rate) +
           "," + detail::exact(cell.mean_score) + "," + detail::exact(cell.mean_duration) + "," +
           (c == res.best ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace adp
