// adp: batch simulation, grid search, reports, map generation and the task
// service.

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "adp/harness.hpp"
#include "adp/map_gen.hpp"
#include "adp/map_io.hpp"
#include "adp/service_http.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;

// --maps accepts a directory, a single map file, or a comma-separated list of
// ids resolved against the fixture directory.
std::vector<adp::MapSpec> resolve_maps(const std::string& spec, const fs::path& fixture_dir) {
  if (fs::is_directory(spec)) return adp::load_map_dir(spec);
  if (fs::is_regular_file(spec)) return {adp::load_map(spec)};
  std::vector<adp::MapSpec> maps;
  std::string id;
  std::istringstream ss(spec);
  while (std::getline(ss, id, ',')) {
    if (id.empty()) continue;
    const fs::path p = fixture_dir / (id + ".json");
    if (!fs::exists(p)) throw adp::ConfigError("unknown map '" + id + "' (looked in " + fixture_dir.string() + ")");
    maps.push_back(adp::load_map(p));
  }
  if (maps.empty()) throw adp::ConfigError("no maps selected");
  return maps;
}

fs::path default_fixture_dir() {
  if (const char* env = std::getenv("ADP_FIXTURE_DIR")) return env;
  return "fixtures/maps";
}

nlohmann::ordered_json read_json(const fs::path& p) {
  try {
    return nlohmann::ordered_json::parse(adp::read_text_file(p));
  } catch (const std::exception& e) {
    throw adp::ConfigError(p.string() + ": " + e.what());
  }
}

adp::AgentParams read_params(const fs::path& p) {
  try {
    return adp::params_from_json(nlohmann::json::parse(adp::read_text_file(p)));
  } catch (const std::exception& e) {
    throw adp::ConfigError(p.string() + ": " + e.what());
  }
}

fs::path output_dir(const std::string& flag) {
  if (const char* env = std::getenv("ADP_OUT_DIR"); env && *env) return env;
  return flag;
}

adp::MapGenConfig read_gen_config(const fs::path& p) {
  const auto j = read_json(p);
  adp::MapGenConfig c;
  if (!j.is_object()) throw adp::ConfigError(p.string() + ": expected a JSON object");
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "id_prefix") c.id_prefix = v.get<std::string>();
      else if (key == "width") c.bounds.width = v.get<double>();
      else if (key == "height") c.bounds.height = v.get<double>();
      else if (key == "reach_radius") c.reach_radius = v.get<double>();
      else if (key == "fovea_radius") c.fovea_radius = v.get<double>();
      else if (key == "goal_radius") c.goal_radius = v.get<double>();
      else if (key == "n_holds") c.n_holds = v.get<int>();
      else if (key == "n_goals") c.n_goals = v.get<int>();
      else if (key == "path_hops") c.path_hops = v.get<int>();
      else if (key == "gap_min") c.gap_min = v.get<double>();
      else if (key == "gap_max") c.gap_max = v.get<double>();
      else if (key == "max_turn") c.max_turn = v.get<double>();
      else if (key == "decoy_branches") c.decoy_branches = v.get<int>();
      else if (key == "decoy_length") c.decoy_length = v.get<int>();
      else if (key == "solvable") c.solvable = v.get<bool>();
      else if (key == "retry_budget") c.retry_budget = v.get<int>();
      else throw adp::ConfigError(p.string() + ": unknown generator setting '" + key + "'");
    } catch (const nlohmann::json::type_error&) {
      throw adp::ConfigError(p.string() + ": generator setting '" + key + "' has the wrong type");
    }
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active dynamical prospection: pathfinding agent simulations and task service"};
  app.require_subcommand(1);

  std::string fixtures = default_fixture_dir().string();
  app.add_option("--fixtures", fixtures, "Directory used to resolve map ids")->capture_default_str();

  // run
  auto* run = app.add_subcommand("run", "Run seeded agent trials on a map set");
  std::string run_maps, run_params, run_out = "adp_out";
  int run_runs = adp::kDefaultRunsPerMap;
  std::uint64_t run_seed = 0;
  unsigned run_threads = 1;
  run->add_option("--maps", run_maps, "Map directory, map file, or comma-separated fixture ids")->required();
  run->add_option("--runs", run_runs, "Runs per map")->capture_default_str();
  run->add_option("--seed", run_seed, "Master seed")->capture_default_str();
  run->add_option("--params", run_params, "Agent parameter file, or a directory of <map_id>.json files");
  run->add_option("--out", run_out, "Output directory (ADP_OUT_DIR overrides)")->capture_default_str();
  run->add_option("--threads", run_threads, "Worker threads (0 = all cores)")->capture_default_str();

  // gridsearch
  auto* grid = app.add_subcommand("gridsearch", "Grid search agent parameters on one map");
  std::string grid_map, grid_file, grid_params, grid_out;
  int grid_runs = adp::kDefaultRunsPerMap;
  std::uint64_t grid_seed = 0;
  unsigned grid_threads = 1;
  grid->add_option("--map", grid_map, "Map file or fixture id")->required();
  grid->add_option("--grid", grid_file, "Grid file: {\"mass\": [...], \"eta\": [...], ...}")->required();
  grid->add_option("--runs-per-cell", grid_runs, "Runs per grid cell")->capture_default_str();
  grid->add_option("--seed", grid_seed, "Seed")->capture_default_str();
  grid->add_option("--params", grid_params, "Base agent parameter file");
  grid->add_option("--out", grid_out, "Write grid.csv and best_params.json here (ADP_OUT_DIR overrides)");
  grid->add_option("--threads", grid_threads, "Worker threads (0 = all cores)")->capture_default_str();

  // report
  auto* report = app.add_subcommand("report", "Recompute aggregate tables from persisted trial records");
  std::string rep_in, rep_compare, rep_maps, rep_out;
  report->add_option("--in", rep_in, "Directory of trial records (a run output directory)")->required();
  report->add_option("--compare", rep_compare, "Second record directory (e.g. human logs) to correlate against");
  report->add_option("--maps", rep_maps, "Map directory (defaults to <in>/maps, else the fixtures)");
  report->add_option("--out", rep_out, "Write tables here (defaults to <in>/report)");

  // genmaps
  auto* gen = app.add_subcommand("genmaps", "Generate maps from a generator config");
  std::string gen_config, gen_out = "generated_maps";
  std::uint64_t gen_seed = 0;
  int gen_count = 1;
  gen->add_option("--seed", gen_seed, "First seed")->capture_default_str();
  gen->add_option("--config", gen_config, "Generator config JSON");
  gen->add_option("--count", gen_count, "Number of maps (seeds seed .. seed+count-1)")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory (ADP_OUT_DIR overrides)")->capture_default_str();

  // landscape
  auto* land = app.add_subcommand("landscape", "Dump the agent's energy landscape after N steps of one trial");
  std::string land_map, land_params, land_out;
  std::uint64_t land_seed = 0;
  int land_steps = 10;
  land->add_option("--map", land_map, "Map file or fixture id")->required();
  land->add_option("--seed", land_seed, "Trial seed")->capture_default_str();
  land->add_option("--steps", land_steps, "Agent decisions to simulate")->capture_default_str();
  land->add_option("--params", land_params, "Agent parameter file");
  land->add_option("--out", land_out, "Matrix file (stdout if omitted)");

  // serve
  auto* serve = app.add_subcommand("serve", "Serve maps to the web task client and store human trial records");
  std::string srv_maps, srv_practice = "trivial", srv_store = "task_store", srv_host = "127.0.0.1";
  int srv_port = 8080;
  serve->add_option("--maps", srv_maps, "Scored map set (directory, file, or fixture ids)")->required();
  serve->add_option("--practice", srv_practice, "Practice map (file or fixture id)")->capture_default_str();
  serve->add_option("--store", srv_store, "Record store directory")->capture_default_str();
  serve->add_option("--host", srv_host)->capture_default_str();
  serve->add_option("--port", srv_port)->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      adp::ExperimentConfig cfg;
      cfg.maps = resolve_maps(run_maps, fixtures);
      cfg.runs = run_runs;
      cfg.master_seed = run_seed;
      cfg.threads = run_threads;
      if (!run_params.empty()) {
        if (fs::is_directory(run_params)) {
          for (const auto& m : cfg.maps) {
            const fs::path p = fs::path(run_params) / (m.id + ".json");
            if (fs::exists(p)) cfg.per_map_params[m.id] = read_params(p);
          }
          if (fs::exists(fs::path(run_params) / "default.json")) cfg.params = read_params(fs::path(run_params) / "default.json");
        } else {
          cfg.params = read_params(run_params);
        }
      }
      const auto batch = adp::run_batch(cfg);
      const fs::path out = output_dir(run_out);
      adp::persist_batch(batch, cfg.maps, out);
      std::cout << adp::render_summary(batch.report) << "records and tables written to " << out.string() << "\n";
      return batch.report.failures.empty() ? 0 : 1;
    }

    if (*grid) {
      const auto maps = resolve_maps(grid_map, fixtures);
      adp::AgentParams base;
      if (!grid_params.empty()) base = read_params(grid_params);
      const auto spec = adp::parse_grid(read_json(grid_file));
      const auto res = adp::grid_search(maps.front(), spec, grid_runs, grid_seed, base, grid_threads);
      const std::string table = adp::render_grid_table(res);
      std::cout << table;
      const auto& best = res.cells[res.best];
      std::cout << "best cell " << res.best << ": success " << best.successes << "/" << best.runs << ", mean score "
                << best.mean_score << "\n";
      const fs::path out = output_dir(grid_out);
      if (!out.empty()) {
        adp::write_text(out / "grid.csv", table);
        adp::write_text(out / (maps.front().id + ".json"), adp::params_to_json(best.params).dump(2) + "\n");
      }
      return 0;
    }

    if (*report) {
      std::vector<adp::MapSpec> maps;
      if (!rep_maps.empty()) maps = adp::load_map_dir(rep_maps);
      else if (fs::is_directory(fs::path(rep_in) / "maps")) maps = adp::load_map_dir(fs::path(rep_in) / "maps");
      else if (fs::is_directory(fixtures)) maps = adp::load_map_dir(fixtures);
      const fs::path in_trials = fs::is_directory(fs::path(rep_in) / "trials") ? fs::path(rep_in) / "trials" : fs::path(rep_in);
      std::vector<std::string> anomalies;
      adp::AggregateReport rep;
      rep.maps = adp::summarize(adp::load_records(in_trials, &anomalies), maps);
      if (!rep_compare.empty()) {
        const fs::path cmp = fs::is_directory(fs::path(rep_compare) / "trials") ? fs::path(rep_compare) / "trials" : fs::path(rep_compare);
        rep.comparison = adp::compare_populations(rep.maps, adp::summarize(adp::load_records(cmp, &anomalies), maps));
      }
      const fs::path out = rep_out.empty() ? fs::path(rep_in) / "report" : fs::path(rep_out);
      adp::write_report(rep, out);
      std::cout << adp::render_summary(rep);
      if (!anomalies.empty()) std::cout << anomalies.size() << " sampling anomalies noted\n";
      std::cout << "tables written to " << out.string() << "\n";
      return 0;
    }

    if (*gen) {
      adp::MapGenConfig cfg;
      if (!gen_config.empty()) cfg = read_gen_config(gen_config);
      const fs::path out = output_dir(gen_out);
      fs::create_directories(out);
      for (int i = 0; i < gen_count; ++i) {
        const auto map = adp::generate_map(gen_seed + static_cast<std::uint64_t>(i), cfg);
        adp::save_map(map, out / (map.id + ".json"));
        const auto sol = adp::min_path(map);
        std::cout << map.id << ": " << map.holds.size() << " holds, lambda_min "
                  << (sol.reachable() ? std::to_string(*sol.hop_count) : "unreachable") << "\n";
      }
      return 0;
    }

    if (*land) {
      const auto map = resolve_maps(land_map, fixtures).front();
      adp::AgentParams params;
      if (!land_params.empty()) params = read_params(land_params);
      adp::AdpAgent agent(adp::MapGeometry::of(map), params, land_seed);
      adp::TrialState state = adp::initial_state(map);
      for (int i = 0; i < land_steps && state.status == adp::TrialStatus::kRunning; ++i)
        state = adp::apply_action(std::move(state), agent.step(state, adp::observe(state, map)), map);
      const auto& e = agent.landscape();
      if (land_out.empty()) {
        adp::write_matrix(std::cout, e.energy, e.width, e.height);
      } else {
        std::ofstream f(land_out);
        adp::write_matrix(f, e.energy, e.width, e.height);
      }
      return 0;
    }

    if (*serve) {
      adp::TaskService service(resolve_maps(srv_maps, fixtures), resolve_maps(srv_practice, fixtures).front(), srv_store);
      adp::HttpTaskServer server(service);
      std::cout << "serving on http://" << srv_host << ":" << srv_port << "\n";
      return server.listen(srv_host, srv_port) ? 0 : 1;
    }
  } catch (const adp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const adp::MapError& e) {
    std::cerr << "map error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
