#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "catch_amalgamated.hpp"

#include "adp/harness.hpp"
#include "adp/map_io.hpp"
#include "support.hpp"

using namespace adp;
using adp::test::fixture;
using adp::test::scratch_dir;
namespace fs = std::filesystem;

namespace {

AgentParams quick_params() {
  AgentParams p;
  p.k = 10;
  p.eta = 0.35;
  return p;
}

ExperimentConfig small_config(unsigned threads) {
  ExperimentConfig cfg;
  for (const char* id : {"trivial", "corridor-8", "zigzag"}) cfg.maps.push_back(fixture(id));
  cfg.runs = 6;
  cfg.params = quick_params();
  cfg.master_seed = 42;
  cfg.threads = threads;
  return cfg;
}

int run_cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + ADP_CLI + " --fixtures " + (test::fixture_dir() / "maps").string() + " " + args +
                          " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("trial seeds are a pure function of (master, map, run)", "[harness]") {
  CHECK(trial_seed(1, "a", 0) == trial_seed(1, "a", 0));
  CHECK(trial_seed(1, "a", 0) != trial_seed(1, "a", 1));
  CHECK(trial_seed(1, "a", 0) != trial_seed(1, "b", 0));
}

TEST_CASE("run_batch: serial and parallel agree byte for byte", "[harness]") {
  const auto serial = run_batch(small_config(1));
  const auto parallel = run_batch(small_config(3));
  REQUIRE(serial.records.size() == 18);
  CHECK(serial.records == parallel.records);
  CHECK(render_tables(serial.report) == render_tables(parallel.report));
  CHECK(render_tables(serial.report) == render_tables(run_batch(small_config(1)).report));
}

TEST_CASE("run_batch: per-map rates equal a recount of the records", "[harness]") {
  const auto batch = run_batch(small_config(1));
  std::map<std::string, std::pair<int, int>> tally;
  for (const auto& r : batch.records) {
    tally[r.map_id].first += r.success() ? 1 : 0;
    tally[r.map_id].second += 1;
  }
  REQUIRE(batch.report.maps.size() == tally.size());
  for (const auto& s : batch.report.maps) {
    CHECK(s.runs == tally[s.map_id].second);
    CHECK(s.successes == tally[s.map_id].first);
    CHECK(s.success_rate == static_cast<double>(tally[s.map_id].first) / tally[s.map_id].second);
    int hist = 0;
    for (int c : s.score_histogram) hist += c;
    CHECK(hist == s.runs);
  }
  const auto trivial = std::find_if(batch.report.maps.begin(), batch.report.maps.end(),
                                    [](const MapSummary& s) { return s.map_id == "trivial"; });
  CHECK(trivial->success_rate == 1.0);

  std::map<std::string, double> rates;
  for (const auto& s : batch.report.maps) rates[s.map_id] = s.success_rate;
  const auto terciles = difficulty_terciles(rates);
  const std::string summary = render_tables(batch.report).at("summary.csv");
  for (const auto& [id, level] : terciles) {
    const auto row = summary.find("\n" + id + ",");
    REQUIRE(row != std::string::npos);
    const auto eol = summary.find('\n', row + 1);
    CHECK(summary.substr(row + 1, eol - row - 1).ends_with(std::string(",") + to_string(level)));
  }
}

TEST_CASE("attention bins without samples render as empty fields", "[harness]") {
  TrialRecord r;
  r.map_id = "trivial";
  r.actor = Actor::kAgent;
  r.outcome = Outcome::kTimeout;
  r.duration = 1.0;
  r.attention = {{1.0, {30.0, 40.0}}};
  AggregateReport rep;
  rep.maps = summarize({r}, {fixture("trivial")});
  const auto& bins = rep.maps.front().binned_max_attention;
  REQUIRE(bins.size() == 10);
  for (std::size_t b = 0; b + 1 < bins.size(); ++b) CHECK(std::isnan(bins[b]));
  CHECK(bins.back() == 50.0);
  const std::string table = render_tables(rep).at("attention_bins.csv");
  CHECK(table.find("trivial,0,\n") != std::string::npos);
  CHECK(table.find("trivial,9,50") != std::string::npos);
}

TEST_CASE("run_batch: persisted records reproduce the report", "[harness]") {
  const auto cfg = small_config(2);
  const auto batch = run_batch(cfg);
  const auto dir = scratch_dir("persist");
  persist_batch(batch, cfg.maps, dir);
  const auto loaded = load_records(dir / "trials");
  CHECK(loaded.size() == batch.records.size());
  AggregateReport again;
  again.maps = summarize(loaded, load_map_dir(dir / "maps"));
  CHECK(render_tables(again) == render_tables(batch.report));
  CHECK(read_text_file(dir / "summary.csv") == render_tables(batch.report).at("summary.csv"));
  fs::remove_all(dir);
}

TEST_CASE("run_batch: invalid configs", "[harness]") {
  ExperimentConfig cfg = small_config(1);
  cfg.runs = 0;
  CHECK_THROWS_AS(run_batch(cfg), ConfigError);
  cfg.runs = 1;
  cfg.maps.clear();
  CHECK_THROWS_AS(run_batch(cfg), ConfigError);
}

TEST_CASE("population comparison", "[harness]") {
  std::vector<MapSummary> a, b;
  for (int i = 0; i < 5; ++i) {
    MapSummary s;
    s.map_id = "m" + std::to_string(i);
    s.success_rate = i / 4.0;
    s.mean_duration = 10.0 * i;
    a.push_back(s);
    s.success_rate = 0.1 + i / 5.0;
    s.mean_duration = 5.0 + 8.0 * i;
    b.push_back(s);
  }
  const auto c = compare_populations(a, b);
  CHECK(c.rows.size() == 5);
  CHECK(c.success_rate->r == Catch::Approx(1.0));
  CHECK(c.duration->r == Catch::Approx(1.0));
  b.resize(2);
  CHECK_FALSE(compare_populations(a, b).success_rate.has_value());
}

TEST_CASE("grid search", "[harness]") {
  SECTION("grid parsing") {
    const auto g = parse_grid(nlohmann::ordered_json::parse(R"({"m": [2, 4], "eta": [0.1, 0.2, 0.3]})"));
    CHECK(g.cells() == 6);
    CHECK(g.axes[0].first == "mass");
    CHECK(g.assignment(4) == std::vector<std::pair<std::string, double>>{{"mass", 4}, {"eta", 0.2}});
    CHECK_THROWS_AS(parse_grid(nlohmann::ordered_json::parse(R"({"eta": [0.1]})")), ConfigError);
    CHECK_THROWS_AS(parse_grid(nlohmann::ordered_json::parse(R"({"mass": [], "eta": [0.1]})")), ConfigError);
    CHECK_THROWS_AS(parse_grid(nlohmann::ordered_json::parse(R"({"mass": [1], "eta": [0.1], "bogus": [1]})")),
                    ConfigError);
  }
  SECTION("single cell") {
    const auto g = parse_grid(nlohmann::ordered_json::parse(R"({"mass": [3], "eta": [0.3]})"));
    const auto res = grid_search(fixture("trivial"), g, 3, 1, quick_params());
    REQUIRE(res.cells.size() == 1);
    CHECK(res.best == 0);
    CHECK(res.cells[0].params.mass == 3.0);
  }
  SECTION("ordering: success rate, then score, then duration") {
    std::vector<GridCell> cells(4);
    cells[0].success_rate = 0.9;
    cells[0].mean_score = 1.0;
    cells[1].success_rate = 1.0;
    cells[1].mean_score = 0.5;
    cells[1].mean_duration = 20;
    cells[2].success_rate = 1.0;
    cells[2].mean_score = 0.5;
    cells[2].mean_duration = 10;
    cells[3].success_rate = 1.0;
    cells[3].mean_score = 0.4;
    CHECK(best_cell(cells) == 2);
  }
  SECTION("the winner matches a recount of the emitted table") {
    const auto g = parse_grid(nlohmann::ordered_json::parse(R"({"mass": [2, 8], "eta": [0.05, 0.35]})"));
    const auto res = grid_search(fixture("zigzag"), g, 4, 3, quick_params(), 2);
    const std::string table = render_grid_table(res);
    std::istringstream in(table);
    std::string line;
    std::getline(in, line);
    std::vector<GridCell> parsed;
    std::size_t flagged = 99;
    while (std::getline(in, line)) {
      std::vector<std::string> f;
      std::stringstream ls(line);
      for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
      REQUIRE(f.size() == 9);
      GridCell c;
      c.success_rate = std::stod(f[5]);
      c.mean_score = std::stod(f[6]);
      c.mean_duration = std::stod(f[7]);
      if (f[8] == "1") flagged = parsed.size();
      CHECK(std::stoi(f[4]) == res.cells[parsed.size()].successes);
      parsed.push_back(c);
    }
    CHECK(parsed.size() == 4);
    CHECK(best_cell(parsed) == res.best);
    CHECK(flagged == res.best);
    CHECK(render_grid_table(grid_search(fixture("zigzag"), g, 4, 3, quick_params(), 1)) == table);
  }
}

TEST_CASE("CLI exit codes and output directory override", "[harness][cli]") {
  const auto dir = scratch_dir("cli");
  const auto params = dir / "params.json";
  write_text(params, R"({"k": 10, "eta": 0.35})");

  CHECK(run_cli("run --maps trivial --runs 2 --seed 1 --params " + params.string() + " --out " + (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "summary.csv"));
  CHECK(fs::exists(dir / "run" / "trials" / "trivial" / "run_000.json"));

  const auto env_out = dir / "env";
  CHECK(run_cli("run --maps trivial --runs 1 --params " + params.string() + " --out " + (dir / "ignored").string(),
                "ADP_OUT_DIR=" + env_out.string()) == 0);
  CHECK(fs::exists(env_out / "summary.csv"));
  CHECK_FALSE(fs::exists(dir / "ignored"));

  CHECK(run_cli("report --in " + (dir / "run").string()) == 0);
  CHECK(fs::exists(dir / "run" / "report" / "summary.csv"));
  CHECK(run_cli("report --in " + (dir / "run").string() + " --compare " + env_out.string()) == 0);

  CHECK(run_cli("genmaps --seed 3 --count 2 --out " + (dir / "maps").string()) == 0);
  CHECK(fs::exists(dir / "maps" / "gen-3.json"));
  CHECK(fs::exists(dir / "maps" / "gen-4.json"));

  write_text(dir / "grid.json", R"({"mass": [4], "eta": [0.35]})");
  CHECK(run_cli("gridsearch --map trivial --grid " + (dir / "grid.json").string() + " --runs-per-cell 2 --params " +
                params.string() + " --out " + (dir / "grid").string()) == 0);
  CHECK(fs::exists(dir / "grid" / "grid.csv"));
  CHECK(fs::exists(dir / "grid" / "trivial.json"));

  SECTION("config errors exit 2") {
    write_text(dir / "bad-params.json", R"({"k": -1})");
    write_text(dir / "bad-gen.json", R"({"n_holdz": 3})");
    write_text(dir / "impossible-gen.json", R"({"n_holds": 2})");
    write_text(dir / "bad-grid.json", R"({"eta": [0.1]})");
    CHECK(run_cli("run --maps no-such-map --runs 1") == 2);
    CHECK(run_cli("run --maps trivial --runs 0") == 2);
    CHECK(run_cli("run --maps trivial --runs 1 --params " + (dir / "bad-params.json").string()) == 2);
    CHECK(run_cli("genmaps --config " + (dir / "bad-gen.json").string() + " --out " + (dir / "x").string()) == 2);
    CHECK(run_cli("genmaps --config " + (dir / "impossible-gen.json").string() + " --out " + (dir / "x").string()) == 2);
    CHECK(run_cli("gridsearch --map trivial --grid " + (dir / "bad-grid.json").string()) == 2);
    CHECK(run_cli("gridsearch --map trivial --grid " + (dir / "missing.json").string()) == 2);
  }
  SECTION("usage errors are nonzero") {
    CHECK(run_cli("") != 0);
    CHECK(run_cli("run") != 0);
  }
  fs::remove_all(dir);
}
