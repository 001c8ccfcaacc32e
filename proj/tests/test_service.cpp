#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "catch_amalgamated.hpp"

#include "adp/harness.hpp"
#include "adp/map_gen.hpp"
#include "adp/service.hpp"
#include "adp/service_http.hpp"
#include "support.hpp"

using namespace adp;
using adp::test::fixture;
using adp::test::scratch_dir;
namespace fs = std::filesystem;
using Catch::Approx;

namespace {

// Eleven scored maps: the fixtures plus generated ones.
std::vector<MapSpec> eleven_maps() {
  std::vector<MapSpec> maps;
  for (const char* id : {"corridor-8", "zigzag", "detour", "fork-trap", "open-field", "two-goals"}) maps.push_back(fixture(id));
  MapGenConfig cfg;
  for (std::uint64_t s = 1; maps.size() < 11; ++s) maps.push_back(generate_map(s, cfg));
  return maps;
}

// A plausible human record that walks the optimal path plus `extra` wasted
// out-and-back moves.
nlohmann::json human_walk(const MapSpec& m, int extra, bool success = true) {
  const auto sol = min_path(m);
  TrialRecord r;
  r.map_id = m.id;
  r.actor = Actor::kHuman;
  double t = 0.5;
  for (int i = 0; i < 300; ++i) r.attention.push_back({(i + 1) / 30.0, {10.0, 0.0}});
  std::vector<int> route;
  if (success) {
    for (int e = 0; e < extra; ++e) {
      route.push_back(sol.witness[0]);
      route.push_back(sol.witness[0]);
    }
    route.insert(route.end(), sol.witness.begin(), sol.witness.end());
  }
  for (int id : route) {
    r.navigation.push_back({id, t, true});
    t += 0.2;
  }
  r.path_length = static_cast<int>(route.size());
  r.outcome = success ? Outcome::kSuccess : Outcome::kTimeout;
  if (success) r.reached_goal = 0;
  r.duration = success ? 10.0 : 60.0;
  return record_to_json(r);
}

}  // namespace

TEST_CASE("sessions: permutation, determinism, practice first", "[service]") {
  std::vector<std::string> ids;
  for (int i = 0; i < 11; ++i) ids.push_back("map" + std::to_string(i));
  const Session s = create_session(ids, 5, "practice");
  auto sorted = s.order;
  std::sort(sorted.begin(), sorted.end());
  auto expect = ids;
  std::sort(expect.begin(), expect.end());
  CHECK(sorted == expect);
  CHECK(s.size() == 12);
  CHECK(s.map_at(0) == "practice");
  CHECK(create_session(ids, 5).order == s.order);
  CHECK(create_session(ids, 5).id == s.id);
  CHECK(create_session(ids, 6).id != s.id);
  CHECK(s.id.find('-') == std::string::npos);
  CHECK_THROWS_AS(create_session({}, 1), std::invalid_argument);
}

namespace {

// Pearson chi-square of the map-by-position count table against uniform,
// with (n - 1)^2 degrees of freedom.
double position_uniformity_p(int n_maps, int sessions, const std::function<std::uint64_t(int)>& seed_of) {
  std::vector<std::string> ids;
  for (int i = 0; i < n_maps; ++i) ids.push_back(std::to_string(i));
  std::vector<std::vector<double>> counts(n_maps, std::vector<double>(n_maps, 0.0));
  for (int s = 0; s < sessions; ++s) {
    const auto order = create_session(ids, seed_of(s)).order;
    for (int pos = 0; pos < n_maps; ++pos) counts[std::stoi(order[pos])][pos] += 1.0;
  }
  const double expect = static_cast<double>(sessions) / n_maps;
  double chi2 = 0.0;
  for (const auto& row : counts)
    for (double c : row) chi2 += (c - expect) * (c - expect) / expect;
  const double df = (n_maps - 1) * (n_maps - 1);
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(df), chi2));
}

}  // namespace

TEST_CASE("sessions: orders are uniform over positions", "[service]") {
  // The seeds the service itself assigns to successive sessions.
  CHECK(position_uniformity_p(11, 1000, [](int s) { return derive_seed(0xADF, "session", s); }) > 0.01);
  // A large sample guards against a small systematic bias.
  CHECK(position_uniformity_p(11, 100000, [](int s) { return static_cast<std::uint64_t>(s); }) > 0.01);
}

TEST_CASE("bonus policy tiers", "[service]") {
  const BonusPolicy b;
  CHECK(b.bonus(0.0) == 0.0);
  CHECK(b.bonus(0.5999) == 0.0);
  CHECK(b.bonus(0.60) == 2.0);
  CHECK(b.bonus(0.80) == 2.0);
  CHECK(b.bonus(0.8001) == 4.0);
  CHECK(b.bonus(1.0) == 4.0);
  double prev = -1;
  for (int i = 0; i <= 100; ++i) {
    const double v = b.bonus(i / 100.0);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("client payload hides holds; reveal uses the simulator disc", "[service]") {
  const MapSpec m = fixture("open-field");
  const auto payload = client_payload(m, 3, false);
  CHECK_FALSE(payload.contains("holds"));
  CHECK(payload.dump().find(std::to_string(m.holds[0].position.x).substr(0, 5)) == std::string::npos);
  CHECK(payload.at("goals").size() == m.goals.size());

  const auto at_hold = reveal(m, m.holds[4].position);
  CHECK(std::count(at_hold.begin(), at_hold.end(), m.holds[4]) == 1);

  std::set<int> revealed;
  std::vector<Point> foveae;
  for (double x = 0; x <= 1000; x += 170)
    for (double y = 0; y <= 1000; y += 230) {
      foveae.push_back({x, y});
      for (const Hold& h : reveal(m, {x, y})) revealed.insert(h.id);
    }
  for (const Hold& h : m.holds) {
    bool covered = false;
    for (const Point& f : foveae) {
      const double dx = h.position.x - f.x, dy = h.position.y - f.y;
      covered = covered || dx * dx + dy * dy <= m.fovea_radius * m.fovea_radius;
    }
    CHECK(covered == (revealed.count(h.id) == 1));
  }
}

TEST_CASE("task service: submissions, scoring and the store", "[service]") {
  const auto store = scratch_dir("store");
  const auto maps = eleven_maps();
  TaskService svc(maps, fixture("trivial"), store);
  Session s = svc.open_session(123);
  REQUIRE(s.order.size() == 11);

  SECTION("serve and reveal respect the session") {
    CHECK(svc.serve_map(s.id, 0).at("id") == "trivial");
    CHECK(svc.serve_map(s.id, 0).at("practice") == true);
    CHECK(svc.serve_map(s.id, 5).at("id") == s.order[4]);
    CHECK_THROWS_AS(svc.serve_map(s.id, 12), ServiceError);
    CHECK_THROWS_AS(svc.serve_map("nope", 0), ServiceError);
    CHECK_THROWS_AS(svc.reveal_at(s.id, 1, {NAN, 0}), ServiceError);
  }

  SECTION("eleven submissions: totals equal a recount") {
    std::map<std::string, const MapSpec*> by_id;
    for (const auto& m : maps) by_id[m.id] = &m;
    double sigma_sum = 0.0;
    int extra = 0;
    for (const auto& id : s.order) {
      const MapSpec& m = *by_id[id];
      const bool ok = extra % 4 != 3;
      const auto out = svc.submit_trial(s.id, human_walk(m, extra % 3, ok), &s);
      const int lmin = *min_path(m).hop_count;
      const double expect = ok ? static_cast<double>(lmin) / (lmin + 2 * (extra % 3)) : 0.0;
      CHECK(out.score == Approx(expect));
      sigma_sum += expect;
      ++extra;
      CHECK(fs::exists(store / "trials" / s.id / (id + ".json")));
      const auto text = svc.trial_text(out.trial_id);
      CHECK(ingest_record(text).record.map_id == id);
    }
    CHECK(s.cumulative_score == Approx(sigma_sum));
    CHECK(s.score_fraction() == Approx(sigma_sum / 11));
    CHECK(s.bonus_tier == BonusPolicy{}.tier(sigma_sum / 11));
    CHECK(svc.session(s.id).completed.size() == 11);

    // The store is directly consumable by the report pipeline.
    const auto records = load_records(store / "trials");
    CHECK(records.size() == 11);
    const auto summary = summarize(records, load_map_dir(store / "maps"));
    double recount = 0.0;
    for (const auto& ms : summary) recount += ms.mean_score;
    CHECK(recount == Approx(sigma_sum));

    std::ifstream index(store / "index.jsonl");
    int lines = 0;
    for (std::string line; std::getline(index, line);) ++lines;
    CHECK(lines == 11);
  }

  SECTION("duplicates and foreign maps are rejected without touching the store") {
    const MapSpec& first = *std::find_if(maps.begin(), maps.end(), [&](const MapSpec& m) { return m.id == s.order[0]; });
    svc.submit_trial(s.id, human_walk(first, 0));
    const auto path = store / "trials" / s.id / (first.id + ".json");
    const auto before = read_text_file(path);
    try {
      svc.submit_trial(s.id, human_walk(first, 1));
      FAIL("duplicate accepted");
    } catch (const ServiceError& e) {
      CHECK(e.kind() == ServiceError::Kind::kDuplicate);
    }
    CHECK(read_text_file(path) == before);

    auto foreign = human_walk(first, 0);
    foreign["map_id"] = "not-in-session";
    CHECK_THROWS_AS(svc.submit_trial(s.id, foreign), ServiceError);

    auto agent = human_walk(first, 0);
    agent["actor"] = "agent";
    CHECK_THROWS_AS(svc.submit_trial(s.id, agent), ServiceError);

    auto broken = human_walk(first, 0);
    broken["path_length"] = 99;
    CHECK_THROWS_AS(svc.submit_trial(s.id, broken), ServiceError);

    CHECK_THROWS_AS(svc.submit_trial("nope", human_walk(first, 0)), ServiceError);
    CHECK_THROWS_AS(svc.trial_text("../../etc/passwd"), ServiceError);
  }

  SECTION("practice submissions are stored but not scored") {
    const auto out = svc.submit_trial(s.id, human_walk(fixture("trivial"), 0), &s);
    CHECK(out.score == 1.0);
    CHECK(s.practice_done);
    CHECK(s.cumulative_score == 0.0);
  }
  fs::remove_all(store);
}

TEST_CASE("task service rejects bad map sets", "[service]") {
  const auto store = scratch_dir("bad");
  CHECK_THROWS_AS(TaskService({}, fixture("trivial"), store), ConfigError);
  CHECK_THROWS_AS(TaskService({fixture("zigzag"), fixture("zigzag")}, fixture("trivial"), store), ConfigError);
  CHECK_THROWS_AS(TaskService({fixture("trivial")}, fixture("trivial"), store), ConfigError);
  fs::remove_all(store);
}

TEST_CASE("HTTP routes", "[service][http]") {
  const auto store = scratch_dir("http");
  std::vector<MapSpec> maps{fixture("zigzag"), fixture("corridor-8"), fixture("detour")};
  TaskService svc(maps, fixture("trivial"), store);
  HttpTaskServer server(svc);
  const int port = server.bind_any();
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Post("/sessions", R"({"seed": 9})", "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  const auto session = nlohmann::json::parse(res->body);
  const std::string sid = session.at("id");
  CHECK(session.at("map_count") == 4);

  res = cli.Get("/sessions/" + sid + "/maps/1");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto payload = nlohmann::json::parse(res->body);
  CHECK_FALSE(payload.contains("holds"));
  const std::string map_id = payload.at("id");
  const MapSpec& m = *std::find_if(maps.begin(), maps.end(), [&](const MapSpec& x) { return x.id == map_id; });

  const Point at = m.holds[2].position;
  res = cli.Post("/sessions/" + sid + "/reveal", nlohmann::json{{"x", at.x}, {"y", at.y}}.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto revealed = nlohmann::json::parse(res->body);
  CHECK(revealed.at("index") == 1);
  CHECK(revealed.at("holds").size() == reveal(m, at).size());

  res = cli.Post("/sessions/" + sid + "/trials", human_walk(m, 1).dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 201);
  const auto submitted = nlohmann::json::parse(res->body);
  const std::string tid = submitted.at("trial_id");
  CHECK(submitted.at("score").get<double>() == Approx(*min_path(m).hop_count / (*min_path(m).hop_count + 2.0)));

  res = cli.Get("/trials/" + tid);
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto fetched = ingest_record(res->body);
  CHECK(fetched.record.session_id == sid);
  CHECK(fetched.record.map_id == map_id);

  res = cli.Post("/sessions/" + sid + "/trials", human_walk(m, 0).dump(), "application/json");
  CHECK(res->status == 409);
  res = cli.Post("/sessions/" + sid + "/trials", "{not json", "application/json");
  CHECK(res->status == 400);
  res = cli.Get("/sessions/" + sid + "/maps/9");
  CHECK(res->status == 404);
  res = cli.Get("/sessions/nobody/maps/0");
  CHECK(res->status == 404);
  res = cli.Get("/trials/s0-none");
  CHECK(res->status == 404);
  res = cli.Post("/sessions/" + sid + "/reveal", R"({"x": 1})", "application/json");
  CHECK(res->status == 400);

  server.stop();
  worker.join();
  fs::remove_all(store);
}
