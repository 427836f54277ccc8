#include "colorweak/service.hpp"

#include <doctest.h>
#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <thread>

using namespace colorweak;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("colorweak_svc_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

int status_of(auto&& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 200;
}

json match(int d, int rep, double du = 0.0) {
  return {{"direction_index", d}, {"repetition", rep}, {"matched_color", {50.0, 1.0 + du, -2.0}}};
}

void fill(SessionStore& store, const std::string& id) {
  for (int rep = 1; rep <= kRepetitions; ++rep)
    for (int d = 0; d < kDirectionCount; ++d) store.record(id, match(d, rep, 0.1 * d));
}

const json kCreate = {{"observer_id", "obs1"}, {"test_color", {50.0, 0.0, 0.0}}, {"seed", 7}};

}  // namespace

TEST_CASE("schedule covers every direction once per repetition") {
  ScheduleConfig cfg;
  const auto a = make_schedule(11, cfg);
  CHECK(a.size() == static_cast<std::size_t>(kDirectionCount * kRepetitions));
  for (int rep = 1; rep <= kRepetitions; ++rep) {
    std::set<int> seen;
    for (const Trial& t : a)
      if (t.repetition == rep) seen.insert(t.direction_index);
    CHECK(seen.size() == static_cast<std::size_t>(kDirectionCount));
  }
  const std::set<double> allowed(cfg.step_values.begin(), cfg.step_values.end());
  for (const Trial& t : a) {
    CHECK(t.initial_offset >= cfg.offset_min);
    CHECK(t.initial_offset <= cfg.offset_max);
    REQUIRE(t.steps.size() == static_cast<std::size_t>(cfg.steps_per_trial));
    for (double s : t.steps) CHECK(allowed.count(s) == 1);
    for (double ms : t.switch_ms) {
      CHECK(ms >= cfg.switch_ms * (1 - cfg.switch_jitter));
      CHECK(ms <= cfg.switch_ms * (1 + cfg.switch_jitter));
    }
  }
  const auto b = make_schedule(11, cfg);
  const auto c = make_schedule(12, cfg);
  bool same = true, differ = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && to_json(a[i]) == to_json(b[i]);
    differ = differ || to_json(a[i]) != to_json(c[i]);
  }
  CHECK(same);
  CHECK(differ);
  CHECK_THROWS_AS(make_schedule(1, ScheduleConfig{.step_values = {}}), Error);
}

TEST_CASE("session lifecycle writes a loadable CSV") {
  TempDir d;
  SessionStore store(d.path);
  const json s = store.create(kCreate);
  const std::string id = s.at("session_id");
  CHECK(s.at("state") == "open");
  CHECK(s.at("directions").size() == static_cast<std::size_t>(kDirectionCount));
  CHECK(s.at("schedule").size() == static_cast<std::size_t>(kDirectionCount * kRepetitions));

  // same seed, same schedule
  const json s2 = store.create(kCreate);
  CHECK(s2.at("schedule") == s.at("schedule"));
  CHECK(s2.at("session_id") != s.at("session_id"));

  CHECK(status_of([&] { store.finalize(id, json::object()); }) == 422);  // empty
  store.record(id, match(0, 1));
  CHECK(status_of([&] { store.finalize(id, json::object()); }) == 422);  // incomplete

  const json again = store.record(id, match(0, 1, 5.0));
  CHECK(again.at("replaced") == true);
  CHECK(again.at("records") == 1);
  fill(store, id);
  CHECK(store.get(id).at("records") == kDirectionCount * kRepetitions);

  const json fin = store.finalize(id, json::object());
  CHECK(fin.at("rows") == kDirectionCount * kRepetitions);
  CHECK(status_of([&] { store.finalize(id, json::object()); }) == 409);
  CHECK(status_of([&] { store.record(id, match(1, 1)); }) == 409);

  const MeasurementSet set = load_measurements(store.csv_path().string());
  REQUIRE(set.records.size() == static_cast<std::size_t>(kDirectionCount * kRepetitions));
  for (const auto& r : set.records) {
    CHECK(r.observer_id == "obs1");
    CHECK(r.session_id == id);
    CHECK(r.matched_color.u == doctest::Approx(1.0 + 0.1 * r.direction_index));
  }

  // partial finalize of the second session appends to the same file
  const std::string id2 = s2.at("session_id");
  store.record(id2, match(3, 2));
  CHECK(store.finalize(id2, {{"partial", true}}).at("rows") == 1);
  CHECK(load_measurements(store.csv_path().string()).records.size() ==
        static_cast<std::size_t>(kDirectionCount * kRepetitions + 1));
  CHECK(store.list().at("sessions").size() == 2);
}

TEST_CASE("request validation") {
  TempDir d;
  SessionStore store(d.path);
  CHECK(status_of([&] { store.get("s999999"); }) == 404);
  CHECK(status_of([&] { store.create(json::object()); }) == 400);
  CHECK(status_of([&] { store.create({{"observer_id", "a,b"}, {"test_color", {50, 0, 0}}}); }) == 400);
  CHECK(status_of([&] { store.create({{"observer_id", "a"}, {"test_color", {50, 0}}}); }) == 400);
  CHECK(status_of([&] { store.create({{"observer_id", "a"}, {"test_color", {50, 0, 0}}, {"seed", -1}}); }) == 400);
  const std::string id = store.create(kCreate).at("session_id");
  CHECK(status_of([&] { store.record(id, match(kDirectionCount, 1)); }) == 400);
  CHECK(status_of([&] { store.record(id, match(0, 0)); }) == 400);
  CHECK(status_of([&] { store.record(id, match(0, kRepetitions + 1)); }) == 400);
  CHECK(status_of([&] { store.record(id, {{"direction_index", 0}, {"repetition", 1}}); }) == 400);
  CHECK(status_of([&] { store.record("nope", match(0, 1)); }) == 404);
}

TEST_CASE("concurrent finalize succeeds exactly once") {
  TempDir d;
  SessionStore store(d.path);
  for (int round = 0; round < 5; ++round) {
    const std::string id = store.create(kCreate).at("session_id");
    fill(store, id);
    int codes[2] = {0, 0};
    std::thread a([&] { codes[0] = status_of([&] { store.finalize(id, json::object()); }); });
    std::thread b([&] { codes[1] = status_of([&] { store.finalize(id, json::object()); }); });
    a.join();
    b.join();
    CHECK(std::min(codes[0], codes[1]) == 200);
    CHECK(std::max(codes[0], codes[1]) == 409);
  }
  CHECK(load_measurements(store.csv_path().string()).records.size() ==
        static_cast<std::size_t>(5 * kDirectionCount * kRepetitions));
}

TEST_CASE("sessions survive a restart") {
  TempDir d;
  std::string open_id, done_id;
  {
    SessionStore store(d.path);
    open_id = store.create(kCreate).at("session_id");
    store.record(open_id, match(2, 3, 1.5));
    done_id = store.create(kCreate).at("session_id");
    fill(store, done_id);
    store.finalize(done_id, json::object());
  }
  SessionStore store(d.path);
  const json s = store.get(open_id);
  CHECK(s.at("state") == "open");
  REQUIRE(s.at("matches").size() == 1);
  CHECK(s.at("matches")[0].at("matched_color")[1] == doctest::Approx(2.5));
  CHECK(store.get(done_id).at("state") == "finalized");
  CHECK(status_of([&] { store.record(done_id, match(0, 1)); }) == 409);
  // fresh ids do not collide with reloaded ones
  const std::string id = store.create(kCreate).at("session_id");
  CHECK(id != open_id);
  CHECK(id != done_id);
}

TEST_CASE("HTTP routes") {
  TempDir d;
  fs::create_directories(d.path / "www");
  std::ofstream(d.path / "www" / "index.html") << "<html>ui</html>";
  SessionStore store(d.path / "data");
  httplib::Server server;
  mount_session_routes(server, store, (d.path / "www").string());
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto post = [&](const std::string& path, const json& body) {
    return client.Post(path, body.dump(), "application/json");
  };

  auto res = post("/sessions", kCreate);
  REQUIRE(res);
  CHECK(res->status == 201);
  const std::string id = json::parse(res->body).at("session_id");
  const std::string base = "/sessions/" + id;

  res = client.Post("/sessions", "{not json", "application/json");
  REQUIRE(res);
  CHECK(res->status == 400);
  CHECK(json::parse(res->body).contains("error"));

  res = post(base + "/finalize", json::object());
  REQUIRE(res);
  CHECK(res->status == 422);

  for (int rep = 1; rep <= kRepetitions; ++rep)
    for (int k = 0; k < kDirectionCount; ++k) {
      res = post(base + "/matches", match(k, rep));
      REQUIRE(res);
      REQUIRE(res->status == 200);
    }
  res = client.Get(base);
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body).at("records") == kDirectionCount * kRepetitions);

  res = post(base + "/finalize", json::object());
  REQUIRE(res);
  CHECK(res->status == 200);
  res = post(base + "/finalize", json::object());
  REQUIRE(res);
  CHECK(res->status == 409);

  res = client.Get("/sessions/s424242");
  REQUIRE(res);
  CHECK(res->status == 404);
  res = client.Get("/sessions");
  REQUIRE(res);
  CHECK(json::parse(res->body).at("sessions").size() == 1);
  res = client.Get("/index.html");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->body == "<html>ui</html>");

  server.stop();
  worker.join();
  CHECK(load_measurements(store.csv_path().string()).records.size() ==
        static_cast<std::size_t>(kDirectionCount * kRepetitions));
}
