#include "colorweak/service.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace colorweak {

using nlohmann::json;
namespace fs = std::filesystem;

std::vector<Trial> make_schedule(std::uint64_t seed, const ScheduleConfig& cfg) {
  if (cfg.step_values.empty() || cfg.steps_per_trial <= 0) throw Error("schedule needs step values");
  if (!(cfg.offset_min <= cfg.offset_max)) throw Error("schedule offset range is empty");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> offset(cfg.offset_min, cfg.offset_max);
  std::uniform_real_distribution<double> jitter(-cfg.switch_jitter, cfg.switch_jitter);
  std::uniform_int_distribution<std::size_t> pick(0, cfg.step_values.size() - 1);
  std::vector<Trial> out;
  for (int rep = 1; rep <= kRepetitions; ++rep) {
    std::vector<int> order(kDirectionCount);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int d : order) {
      Trial t;
      t.direction_index = d;
      t.repetition = rep;
      t.initial_offset = offset(rng);
      for (int k = 0; k < cfg.steps_per_trial; ++k) {
        t.steps.push_back(cfg.step_values[pick(rng)]);
        t.switch_ms.push_back(cfg.switch_ms * (1.0 + jitter(rng)));
      }
      out.push_back(std::move(t));
    }
  }
  return out;
}

json to_json(const Trial& t) {
  return {{"direction_index", t.direction_index},
          {"repetition", t.repetition},
          {"initial_offset", t.initial_offset},
          {"steps", t.steps},
          {"switch_ms", t.switch_ms}};
}

namespace {

enum class State { Open, Finalized };

std::string now_utc() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

LuvColor color_field(const json& body, const char* key) {
  if (!body.contains(key)) throw ServiceError(400, std::string("missing ") + key);
  const json& c = body.at(key);
  if (!c.is_array() || c.size() != 3 || !std::all_of(c.begin(), c.end(), [](const json& x) { return x.is_number(); }))
    throw ServiceError(400, std::string(key) + " must be [L, u, v]");
  return {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
}

int int_field(const json& body, const char* key, int lo, int hi) {
  if (!body.contains(key) || !body.at(key).is_number_integer()) throw ServiceError(400, std::string("missing integer ") + key);
  const int v = body.at(key).get<int>();
  if (v < lo || v > hi)
    throw ServiceError(400, std::string(key) + " must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return v;
}

json luv_json(const LuvColor& c) { return json::array({c.L, c.u, c.v}); }

// Write to a sibling temp file, then rename over the target.
void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.parent_path() / ("." + path.filename().string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw Error("short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace

struct SessionStore::Session {
  mutable std::mutex mutex;
  std::string id;
  std::string observer_id;
  LuvColor test_color;
  std::uint64_t seed = 0;
  State state = State::Open;
  std::string created;
  // keyed by (direction_index, repetition)
  std::map<std::pair<int, int>, MeasurementRecord> matches;

  json summary() const {
    return {{"session_id", id},
            {"observer_id", observer_id},
            {"test_color", luv_json(test_color)},
            {"seed", seed},
            {"records", matches.size()},
            {"state", state == State::Open ? "open" : "finalized"},
            {"created", created}};
  }

  json full() const {
    json j = summary();
    json m = json::array();
    for (const auto& [key, r] : matches)
      m.push_back({{"direction_index", r.direction_index},
                   {"repetition", r.repetition},
                   {"matched_color", luv_json(r.matched_color)},
                   {"timestamp", r.timestamp}});
    j["matches"] = std::move(m);
    return j;
  }
};

SessionStore::SessionStore(fs::path data_dir, ScheduleConfig cfg, std::uint64_t seed)
    : data_dir_(std::move(data_dir)), cfg_(std::move(cfg)), seed_(seed) {
  fs::create_directories(data_dir_ / "sessions");
  // resume sessions left by an earlier run
  for (const auto& entry : fs::directory_iterator(data_dir_ / "sessions")) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw Error("corrupt session file " + entry.path().string() + ": " + e.what());
    }
    auto s = std::make_shared<Session>();
    s->id = j.at("session_id").get<std::string>();
    s->observer_id = j.at("observer_id").get<std::string>();
    s->test_color = color_field(j, "test_color");
    s->seed = j.at("seed").get<std::uint64_t>();
    s->state = j.at("state").get<std::string>() == "finalized" ? State::Finalized : State::Open;
    s->created = j.value("created", "");
    for (const json& m : j.at("matches")) {
      MeasurementRecord r;
      r.observer_id = s->observer_id;
      r.session_id = s->id;
      r.test_color = s->test_color;
      r.direction_index = m.at("direction_index").get<int>();
      r.repetition = m.at("repetition").get<int>();
      r.matched_color = color_field(m, "matched_color");
      r.timestamp = m.value("timestamp", "");
      s->matches[{r.direction_index, r.repetition}] = r;
    }
    if (s->id.size() > 1 && s->id[0] == 's')
      next_id_ = std::max<std::uint64_t>(next_id_, std::stoull(s->id.substr(1)) + 1);
    sessions_[s->id] = std::move(s);
  }
}

std::shared_ptr<SessionStore::Session> SessionStore::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "no session '" + id + "'");
  return it->second;
}

void SessionStore::persist(const Session& s) const {
  write_atomic(data_dir_ / "sessions" / (s.id + ".json"), s.full().dump(1) + "\n");
}

json SessionStore::create(const json& body) {
  if (!body.is_object()) throw ServiceError(400, "body must be a JSON object");
  if (!body.contains("observer_id") || !body.at("observer_id").is_string() ||
      body.at("observer_id").get<std::string>().empty())
    throw ServiceError(400, "missing observer_id");
  const std::string observer = body.at("observer_id").get<std::string>();
  if (observer.find_first_of(",\n\r") != std::string::npos) throw ServiceError(400, "observer_id may not contain , or newlines");
  auto s = std::make_shared<Session>();
  s->observer_id = observer;
  s->test_color = color_field(body, "test_color");
  s->created = now_utc();
  {
    std::lock_guard lock(mutex_);
    char id[32];
    std::snprintf(id, sizeof id, "s%06llu", static_cast<unsigned long long>(next_id_));
    s->id = id;
    if (body.contains("seed")) {
      const json& seed = body.at("seed");
      if (!seed.is_number_integer() || (!seed.is_number_unsigned() && seed.get<std::int64_t>() < 0))
        throw ServiceError(400, "seed must be a nonnegative integer");
      s->seed = body.at("seed").get<std::uint64_t>();
    } else {
      s->seed = std::mt19937_64(seed_ ^ (next_id_ * 0x9e3779b97f4a7c15ull))();
    }
    ++next_id_;
    sessions_[s->id] = s;
  }
  {
    std::lock_guard lock(s->mutex);
    persist(*s);
  }

  json out = s->summary();
  json dirs = json::array();
  for (const auto& d : default_directions()) dirs.push_back({d[0], d[1], d[2]});
  out["directions"] = std::move(dirs);
  json sched = json::array();
  for (const Trial& t : make_schedule(s->seed, cfg_)) sched.push_back(to_json(t));
  out["schedule"] = std::move(sched);
  return out;
}

json SessionStore::record(const std::string& id, const json& body) {
  auto s = find(id);
  if (!body.is_object()) throw ServiceError(400, "body must be a JSON object");
  MeasurementRecord r;
  r.direction_index = int_field(body, "direction_index", 0, kDirectionCount - 1);
  r.repetition = int_field(body, "repetition", 1, kRepetitions);
  r.matched_color = color_field(body, "matched_color");
  r.timestamp = body.contains("timestamp") && body.at("timestamp").is_string() ? body.at("timestamp").get<std::string>()
                                                                               : now_utc();
  if (r.timestamp.find_first_of(",\n\r") != std::string::npos) throw ServiceError(400, "bad timestamp");
  std::lock_guard lock(s->mutex);
  if (s->state != State::Open) throw ServiceError(409, "session " + id + " is finalized");
  r.observer_id = s->observer_id;
  r.session_id = s->id;
  r.test_color = s->test_color;
  const bool replaced = s->matches.count({r.direction_index, r.repetition}) > 0;
  s->matches[{r.direction_index, r.repetition}] = r;
  persist(*s);
  return {{"session_id", id}, {"records", s->matches.size()}, {"replaced", replaced}};
}

json SessionStore::finalize(const std::string& id, const json& body) {
  auto s = find(id);
  const bool partial = body.is_object() && body.value("partial", false);
  std::lock_guard lock(s->mutex);
  if (s->state != State::Open) throw ServiceError(409, "session " + id + " is already finalized");
  const std::size_t full = static_cast<std::size_t>(kDirectionCount) * kRepetitions;
  if (s->matches.empty()) throw ServiceError(422, "session " + id + " has no matches");
  if (!partial && s->matches.size() != full)
    throw ServiceError(422, "session " + id + " has " + std::to_string(s->matches.size()) + " of " +
                                std::to_string(full) + " matches");
  std::vector<MeasurementRecord> rows;
  for (const auto& [key, r] : s->matches) rows.push_back(r);
  append_rows(rows);
  s->state = State::Finalized;
  persist(*s);
  return {{"session_id", id}, {"rows", rows.size()}, {"csv", csv_path().string()}};
}

void SessionStore::append_rows(const std::vector<MeasurementRecord>& rows) {
  std::lock_guard lock(csv_mutex_);
  std::ostringstream content;
  const fs::path path = csv_path();
  if (fs::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    content << in.rdbuf();
  } else {
    const auto dirs = default_directions();
    write_measurement_header(content, dirs);
  }
  for (const auto& r : rows) write_measurement_row(content, r);
  write_atomic(path, content.str());
}

json SessionStore::get(const std::string& id) const {
  auto s = find(id);
  std::lock_guard lock(s->mutex);
  return s->full();
}

json SessionStore::list() const {
  std::vector<std::shared_ptr<Session>> all;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, s] : sessions_) all.push_back(s);
  }
  json out = json::array();
  for (const auto& s : all) {
    std::lock_guard lock(s->mutex);
    out.push_back(s->summary());
  }
  return {{"sessions", std::move(out)}};
}

void mount_session_routes(httplib::Server& server, SessionStore& store, const std::string& static_dir) {
  using httplib::Request;
  using httplib::Response;
  auto handle = [](Response& res, int ok_status, auto&& fn) {
    try {
      res.set_content(fn().dump(), "application/json");
      res.status = ok_status;
    } catch (const ServiceError& e) {
      res.status = e.status();
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    } catch (const std::exception& e) {
      res.status = 500;
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  };
  auto parse = [](const Request& req) {
    if (req.body.empty()) return json::object();
    try {
      return json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw ServiceError(400, std::string("invalid JSON: ") + e.what());
    }
  };

  server.Post("/sessions", [&, handle, parse](const Request& req, Response& res) {
    handle(res, 201, [&] { return store.create(parse(req)); });
  });
  server.Get("/sessions", [&, handle](const Request&, Response& res) { handle(res, 200, [&] { return store.list(); }); });
  server.Get(R"(/sessions/([^/]+))", [&, handle](const Request& req, Response& res) {
    handle(res, 200, [&] { return store.get(req.matches[1].str()); });
  });
  server.Post(R"(/sessions/([^/]+)/matches)", [&, handle, parse](const Request& req, Response& res) {
    handle(res, 200, [&] { return store.record(req.matches[1].str(), parse(req)); });
  });
  server.Post(R"(/sessions/([^/]+)/finalize)", [&, handle, parse](const Request& req, Response& res) {
    handle(res, 200, [&] { return store.finalize(req.matches[1].str(), parse(req)); });
  });
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir))
    throw Error("static directory " + static_dir + " does not exist");
}

}  // namespace colorweak
