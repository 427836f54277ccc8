#pragma once

#include "colorweak/thresholds.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace httplib {
class Server;
}

namespace colorweak {

/// Randomisation ranges for the adjustment schedule.
struct ScheduleConfig {
  /// Initial comparison offset along the trial direction, in CIELUV units.
  double offset_min = 1.0;
  double offset_max = 4.0;
  /// Increments are drawn from this set, one per wheel/key step.
  std::vector<double> step_values{0.25, 0.5, 1.0};
  int steps_per_trial = 48;
  /// Delay before the next comparison colour is shown, jittered by +-jitter.
  double switch_ms = 250.0;
  double switch_jitter = 0.2;
};

struct Trial {
  int direction_index = 0;
  int repetition = 1;
  double initial_offset = 0.0;
  std::vector<double> steps;
  std::vector<double> switch_ms;
};

/// kRepetitions rounds, each a shuffled pass over the kDirectionCount directions.
std::vector<Trial> make_schedule(std::uint64_t seed, const ScheduleConfig& cfg = {});
nlohmann::json to_json(const Trial& t);

/// Error carrying an HTTP status.
class ServiceError : public Error {
 public:
  ServiceError(int status, const std::string& what) : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Measurement sessions backed by `data_dir`: session state in
/// sessions/<id>.json, finalized records appended to measurements.csv.
class SessionStore {
 public:
  explicit SessionStore(std::filesystem::path data_dir, ScheduleConfig cfg = {}, std::uint64_t seed = 0);

  /// Body: {observer_id, test_color: [L,u,v], seed?}. Returns the session
  /// with its direction table and schedule.
  nlohmann::json create(const nlohmann::json& body);
  /// Body: {direction_index, repetition, matched_color: [L,u,v], timestamp?}.
  /// Re-posting the same (direction, repetition) replaces the earlier match.
  nlohmann::json record(const std::string& id, const nlohmann::json& body);
  /// Body: {partial?}. Appends the records to the CSV; a second call is a conflict.
  nlohmann::json finalize(const std::string& id, const nlohmann::json& body);
  nlohmann::json get(const std::string& id) const;
  nlohmann::json list() const;

  std::filesystem::path csv_path() const { return data_dir_ / "measurements.csv"; }
  const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;
  void persist(const Session& s) const;
  void append_rows(const std::vector<MeasurementRecord>& rows);

  std::filesystem::path data_dir_;
  ScheduleConfig cfg_;
  std::uint64_t seed_;
  mutable std::mutex mutex_;  // guards sessions_ and next_id_
  std::mutex csv_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

/// Routes: POST /sessions, POST /sessions/{id}/matches,
/// POST /sessions/{id}/finalize, GET /sessions, GET /sessions/{id}, plus
/// `static_dir` mounted at / when not empty.
void mount_session_routes(httplib::Server& server, SessionStore& store, const std::string& static_dir = {});

}  // namespace colorweak
