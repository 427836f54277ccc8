#include "colorweak/thresholds.hpp"
#include "csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace colorweak {
namespace {

using csv::split;
using csv::to_double;
using csv::to_int;
using csv::trim;

constexpr const char* kHeader =
    "observer_id,session_id,timestamp,L,u,v,direction_index,repetition,L_match,u_match,v_match";

bool same_color(const LuvColor& a, const LuvColor& b) {
  return a.L == b.L && a.u == b.u && a.v == b.v;
}

}  // namespace

std::vector<Eigen::Vector3d> default_directions() {
  std::vector<Eigen::Vector3d> d;
  for (int axis = 0; axis < 3; ++axis) {
    for (double sign : {1.0, -1.0}) {
      Eigen::Vector3d v = Eigen::Vector3d::Zero();
      v[axis] = sign;
      d.push_back(v);
    }
  }
  const double s = 1.0 / std::sqrt(3.0);
  for (double a : {1.0, -1.0})
    for (double b : {1.0, -1.0})
      for (double c : {1.0, -1.0}) d.emplace_back(a * s, b * s, c * s);
  return d;
}

std::vector<std::string> MeasurementSet::observers() const {
  std::vector<std::string> out;
  for (const auto& r : records)
    if (std::find(out.begin(), out.end(), r.observer_id) == out.end()) out.push_back(r.observer_id);
  return out;
}

MeasurementSet make_measurement_set(std::vector<MeasurementRecord> records,
                                    std::vector<Eigen::Vector3d> directions) {
  MeasurementSet set;
  set.records = std::move(records);
  set.directions = std::move(directions);
  for (const auto& r : set.records) {
    const bool seen = std::any_of(set.centers.begin(), set.centers.end(),
                                  [&](const LuvColor& c) { return same_color(c, r.test_color); });
    if (!seen) set.centers.push_back(r.test_color);
    if (std::find(set.levels.begin(), set.levels.end(), r.test_color.L) == set.levels.end())
      set.levels.push_back(r.test_color.L);
  }
  std::stable_sort(set.centers.begin(), set.centers.end(),
                   [](const LuvColor& a, const LuvColor& b) { return a.L < b.L; });
  std::sort(set.levels.begin(), set.levels.end());
  return set;
}

MeasurementSet parse_measurements(std::istream& in) {
  std::vector<Eigen::Vector3d> directions;
  bool in_directions = false;
  bool header_seen = false;
  std::vector<MeasurementRecord> records;
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line == "#directions") {
        in_directions = true;
        continue;
      }
      if (in_directions) {
        const auto f = split(line.substr(1));
        if (f.size() == 4) {
          const int idx = to_int(f[0], line_no, "direction index");
          if (idx != static_cast<int>(directions.size()))
            throw ParseError("direction indices must be consecutive from 0", line_no);
          Eigen::Vector3d d(to_double(f[1], line_no, "dL"), to_double(f[2], line_no, "du"),
                            to_double(f[3], line_no, "dv"));
          if (d.norm() == 0.0) throw ParseError("zero direction vector", line_no);
          directions.push_back(d.normalized());
          continue;
        }
        in_directions = false;
      }
      continue;
    }
    in_directions = false;
    if (!header_seen) {
      if (line != kHeader) throw ParseError("expected header '" + std::string(kHeader) + "'", line_no);
      header_seen = true;
      continue;
    }
    const auto f = split(line);
    if (f.size() != 11)
      throw ParseError("expected 11 fields, got " + std::to_string(f.size()), line_no);
    MeasurementRecord r;
    r.observer_id = trim(f[0]);
    r.session_id = trim(f[1]);
    r.timestamp = trim(f[2]);
    if (r.observer_id.empty()) throw ParseError("empty observer_id", line_no);
    r.test_color = {to_double(f[3], line_no, "L"), to_double(f[4], line_no, "u"),
                    to_double(f[5], line_no, "v")};
    r.direction_index = to_int(f[6], line_no, "direction_index");
    r.repetition = to_int(f[7], line_no, "repetition");
    r.matched_color = {to_double(f[8], line_no, "L_match"), to_double(f[9], line_no, "u_match"),
                       to_double(f[10], line_no, "v_match")};
    if (r.test_color.L < 0.0 || r.test_color.L > 100.0)
      throw ParseError("test lightness outside [0, 100]", line_no);
    if (r.repetition < 1 || r.repetition > kRepetitions)
      throw ParseError("repetition " + std::to_string(r.repetition) + " outside 1.." +
                           std::to_string(kRepetitions),
                       line_no);
    if (r.direction_index < 0 || r.direction_index >= kDirectionCount)
      throw ParseError("unknown direction index " + std::to_string(r.direction_index), line_no);
    records.push_back(std::move(r));
  }
  if (directions.empty()) directions = default_directions();
  if (directions.size() != static_cast<std::size_t>(kDirectionCount))
    throw ParseError("direction table must list " + std::to_string(kDirectionCount) + " vectors", 0);
  if (records.empty()) throw ParseError("no records", 0);
  return make_measurement_set(std::move(records), std::move(directions));
}

MeasurementSet load_measurements(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_measurements(in);
}

void write_measurement_header(std::ostream& out, std::span<const Eigen::Vector3d> directions) {
  out << "#directions\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < directions.size(); ++i)
    out << '#' << i << ',' << directions[i][0] << ',' << directions[i][1] << ',' << directions[i][2]
        << '\n';
  out << kHeader << '\n';
}

void write_measurement_row(std::ostream& out, const MeasurementRecord& r) {
  out << std::setprecision(17) << r.observer_id << ',' << r.session_id << ',' << r.timestamp << ','
      << r.test_color.L << ',' << r.test_color.u << ',' << r.test_color.v << ',' << r.direction_index
      << ',' << r.repetition << ',' << r.matched_color.L << ',' << r.matched_color.u << ','
      << r.matched_color.v << '\n';
}

void write_measurements(std::ostream& out, const MeasurementSet& set) {
  write_measurement_header(out, set.directions);
  for (const auto& r : set.records) write_measurement_row(out, r);
}

std::vector<Ellipsoid> fit_observer(const MeasurementSet& set, const std::string& observer_id) {
  std::vector<Ellipsoid> out;
  for (const auto& center : set.centers) {
    std::map<int, std::pair<Eigen::Vector3d, int>> per_direction;
    for (const auto& r : set.records) {
      if (r.observer_id != observer_id || !same_color(r.test_color, center)) continue;
      auto& [sum, n] = per_direction.try_emplace(r.direction_index, Eigen::Vector3d::Zero(), 0)
                           .first->second;
      sum += r.deviation();
      ++n;
    }
    if (per_direction.empty()) continue;
    std::vector<Eigen::Vector3d> deviations;
    for (const auto& [dir, acc] : per_direction) deviations.push_back(acc.first / acc.second);
    out.push_back(fit_ellipsoid(center, deviations));
  }
  if (out.empty()) throw Error("no records for observer '" + observer_id + "'");
  return out;
}

}  // namespace colorweak
