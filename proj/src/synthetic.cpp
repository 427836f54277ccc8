#include "colorweak/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace colorweak::synthetic {
namespace {

Eigen::Matrix3d from_axes(double a_l, double a1, double a2, double phi, double tilt) {
  // Principal axes: lightness (slightly tilted towards the first chroma axis),
  // and two chroma axes rotated by phi in the (u*, v*) plane.
  const double c = std::cos(phi), s = std::sin(phi);
  Eigen::Matrix3d r;
  r << std::cos(tilt), -std::sin(tilt), 0.0,  //
      std::sin(tilt) * c, std::cos(tilt) * c, -s,  //
      std::sin(tilt) * s, std::cos(tilt) * s, c;
  const Eigen::Vector3d inv_sq(1.0 / (a_l * a_l), 1.0 / (a1 * a1), 1.0 / (a2 * a2));
  return r * inv_sq.asDiagonal() * r.transpose();
}

}  // namespace

ObserverModel normal_observer() {
  return [](const LuvColor& x) {
    const double a_l = 1.0 + 0.15 * std::sin(x.L / 40.0);
    const double a1 = 1.6 + 0.25 * std::cos(x.u / 70.0);
    const double a2 = 2.1 + 0.25 * std::sin(x.v / 70.0);
    const double phi = 0.3 + 0.15 * std::sin((x.u + x.v) / 90.0);
    return from_axes(a_l, a1, a2, phi, 0.05);
  };
}

ObserverModel weak_observer() {
  return [](const LuvColor& x) {
    const double a_l = 1.3 * (1.0 + 0.15 * std::sin(x.L / 40.0)) * (1.0 + 0.1 * std::cos(x.L / 30.0));
    const double a1 = 2.6 * (1.6 + 0.25 * std::cos(x.u / 70.0));
    const double a2 = 1.2 * (2.1 + 0.25 * std::sin(x.v / 70.0));
    const double phi = 0.18 + 0.12 * std::cos((x.u - x.v) / 100.0);
    return from_axes(a_l, a1, a2, phi, 0.08);
  };
}

ObserverModel scaled(ObserverModel base, double factor) {
  return [base = std::move(base), factor](const LuvColor& x) { return Eigen::Matrix3d(factor * base(x)); };
}

ObserverModel constant(const Eigen::Matrix3d& g) {
  return [g](const LuvColor&) { return g; };
}

std::vector<LuvColor> protocol_centers() {
  std::vector<LuvColor> out;
  constexpr double spacing = 12.0;
  for (int level = 0; level < 5; ++level) {
    const double L = kLevels[level];
    std::vector<LuvColor> candidates;
    for (int i = -12; i <= 12; ++i)
      for (int j = -12; j <= 12; ++j) {
        const LuvColor c{L, i * spacing, j * spacing};
        if (in_gamut(c)) candidates.push_back(c);
      }
    std::stable_sort(candidates.begin(), candidates.end(), [](const LuvColor& a, const LuvColor& b) {
      const double ra = a.u * a.u + a.v * a.v, rb = b.u * b.u + b.v * b.v;
      if (ra != rb) return ra < rb;
      return std::atan2(a.v, a.u) < std::atan2(b.v, b.u);
    });
    const auto n = static_cast<std::size_t>(kCentersPerLevel[level]);
    if (candidates.size() < n) throw Error("not enough in-gamut grid points at L*=" + std::to_string(L));
    out.insert(out.end(), candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return out;
}

MeasurementSet simulate_measurements(const std::vector<std::pair<std::string, ObserverModel>>& observers,
                                     const std::vector<LuvColor>& centers, const RunOptions& opts) {
  const auto directions = default_directions();
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<MeasurementRecord> records;
  records.reserve(observers.size() * centers.size() * kDirectionCount * kRepetitions);
  for (const auto& [id, model] : observers) {
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const LuvColor& center = centers[c];
      const Eigen::Matrix3d g = model(center);
      for (int rep = 1; rep <= kRepetitions; ++rep) {
        for (int d = 0; d < kDirectionCount; ++d) {
          const Eigen::Vector3d& dir = directions[static_cast<std::size_t>(d)];
          const double t = 1.0 / std::sqrt(dir.dot(g * dir));
          const double len = t * (1.0 + opts.noise * gauss(rng));
          MeasurementRecord r;
          r.observer_id = id;
          r.session_id = "c" + std::to_string(c) + "-r" + std::to_string(rep);
          r.timestamp = "2024-01-01T00:00:00Z";
          r.test_color = center;
          r.direction_index = d;
          r.repetition = rep;
          r.matched_color = LuvColor::from(center.vec() + len * Vec(dir));
          records.push_back(std::move(r));
        }
      }
    }
  }
  return make_measurement_set(std::move(records), directions);
}

std::vector<Ellipsoid> model_ellipsoids(const ObserverModel& model, const std::vector<LuvColor>& centers) {
  std::vector<Ellipsoid> out;
  out.reserve(centers.size());
  for (const auto& c : centers) out.push_back({c, model(c)});
  return out;
}

}  // namespace colorweak::synthetic
