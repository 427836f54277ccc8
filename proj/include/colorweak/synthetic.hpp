#pragma once

#include "colorweak/thresholds.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

// Synthetic observers and measurement runs shaped like the measurement
// protocol: 77 centres on the L* = 30..70 planes, 14 directions, 4 repetitions.
namespace colorweak::synthetic {

using ObserverModel = std::function<Eigen::Matrix3d(const LuvColor&)>;

/// Smooth, mildly anisotropic threshold field.
ObserverModel normal_observer();
/// Thresholds stretched along a green-weak confusion direction and in lightness.
ObserverModel weak_observer();
/// G(x) * factor.
ObserverModel scaled(ObserverModel base, double factor);
ObserverModel constant(const Eigen::Matrix3d& g);

inline constexpr double kLevels[5] = {30.0, 40.0, 50.0, 60.0, 70.0};
inline constexpr int kCentersPerLevel[5] = {9, 13, 19, 20, 16};

/// In-gamut test colours: per level, the grid points (spacing 12) nearest the
/// neutral axis, 77 in total.
std::vector<LuvColor> protocol_centers();

struct RunOptions {
  std::uint64_t seed = 1;
  /// Relative Gaussian noise on each matched deviation length.
  double noise = 0.0;
};

/// One record per observer x centre x direction x repetition; matches sit on
/// the threshold ellipsoid of the observer model (plus noise).
MeasurementSet simulate_measurements(const std::vector<std::pair<std::string, ObserverModel>>& observers,
                                     const std::vector<LuvColor>& centers, const RunOptions& opts = {});

/// Ellipsoids read straight off a model at the given centres.
std::vector<Ellipsoid> model_ellipsoids(const ObserverModel& model, const std::vector<LuvColor>& centers);

}  // namespace colorweak::synthetic
