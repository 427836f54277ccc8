#pragma once

#include "colorweak/rnc.hpp"
#include "colorweak/thresholds.hpp"

#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace colorweak {

/// Simulation maps the colour-weak space onto the normal one (w);
/// compensation is the inverse (w^-1).
enum class MapDirection { Simulation, Compensation };

std::string to_string(MapDirection d);
MapDirection map_direction_from_string(const std::string& s);

struct MapResult {
  Vec point;
  /// The radial coordinate ran past the target chart and was pulled back.
  bool clamped = false;
  /// The source point was uncovered and replaced by the nearest chart node.
  bool fallback = false;
};

/// Isometry between two aligned charts: normal coordinates in the source,
/// read back as a point in the target.
class IsometryMap {
 public:
  IsometryMap(std::shared_ptr<const NormalChart> source, std::shared_ptr<const NormalChart> target,
              MapDirection direction);

  const NormalChart& source() const { return *source_; }
  const NormalChart& target() const { return *target_; }
  std::shared_ptr<const NormalChart> source_ptr() const { return source_; }
  std::shared_ptr<const NormalChart> target_ptr() const { return target_; }
  MapDirection direction() const { return direction_; }
  int dimension() const { return source_->dimension(); }

  /// Throws UncoveredPoint when x is outside the source chart.
  Vec apply(const Vec& x) const;
  /// With `fallback`, uncovered points are replaced by the nearest source node.
  /// With `nearest_vertex`, x is snapped to the closest vertex of its cell
  /// instead of interpolated.
  MapResult map(const Vec& x, bool fallback = false, bool nearest_vertex = false) const;
  /// The same charts swapped, with the opposite direction.
  IsometryMap inverse() const;

  void save(std::ostream& out) const;
  static IsometryMap load(std::istream& in);
  void save(const std::string& path) const;
  static IsometryMap load(const std::string& path);

 private:
  std::shared_ptr<const NormalChart> source_;
  std::shared_ptr<const NormalChart> target_;
  MapDirection direction_;
};

/// Checks the alignment contract: same dimension, angular and radial
/// resolution and, for clipped 2D charts, the same chromaticity plane.
IsometryMap compose_isometry(std::shared_ptr<const NormalChart> source, std::shared_ptr<const NormalChart> target,
                             MapDirection direction);

/// Frobenius norm of G_src(x) - D_f^T G_dst(f(x)) D_f with D_f from central
/// differences of the map.
double isometry_residual(const IsometryMap& map, const Metric& field_src, const Metric& field_dst, const Vec& x,
                         double step = 0.5);

/// Monotone 1D isometry between lightness axes, fixing the origin. Stored as a
/// cubic Hermite table of w with exact slopes.
class LightnessMap {
 public:
  static LightnessMap identity(double lo = 0.0, double hi = 100.0);

  /// w: colour-weak lightness to normal lightness.
  double simulate(double l) const;
  /// w^-1.
  double compensate(double l) const;
  double origin() const { return origin_; }
  bool is_identity() const { return identity_; }
  double lo() const { return grid_.front(); }
  double hi() const { return grid_.back(); }
  const std::vector<double>& grid() const { return grid_; }
  const std::vector<double>& values() const { return values_; }

  friend LightnessMap build_lightness_map(const LightnessMetric& g_n, const LightnessMetric& g_w,
                                          double l_origin, int intervals);

 private:
  std::vector<double> grid_, values_, slopes_;
  double origin_ = 0.0;
  bool identity_ = false;
};

/// Solve int_{o}^{w(l)} sqrt(g_n) = int_{o}^{l} sqrt(g_w) on [g_w.lo, g_w.hi];
/// outside that range the map continues linearly.
LightnessMap build_lightness_map(const LightnessMetric& g_n, const LightnessMetric& g_w, double l_origin,
                                 int intervals = 4096);

}  // namespace colorweak
