#pragma once

#include "colorweak/colorspace.hpp"
#include "colorweak/metric.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace colorweak {

inline constexpr int kDirectionCount = 14;
inline constexpr int kRepetitions = 4;

/// The six axis directions followed by the eight (+-1,+-1,+-1)/sqrt(3)
/// diagonals, in (L*, u*, v*) order.
std::vector<Eigen::Vector3d> default_directions();

struct MeasurementRecord {
  std::string observer_id;
  std::string session_id;
  std::string timestamp;
  LuvColor test_color;
  int direction_index = 0;  // 0..13
  int repetition = 1;       // 1..4
  LuvColor matched_color;

  Eigen::Vector3d deviation() const { return matched_color.vec() - test_color.vec(); }
};

struct MeasurementSet {
  std::vector<MeasurementRecord> records;
  /// Distinct test colours, sorted by lightness then first appearance.
  std::vector<LuvColor> centers;
  /// Distinct L* values of the centres, ascending.
  std::vector<double> levels;
  std::vector<Eigen::Vector3d> directions;

  std::vector<std::string> observers() const;
};

/// Parse the measurement CSV. A `#directions` comment block, when present,
/// lists `#<index>,<dL>,<du>,<dv>` lines overriding the default layout.
MeasurementSet parse_measurements(std::istream& in);
MeasurementSet load_measurements(const std::string& path);
/// Derive centers and levels from `records`.
MeasurementSet make_measurement_set(std::vector<MeasurementRecord> records,
                                    std::vector<Eigen::Vector3d> directions = default_directions());

void write_measurement_header(std::ostream& out, std::span<const Eigen::Vector3d> directions);
void write_measurement_row(std::ostream& out, const MeasurementRecord& r);
void write_measurements(std::ostream& out, const MeasurementSet& set);

struct Ellipsoid {
  LuvColor center;
  Eigen::Matrix3d G;  // threshold form: jnd deviations v satisfy v^T G v = 1
};

/// Least-squares fit of v^T G v = 1 over the deviation vectors, projected to SPD.
Ellipsoid fit_ellipsoid(const LuvColor& center, std::span<const Eigen::Vector3d> deviations);

/// Ellipsoids for one observer: deviations are averaged over repetitions per
/// direction, then fitted. Output follows `set.centers` order.
std::vector<Ellipsoid> fit_observer(const MeasurementSet& set, const std::string& observer_id);

enum class Interpolation { CubicBSpline, Akima };

std::string to_string(Interpolation m);
Interpolation interpolation_from_string(const std::string& s);

struct FieldOptions {
  int dimension = 3;
  /// Lattice spacing in CIELUV units.
  double spacing = 5.0;
  /// Gaussian smoothing width in lattice cells; 0 disables smoothing.
  double sigma = 1.5;
  Interpolation method = Interpolation::CubicBSpline;
  int idw_neighbors = 8;
  double idw_power = 2.0;
  /// Lattice box; defaults to the bounding box of the centres.
  std::optional<Box> domain;
};

/// Smooth SPD field on a regular lattice. For dimension 2 the coordinates are
/// (u*, v*) and the samples are the chromaticity blocks of the ellipsoids.
class MetricField final : public Metric {
 public:
  static MetricField build(std::span<const Ellipsoid> ellipsoids, const FieldOptions& opts = {});
  /// Wrap already-smoothed lattice samples; `samples` holds one matrix per
  /// node with axis 0 varying fastest.
  static MetricField from_lattice(const Box& box, std::array<int, 3> counts, std::vector<Mat> samples,
                                  double sigma, Interpolation method);

  int dimension() const override { return dim_; }
  Box domain() const override { return box_; }
  Mat at(const Vec& x) const override;
  double derivative_step() const override;

  std::array<int, 3> counts() const { return counts_; }
  Vec spacing() const;
  double sigma() const { return sigma_; }
  Interpolation method() const { return method_; }
  Mat node(int i, int j, int k = 0) const;
  Vec node_position(int i, int j, int k = 0) const;

  void save(std::ostream& out) const;
  static MetricField load(std::istream& in);
  void save(const std::string& path) const;
  static MetricField load(const std::string& path);

 private:
  MetricField() = default;
  void prepare();
  std::size_t index(int i, int j, int k) const;

  int dim_ = 3;
  Box box_;
  std::array<int, 3> counts_{1, 1, 1};
  double sigma_ = 0.0;
  Interpolation method_ = Interpolation::CubicBSpline;
  std::vector<double> samples_;       // ncomp per node
  std::vector<double> coefficients_;  // B-spline coefficients, same layout
  int ncomp_ = 6;
};

/// A 1D metric along the lightness axis.
struct LightnessMetric {
  std::function<double(double)> g;
  double lo = 0.0;
  double hi = 100.0;

  double operator()(double l) const { return g(l); }
};

/// g(l) = G(l, 0, 0)_LL of a 3D field; the squared inverse jnd half-length on the L axis.
LightnessMetric restrict_to_lightness_axis(std::shared_ptr<const Metric> field);

/// Relative volume det(G)^(-1/2) for 3D, area for the (u*,v*) block.
double ellipsoid_volume(const Eigen::Matrix3d& G);
double ellipse_area(const Eigen::Matrix3d& G);

/// Mean over shared centres of vol(weak) / vol(normal), optionally at one L* level.
double volume_ratio(std::span<const Ellipsoid> normal, std::span<const Ellipsoid> weak,
                    std::optional<double> level = std::nullopt);
/// Same for the chromaticity ellipses.
double area_ratio(std::span<const Ellipsoid> normal, std::span<const Ellipsoid> weak,
                  std::optional<double> level = std::nullopt);

}  // namespace colorweak
