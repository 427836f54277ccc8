#pragma once

#include "colorweak/colorspace.hpp"
#include "colorweak/metric.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace colorweak {

/// Unit (u*, v*) direction of the 475 nm invariant hue under D65, from the
/// CIE 1931 2-degree colour matching functions (hue angle 252.5 degrees).
Vec hue_475nm();

struct ChartOptions {
  /// Node spacing along each geodesic, in arc length.
  double radial_spacing = 1.0;
  /// RK4 step; reduced if needed so that it divides radial_spacing.
  double step = 0.5;
  double max_radius = 400.0;
  /// Stop geodesics at the sRGB gamut boundary.
  bool clip_to_gamut = true;
  WhitePoint white = WhitePoint::D65();
  /// L* of the chromaticity plane, used by the gamut test of 2D charts.
  double plane_lightness = 50.0;
  /// Additional admissible region.
  std::function<bool(const Vec&)> admissible;
  /// Worker threads for geodesic integration, 0 for hardware concurrency.
  unsigned threads = 0;
};

/// Distance from the origin plus direction angles. 2D: angles[0] in [0, 2pi).
/// 3D: angles[0] polar in [0, pi] from the first frame vector, angles[1]
/// azimuth in [0, 2pi).
struct NormalCoords {
  double r = 0.0;
  std::array<double, 2> angles{0.0, 0.0};
};

struct BarycentricLocation {
  int cell = -1;
  /// -1 for the main chart, otherwise the patch index.
  int patch = -1;
  int count = 0;  // dimension + 1
  std::array<int, 4> vertices{};
  std::array<double, 4> weights{};
};

/// The query lies outside every cell of the chart and its patches.
class UncoveredPoint : public Error {
 public:
  UncoveredPoint(const std::string& what, Vec nearest, double distance)
      : Error(what), nearest_(std::move(nearest)), distance_(distance) {}
  /// Position of the closest chart node and its Euclidean distance.
  const Vec& nearest() const { return nearest_; }
  double distance() const { return distance_; }

 private:
  Vec nearest_;
  double distance_;
};

/// Normal coordinates beyond the extent of the chart's geodesics.
class OutsideChart : public Error {
 public:
  using Error::Error;
};

struct ChartNode {
  Vec position;
  double s = 0.0;
  NormalCoords label;
};

/// Riemann normal coordinates around an origin: a fan (2D) or bundle (3D) of
/// geodesics sampled at equal arc length, meshed into simplices.
///
/// Besides (r, angles) every node carries Cartesian "uniform" coordinates
/// y = r * (unit direction of the angles) in the orthonormal frame. Point
/// location and interpolation run on y, which has no angular seam.
class NormalChart {
 public:
  static NormalChart build_2d(std::shared_ptr<const Metric> metric, const Vec& origin, int n_angles,
                              const Vec& ref_direction, const ChartOptions& opts = {});
  /// `axis` is the zero-polar direction, `second` fixes zero azimuth.
  static NormalChart build_3d(std::shared_ptr<const Metric> metric, const Vec& origin, int n_polar,
                              int n_azimuth, const Vec& axis, const Vec& second,
                              const ChartOptions& opts = {});

  int dimension() const { return dim_; }
  const Vec& origin() const { return origin_; }
  /// G(origin)-orthonormal frame.
  const std::vector<Vec>& frame() const { return frame_; }
  /// {n_angles} in 2D, {n_polar, n_azimuth} in 3D.
  const std::vector<int>& resolution() const { return resolution_; }
  double radial_spacing() const { return spacing_; }
  double step() const { return step_; }
  /// Number of direction slots (n_angles or n_polar * n_azimuth).
  int direction_count() const;
  /// Distinct geodesics; the 3D pole slots share one geodesic each.
  int geodesic_count() const { return static_cast<int>(geodesic_nodes_.size()); }
  /// Node ids of one geodesic, origin first.
  std::vector<int> geodesic(int g) const;
  /// Geodesic index used by a direction slot.
  int slot_geodesic(int slot) const { return slot_geodesic_[static_cast<std::size_t>(slot)]; }

  const std::vector<ChartNode>& nodes() const { return nodes_; }
  const Vec& uniform(int node) const { return uniform_[static_cast<std::size_t>(node)]; }
  /// Simplices as node ids (3 or 4 used).
  const std::vector<std::array<int, 4>>& cells() const { return cells_; }
  /// Cells whose longest edge exceeds 4x the median edge length.
  bool sparse(int cell) const { return sparse_[static_cast<std::size_t>(cell)] != 0; }
  /// Cells with non-positive signed volume in colour space. Cells are stored
  /// positively oriented in uniform coordinates, so these are folds.
  int inverted_cells() const;
  /// Nodes inside the sRGB gamut (all nodes when the chart was not clipped).
  int nodes_in_gamut() const;

  const std::vector<NormalChart>& patches() const { return patches_; }
  /// For a patch: its origin's uniform coordinates in the parent chart.
  const Vec& patch_offset() const { return patch_offset_; }
  const std::shared_ptr<const Metric>& metric() const { return metric_; }
  const ChartOptions& options() const { return opts_; }

  /// Containing cell with convex weights; main chart first, then patches.
  BarycentricLocation locate(const Vec& x) const;
  NormalCoords to_normal_coords(const Vec& x) const;
  Vec from_normal_coords(const NormalCoords& nc) const;
  /// Uniform coordinates of x in this chart's frame.
  Vec to_uniform(const Vec& x) const;
  /// Inverse of to_uniform; throws OutsideChart beyond the geodesic ends.
  Vec from_uniform(const Vec& y) const;
  /// from_uniform that reports failure instead of throwing.
  bool try_from_uniform(const Vec& y, Vec& x) const;
  bool covers(const Vec& x) const;
  /// Closest node position (main chart and patches).
  Vec nearest_node(const Vec& x, double* distance = nullptr) const;

  Vec uniform_from_coords(const NormalCoords& nc) const;
  NormalCoords coords_from_uniform(const Vec& y) const;

  /// Add a secondary chart at `second_origin`, aligned with this chart's
  /// coordinates there. Uses the build metric unless one is given.
  void add_patch(const Vec& second_origin);
  void add_patch(std::shared_ptr<const Metric> metric, const Vec& second_origin);

  void save(std::ostream& out) const;
  static NormalChart load(std::istream& in);
  void save(const std::string& path) const;
  static NormalChart load(const std::string& path);

  friend bool operator==(const NormalChart& a, const NormalChart& b);

  struct Mesh;

 private:
  NormalChart() = default;
  void integrate(const std::vector<Vec>& directions, const std::vector<std::array<double, 2>>& labels);
  void build_cells();
  void finish();
  bool locate_own(const Vec& x, bool uniform_space, BarycentricLocation& loc) const;
  bool from_uniform_own(const Vec& y, Vec& x) const;
  bool to_uniform_own(const Vec& x, Vec& y, bool& sparse_hit) const;

  int dim_ = 2;
  Vec origin_;
  std::vector<Vec> frame_;
  std::vector<int> resolution_;
  double spacing_ = 1.0;
  double step_ = 0.5;
  ChartOptions opts_;
  std::shared_ptr<const Metric> metric_;

  std::vector<ChartNode> nodes_;
  std::vector<std::vector<int>> geodesic_nodes_;  // node ids without the origin
  std::vector<int> slot_geodesic_;
  std::vector<std::array<int, 4>> cells_;

  // patch alignment: y_main = patch_offset + patch uniform coordinates
  Vec patch_offset_;
  std::vector<NormalChart> patches_;

  // derived on build / load
  std::vector<Vec> uniform_;
  std::vector<char> sparse_;
  std::shared_ptr<const Mesh> position_mesh_;
  std::shared_ptr<const Mesh> uniform_mesh_;
};

NormalChart build_chart_2d(std::shared_ptr<const Metric> metric, const Vec& origin, int n_angles = 36,
                           const Vec& ref_direction = hue_475nm(), const ChartOptions& opts = {});
/// Default frame: lightness axis, then the 475 nm hue direction.
NormalChart build_chart_3d(std::shared_ptr<const Metric> metric, const Vec& origin, int n_polar = 13,
                           int n_azimuth = 18, const Vec& axis = vec3(1, 0, 0),
                           const Vec& second = vec3(0, hue_475nm()[0], hue_475nm()[1]),
                           const ChartOptions& opts = {});

/// Ratio of in-gamut node counts, weak over normal.
double grid_point_ratio(const NormalChart& weak, const NormalChart& normal);

}  // namespace colorweak
