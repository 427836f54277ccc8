#include "colorweak/thresholds.hpp"

#include <Eigen/SVD>

#include <cmath>

namespace colorweak {
namespace {

bool same_center(const LuvColor& a, const LuvColor& b) {
  return std::abs(a.L - b.L) < 1e-9 && std::abs(a.u - b.u) < 1e-9 && std::abs(a.v - b.v) < 1e-9;
}

template <class Measure>
double mean_ratio(std::span<const Ellipsoid> normal, std::span<const Ellipsoid> weak,
                  std::optional<double> level, Measure measure) {
  if (normal.size() != weak.size()) throw Error("observers do not share sample centres");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < normal.size(); ++i) {
    if (!same_center(normal[i].center, weak[i].center))
      throw Error("observers do not share sample centres");
    if (level && std::abs(normal[i].center.L - *level) > 1e-9) continue;
    sum += measure(weak[i].G) / measure(normal[i].G);
    ++n;
  }
  if (n == 0) throw Error("no centres at the requested level");
  return sum / static_cast<double>(n);
}

}  // namespace

Ellipsoid fit_ellipsoid(const LuvColor& center, std::span<const Eigen::Vector3d> deviations) {
  if (deviations.size() < 6) throw Error("degenerate directions: need at least 6 deviations");
  // Unknowns (g00, g11, g22, g01, g02, g12).
  Eigen::MatrixXd a(static_cast<Eigen::Index>(deviations.size()), 6);
  for (std::size_t r = 0; r < deviations.size(); ++r) {
    const auto& v = deviations[r];
    const auto i = static_cast<Eigen::Index>(r);
    a(i, 0) = v[0] * v[0];
    a(i, 1) = v[1] * v[1];
    a(i, 2) = v[2] * v[2];
    a(i, 3) = 2.0 * v[0] * v[1];
    a(i, 4) = 2.0 * v[0] * v[2];
    a(i, 5) = 2.0 * v[1] * v[2];
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv[0] <= 0.0 || sv[5] < 1e-10 * sv[0]) throw Error("degenerate directions");
  const Eigen::VectorXd g =
      svd.solve(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(deviations.size())));
  Eigen::Matrix3d G;
  G << g[0], g[3], g[4], g[3], g[1], g[5], g[4], g[5], g[2];
  Mat spd = project_spd(G);
  return {center, Eigen::Matrix3d(spd)};
}

double ellipsoid_volume(const Eigen::Matrix3d& G) { return 1.0 / std::sqrt(G.determinant()); }

double ellipse_area(const Eigen::Matrix3d& G) {
  return 1.0 / std::sqrt(G.bottomRightCorner<2, 2>().determinant());
}

double volume_ratio(std::span<const Ellipsoid> normal, std::span<const Ellipsoid> weak,
                    std::optional<double> level) {
  return mean_ratio(normal, weak, level, ellipsoid_volume);
}

double area_ratio(std::span<const Ellipsoid> normal, std::span<const Ellipsoid> weak,
                  std::optional<double> level) {
  return mean_ratio(normal, weak, level, ellipse_area);
}

}  // namespace colorweak
