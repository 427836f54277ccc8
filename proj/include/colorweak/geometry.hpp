#pragma once

#include "colorweak/metric.hpp"

#include <functional>
#include <span>
#include <vector>

namespace colorweak {

/// Connection coefficients Gamma^i_{jk}, symmetric in (j, k).
class Christoffel {
 public:
  explicit Christoffel(int dim) : dim_(dim), data_(dim * dim * dim, 0.0) {}

  int dimension() const { return dim_; }
  double operator()(int i, int j, int k) const { return data_[(i * dim_ + j) * dim_ + k]; }
  double& operator()(int i, int j, int k) { return data_[(i * dim_ + j) * dim_ + k]; }
  /// -Gamma^i_{jk} v^j v^k, the geodesic acceleration for velocity v.
  Vec acceleration(const Vec& v) const;

 private:
  int dim_;
  std::vector<double> data_;
};

/// Christoffel symbols from central differences of the metric with the
/// metric's derivative step.
Christoffel christoffel_at(const Metric& metric, const Vec& x);

struct GeodesicNode {
  Vec position;
  double s = 0.0;
  Vec velocity;
};

struct Geodesic {
  std::vector<GeodesicNode> nodes;
  Vec initial_direction;  // unit length under G(origin)

  double length() const { return nodes.empty() ? 0.0 : nodes.back().s; }
};

struct GeodesicOptions {
  double step = 0.5;
  double max_length = 1000.0;
  /// Record every n-th RK4 step as a node.
  int record_every = 1;
  /// Extra admissibility test, e.g. the sRGB gamut; integration stops at the
  /// last admissible node.
  std::function<bool(const Vec&)> admissible;
};

/// Classic RK4 on (x, dx/ds) for the geodesic equation, starting at unit
/// G-speed. Stops at max_length, at the metric domain boundary or when the
/// next node is not admissible.
Geodesic integrate_geodesic(const Metric& metric, const Vec& origin, const Vec& direction,
                            const GeodesicOptions& opts = {});

/// Midpoint-rule length of a polyline.
double geodesic_length(const Metric& metric, std::span<const Vec> polyline);

Vec unit_normalize(const Mat& g, const Vec& v);

}  // namespace colorweak
