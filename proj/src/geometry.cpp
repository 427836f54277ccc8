#include "colorweak/geometry.hpp"

#include <cmath>

namespace colorweak {

Vec Christoffel::acceleration(const Vec& v) const {
  Vec a = Vec::Zero(dim_);
  for (int i = 0; i < dim_; ++i) {
    double acc = 0.0;
    for (int j = 0; j < dim_; ++j)
      for (int k = 0; k < dim_; ++k) acc += (*this)(i, j, k) * v[j] * v[k];
    a[i] = -acc;
  }
  return a;
}

Christoffel christoffel_at(const Metric& metric, const Vec& x) {
  const int dim = metric.dimension();
  const double h = metric.derivative_step();
  Mat g = metric.at(x);
  Eigen::LDLT<Mat> ldlt(g);
  if (ldlt.info() != Eigen::Success || !(ldlt.vectorD().array() > 0.0).all())
    throw Error("metric is singular");
  const Mat ginv = ldlt.solve(Mat::Identity(dim, dim));

  Mat dg[3];
  for (int a = 0; a < dim; ++a) {
    Vec step = Vec::Zero(dim);
    step[a] = h;
    dg[a] = (metric.at(x + step) - metric.at(x - step)) / (2.0 * h);
  }
  Christoffel out(dim);
  for (int j = 0; j < dim; ++j) {
    for (int k = j; k < dim; ++k) {
      // lowered: Gamma_{alpha jk} = 1/2 (d_k g_{alpha j} + d_j g_{alpha k} - d_alpha g_{jk})
      Vec lowered(dim);
      for (int al = 0; al < dim; ++al) lowered[al] = 0.5 * (dg[k](al, j) + dg[j](al, k) - dg[al](j, k));
      const Vec raised = ginv * lowered;
      for (int i = 0; i < dim; ++i) {
        out(i, j, k) = raised[i];
        out(i, k, j) = raised[i];
      }
    }
  }
  return out;
}

Vec unit_normalize(const Mat& g, const Vec& v) {
  const double n2 = v.dot(g * v);
  if (!(n2 > 0.0)) throw Error("cannot normalise a zero vector");
  return v / std::sqrt(n2);
}

Geodesic integrate_geodesic(const Metric& metric, const Vec& origin, const Vec& direction,
                            const GeodesicOptions& opts) {
  if (!(opts.step > 0.0)) throw Error("integration step must be positive");
  if (opts.record_every < 1) throw Error("record_every must be >= 1");
  const Box box = metric.domain();
  if (origin.size() != metric.dimension() || !box.contains(origin, 1e-9))
    throw Error("geodesic origin outside the metric domain");

  Geodesic geo;
  Vec x = origin;
  Vec v = unit_normalize(metric.at(origin), direction);
  geo.initial_direction = v;
  geo.nodes.push_back({x, 0.0, v});

  auto accel = [&](const Vec& p, const Vec& q) { return christoffel_at(metric, p).acceleration(q); };
  auto ok = [&](const Vec& p) {
    return box.contains(p, 1e-9) && (!opts.admissible || opts.admissible(p));
  };

  double s = 0.0;
  int since_record = 0;
  const double eps = 1e-12 * std::max(1.0, opts.max_length);
  while (s < opts.max_length - eps) {
    const double h = std::min(opts.step, opts.max_length - s);
    const Vec k1x = v, k1v = accel(x, v);
    const Vec x2 = x + 0.5 * h * k1x, v2 = v + 0.5 * h * k1v;
    const Vec k2x = v2, k2v = accel(x2, v2);
    const Vec x3 = x + 0.5 * h * k2x, v3 = v + 0.5 * h * k2v;
    const Vec k3x = v3, k3v = accel(x3, v3);
    const Vec x4 = x + h * k3x, v4 = v + h * k3v;
    const Vec k4x = v4, k4v = accel(x4, v4);
    const Vec xn = x + h / 6.0 * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    const Vec vn = v + h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
    if (!ok(xn)) break;
    x = xn;
    v = vn;
    s += h;
    if (++since_record == opts.record_every || s >= opts.max_length - eps) {
      geo.nodes.push_back({x, s, v});
      since_record = 0;
    }
  }
  return geo;
}

double geodesic_length(const Metric& metric, std::span<const Vec> polyline) {
  if (polyline.size() < 2) throw Error("polyline needs at least two points");
  double total = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) {
    const Vec d = polyline[i] - polyline[i - 1];
    const Vec mid = 0.5 * (polyline[i] + polyline[i - 1]);
    total += std::sqrt(d.dot(metric.at(mid) * d));
  }
  return total;
}

}  // namespace colorweak
