#include "colorweak/metric.hpp"

#include <Eigen/Eigenvalues>

namespace colorweak {

PlaneMetric::PlaneMetric(std::shared_ptr<const Metric> base, double lightness)
    : base_(std::move(base)), lightness_(lightness) {
  if (base_->dimension() != 3) throw Error("plane restriction needs a 3D metric");
}

Box PlaneMetric::domain() const {
  const Box b = base_->domain();
  return {vec2(b.lo[1], b.lo[2]), vec2(b.hi[1], b.hi[2])};
}

Mat PlaneMetric::at(const Vec& x) const {
  const Mat g = base_->at(vec3(lightness_, x[0], x[1]));
  return g.bottomRightCorner(2, 2);
}

Mat project_spd(const Mat& g, double rel_floor) {
  const Mat sym = 0.5 * (g + g.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es;
  es.computeDirect(sym);
  Vec lambda = es.eigenvalues();
  const double top = lambda.maxCoeff();
  if (!(top > 0.0)) throw Error("matrix has no positive eigenvalue");
  const double floor = rel_floor * top;
  bool changed = false;
  for (int i = 0; i < lambda.size(); ++i) {
    if (lambda[i] < floor) {
      lambda[i] = floor;
      changed = true;
    }
  }
  if (!changed) return sym;
  Mat out = es.eigenvectors() * lambda.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

std::shared_ptr<const Metric> constant_metric(const Box& domain, const Mat& g) {
  return std::make_shared<FunctionMetric>(domain, [g](const Vec&) { return g; });
}

}  // namespace colorweak
