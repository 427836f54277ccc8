#pragma once

#include "colorweak/types.hpp"

#include <functional>
#include <memory>

namespace colorweak {

/// A Riemann metric G(x) over a box in 2D or 3D colour coordinates.
/// Implementations are immutable and safe for concurrent reads.
class Metric {
 public:
  virtual ~Metric() = default;

  virtual int dimension() const = 0;
  virtual Box domain() const = 0;
  /// Symmetric positive-definite matrix at x. Queries outside the domain
  /// are clamped onto it.
  virtual Mat at(const Vec& x) const = 0;
  /// Step for central finite differences of `at`.
  virtual double derivative_step() const = 0;
};

/// Metric given by a closed-form function; used for oracles and synthetic fields.
class FunctionMetric final : public Metric {
 public:
  using Fn = std::function<Mat(const Vec&)>;

  FunctionMetric(Box domain, Fn fn, double derivative_step = 1e-4)
      : domain_(std::move(domain)), fn_(std::move(fn)), step_(derivative_step) {}

  int dimension() const override { return domain_.dimension(); }
  Box domain() const override { return domain_; }
  Mat at(const Vec& x) const override { return fn_(domain_.clamp(x)); }
  double derivative_step() const override { return step_; }

 private:
  Box domain_;
  Fn fn_;
  double step_;
};

/// The chromaticity plane L* = const of a 3D metric: the (u*, v*) block,
/// which is the quadratic form of the ellipse cut from each ellipsoid.
class PlaneMetric final : public Metric {
 public:
  PlaneMetric(std::shared_ptr<const Metric> base, double lightness);

  int dimension() const override { return 2; }
  Box domain() const override;
  Mat at(const Vec& x) const override;
  double derivative_step() const override { return base_->derivative_step(); }
  double lightness() const { return lightness_; }

 private:
  std::shared_ptr<const Metric> base_;
  double lightness_;
};

/// c * G(x); a uniform rescaling of distances by sqrt(c).
class ScaledMetric final : public Metric {
 public:
  ScaledMetric(std::shared_ptr<const Metric> base, double factor)
      : base_(std::move(base)), factor_(factor) {}

  int dimension() const override { return base_->dimension(); }
  Box domain() const override { return base_->domain(); }
  Mat at(const Vec& x) const override { return factor_ * base_->at(x); }
  double derivative_step() const override { return base_->derivative_step(); }

 private:
  std::shared_ptr<const Metric> base_;
  double factor_;
};

/// Symmetrise and clamp eigenvalues to rel_floor * max eigenvalue.
Mat project_spd(const Mat& g, double rel_floor = 1e-8);

/// A constant metric over a box.
std::shared_ptr<const Metric> constant_metric(const Box& domain, const Mat& g);

}  // namespace colorweak
