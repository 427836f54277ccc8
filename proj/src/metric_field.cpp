#include "colorweak/archive.hpp"
#include "colorweak/thresholds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace colorweak {
namespace {

constexpr const char* kMagic = "CWMF1";
constexpr int kMaxComp = 6;

using Comp = std::array<double, kMaxComp>;

int components_for(int dim) { return dim == 3 ? 6 : 3; }

void to_components(const Mat& g, int dim, double* out) {
  if (dim == 3) {
    out[0] = g(0, 0);
    out[1] = g(1, 1);
    out[2] = g(2, 2);
    out[3] = g(0, 1);
    out[4] = g(0, 2);
    out[5] = g(1, 2);
  } else {
    out[0] = g(0, 0);
    out[1] = g(1, 1);
    out[2] = g(0, 1);
  }
}

Mat from_components(const double* c, int dim) {
  Mat g(dim, dim);
  if (dim == 3) {
    g << c[0], c[3], c[4], c[3], c[1], c[5], c[4], c[5], c[2];
  } else {
    g << c[0], c[2], c[2], c[1];
  }
  return g;
}

// Position t in lattice index units -> interval index and fraction.
std::pair<int, double> cell_of(double t, int n) {
  if (n < 2) return {0, 0.0};
  t = std::clamp(t, 0.0, static_cast<double>(n - 1));
  int i = std::min(static_cast<int>(std::floor(t)), n - 2);
  return {i, t - i};
}

// Interpolating cubic B-spline along one axis. Coefficients beyond the ends
// are extrapolated linearly (natural end conditions), so linear data is
// reproduced exactly.
template <class Get>
Comp bspline_1d(Get&& get, int n, double t, int ncomp) {
  Comp out{};
  if (n == 1) return get(0);
  auto [i, f] = cell_of(t, n);
  const double f2 = f * f, f3 = f2 * f;
  const double w[4] = {(1 - f) * (1 - f) * (1 - f) / 6.0, (3 * f3 - 6 * f2 + 4) / 6.0,
                       (-3 * f3 + 3 * f2 + 3 * f + 1) / 6.0, f3 / 6.0};
  for (int k = 0; k < 4; ++k) {
    const int idx = i - 1 + k;
    Comp c;
    if (idx < 0 || idx >= n) {
      const int e = idx < 0 ? 0 : n - 1;
      const int e2 = idx < 0 ? 1 : n - 2;
      const Comp a = get(e), b = get(e2);
      for (int m = 0; m < ncomp; ++m) c[m] = 2.0 * a[m] - b[m];
    } else {
      c = get(idx);
    }
    for (int m = 0; m < ncomp; ++m) out[m] += w[k] * c[m];
  }
  return out;
}

// Akima spline along one axis with Akima's end-slope extrapolation.
template <class Get>
Comp akima_1d(Get&& get, int n, double t, int ncomp) {
  if (n == 1) return get(0);
  auto [i, f] = cell_of(t, n);
  const int lo = std::max(0, i - 2);
  const int hi = std::min(n - 1, i + 3);
  std::array<Comp, 6> val{};
  for (int k = lo; k <= hi; ++k) val[k - lo] = get(k);
  const double h00 = 2 * f * f * f - 3 * f * f + 1, h10 = f * f * f - 2 * f * f + f;
  const double h01 = -2 * f * f * f + 3 * f * f, h11 = f * f * f - f * f;
  auto node_slope = [](double sm2, double sm1, double s0, double sp1) {
    const double w1 = std::abs(sp1 - s0), w2 = std::abs(sm1 - sm2);
    if (w1 + w2 <= 1e-14 * (std::abs(sm1) + std::abs(s0))) return 0.5 * (sm1 + s0);
    return (w1 * sm1 + w2 * s0) / (w1 + w2);
  };
  Comp out{};
  for (int m = 0; m < ncomp; ++m) {
    // s[q] = slope of interval i - 2 + q
    double s[5];
    bool have[5];
    for (int q = 0; q < 5; ++q) {
      const int k = i - 2 + q;
      have[q] = k >= lo && k + 1 <= hi;
      s[q] = have[q] ? val[k + 1 - lo][m] - val[k - lo][m] : 0.0;
    }
    for (int q = 1; q >= 0; --q)
      if (!have[q]) s[q] = have[q + 2] ? 2 * s[q + 1] - s[q + 2] : s[q + 1];
    for (int q = 3; q < 5; ++q)
      if (!have[q]) s[q] = have[q - 2] ? 2 * s[q - 1] - s[q - 2] : s[q - 1];
    const double ti = node_slope(s[0], s[1], s[2], s[3]);
    const double tj = node_slope(s[1], s[2], s[3], s[4]);
    out[m] = h00 * val[i - lo][m] + h10 * ti + h01 * val[i + 1 - lo][m] + h11 * tj;
  }
  return out;
}

// Thomas solve of the cubic B-spline prefilter along one line. With linear
// extrapolation of the coefficients the end rows reduce to c = f.
void prefilter_line(std::vector<double>& data, std::size_t offset, std::size_t stride, int n,
                    int ncomp) {
  if (n < 3) return;
  std::vector<double> cp(n), d(n);
  for (int m = 0; m < ncomp; ++m) {
    auto at = [&](int i) -> double& { return data[offset + static_cast<std::size_t>(i) * stride + m]; };
    cp[0] = 0.0;
    d[0] = at(0);
    for (int i = 1; i < n - 1; ++i) {
      const double denom = 4.0 - cp[i - 1];
      cp[i] = 1.0 / denom;
      d[i] = (6.0 * at(i) - d[i - 1]) / denom;
    }
    d[n - 1] = at(n - 1);
    for (int i = n - 2; i >= 0; --i) at(i) = d[i] - cp[i] * at(i + 1);
  }
}

void gaussian_smooth(std::vector<double>& data, std::array<int, 3> counts, int ncomp, double sigma) {
  if (sigma <= 0.0) return;
  const int radius = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int k = -radius; k <= radius; ++k) kernel[k + radius] = std::exp(-0.5 * k * k / (sigma * sigma));
  std::array<std::size_t, 3> stride{static_cast<std::size_t>(ncomp),
                                    static_cast<std::size_t>(ncomp) * counts[0],
                                    static_cast<std::size_t>(ncomp) * counts[0] * counts[1]};
  for (int axis = 0; axis < 3; ++axis) {
    const int n = counts[axis];
    if (n < 2) continue;
    std::vector<double> src = data;
    for (int k = 0; k < counts[2]; ++k)
      for (int j = 0; j < counts[1]; ++j)
        for (int i = 0; i < counts[0]; ++i) {
          const int idx[3] = {i, j, k};
          const std::size_t base = i * stride[0] + j * stride[1] + k * stride[2];
          const int p = idx[axis];
          double wsum = 0.0;
          Comp acc{};
          for (int q = -radius; q <= radius; ++q) {
            const int pp = p + q;
            if (pp < 0 || pp >= n) continue;  // truncated, renormalised
            const double w = kernel[q + radius];
            const std::size_t at = base + static_cast<std::size_t>(pp - p) * stride[axis];
            for (int m = 0; m < ncomp; ++m) acc[m] += w * src[at + m];
            wsum += w;
          }
          for (int m = 0; m < ncomp; ++m) data[base + m] = acc[m] / wsum;
        }
  }
}

}  // namespace

std::string to_string(Interpolation m) {
  return m == Interpolation::CubicBSpline ? "cubic-b-spline" : "akima";
}

Interpolation interpolation_from_string(const std::string& s) {
  if (s == "cubic-b-spline" || s == "bspline") return Interpolation::CubicBSpline;
  if (s == "akima") return Interpolation::Akima;
  throw Error("unknown interpolation method '" + s + "'");
}

std::size_t MetricField::index(int i, int j, int k) const {
  return (static_cast<std::size_t>(k) * counts_[1] * counts_[0] + static_cast<std::size_t>(j) * counts_[0] +
          static_cast<std::size_t>(i)) *
         ncomp_;
}

Vec MetricField::spacing() const {
  Vec h(dim_);
  for (int a = 0; a < dim_; ++a)
    h[a] = counts_[a] > 1 ? (box_.hi[a] - box_.lo[a]) / (counts_[a] - 1) : 1.0;
  return h;
}

Vec MetricField::node_position(int i, int j, int k) const {
  const Vec h = spacing();
  Vec x(dim_);
  const int idx[3] = {i, j, k};
  for (int a = 0; a < dim_; ++a) x[a] = box_.lo[a] + idx[a] * h[a];
  return x;
}

Mat MetricField::node(int i, int j, int k) const { return from_components(&samples_[index(i, j, k)], dim_); }

double MetricField::derivative_step() const {
  const Vec h = spacing();
  return 0.25 * h.minCoeff();
}

void MetricField::prepare() {
  ncomp_ = components_for(dim_);
  coefficients_ = samples_;
  if (method_ != Interpolation::CubicBSpline) return;
  const std::size_t s0 = ncomp_, s1 = s0 * counts_[0], s2 = s1 * counts_[1];
  for (int k = 0; k < counts_[2]; ++k)
    for (int j = 0; j < counts_[1]; ++j) prefilter_line(coefficients_, j * s1 + k * s2, s0, counts_[0], ncomp_);
  for (int k = 0; k < counts_[2]; ++k)
    for (int i = 0; i < counts_[0]; ++i) prefilter_line(coefficients_, i * s0 + k * s2, s1, counts_[1], ncomp_);
  for (int j = 0; j < counts_[1]; ++j)
    for (int i = 0; i < counts_[0]; ++i) prefilter_line(coefficients_, i * s0 + j * s1, s2, counts_[2], ncomp_);
}

MetricField MetricField::from_lattice(const Box& box, std::array<int, 3> counts, std::vector<Mat> samples,
                                      double sigma, Interpolation method) {
  MetricField f;
  f.dim_ = box.dimension();
  if (f.dim_ != 2 && f.dim_ != 3) throw Error("metric field dimension must be 2 or 3");
  if (f.dim_ == 2) counts[2] = 1;
  for (int a = 0; a < f.dim_; ++a) {
    if (counts[a] < 2) throw Error("lattice needs at least 2 nodes per axis");
    if (!(box.hi[a] > box.lo[a])) throw Error("lattice box must have positive extent");
  }
  const std::size_t total = static_cast<std::size_t>(counts[0]) * counts[1] * counts[2];
  if (samples.size() != total) throw Error("sample count does not match lattice");
  f.box_ = box;
  f.counts_ = counts;
  f.sigma_ = sigma;
  f.method_ = method;
  f.ncomp_ = components_for(f.dim_);
  f.samples_.resize(total * f.ncomp_);
  for (std::size_t n = 0; n < total; ++n) {
    if (samples[n].rows() != f.dim_ || samples[n].cols() != f.dim_) throw Error("sample has wrong shape");
    to_components(project_spd(samples[n]), f.dim_, &f.samples_[n * f.ncomp_]);
  }
  f.prepare();
  return f;
}

MetricField MetricField::build(std::span<const Ellipsoid> ellipsoids, const FieldOptions& opts) {
  const int dim = opts.dimension;
  if (dim != 2 && dim != 3) throw Error("metric field dimension must be 2 or 3");
  if (ellipsoids.size() < 4) throw Error("need at least 4 ellipsoids to build a field");
  std::vector<Vec> pos;
  std::vector<Mat> mats;
  for (const auto& e : ellipsoids) {
    if (dim == 3) {
      pos.push_back(e.center.vec());
      mats.push_back(e.G);
    } else {
      pos.push_back(vec2(e.center.u, e.center.v));
      mats.push_back(e.G.bottomRightCorner<2, 2>());
    }
  }
  // Coplanarity / collinearity of the centres.
  Vec mean = Vec::Zero(dim);
  for (const auto& p : pos) mean += p;
  mean /= static_cast<double>(pos.size());
  Eigen::MatrixXd centered(static_cast<Eigen::Index>(pos.size()), dim);
  for (std::size_t r = 0; r < pos.size(); ++r) centered.row(static_cast<Eigen::Index>(r)) = (pos[r] - mean).transpose();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered);
  const auto& sv = svd.singularValues();
  if (sv[dim - 1] < 1e-9 * std::max(sv[0], 1e-300))
    throw Error(dim == 3 ? "ellipsoid centres are coplanar" : "ellipse centres are collinear");

  Box box;
  if (opts.domain) {
    box = *opts.domain;
    if (box.dimension() != dim) throw Error("domain dimension mismatch");
  } else {
    box.lo = pos[0];
    box.hi = pos[0];
    for (const auto& p : pos) {
      box.lo = box.lo.cwiseMin(p);
      box.hi = box.hi.cwiseMax(p);
    }
  }
  std::array<int, 3> counts{1, 1, 1};
  for (int a = 0; a < dim; ++a) {
    const double extent = box.hi[a] - box.lo[a];
    counts[a] = std::max(2, static_cast<int>(std::lround(extent / opts.spacing)) + 1);
  }
  MetricField f;
  f.dim_ = dim;
  f.box_ = box;
  f.counts_ = counts;
  f.sigma_ = opts.sigma;
  f.method_ = opts.method;
  f.ncomp_ = components_for(dim);
  const std::size_t total = static_cast<std::size_t>(counts[0]) * counts[1] * counts[2];
  f.samples_.assign(total * f.ncomp_, 0.0);

  // Inverse-distance weighting of the k nearest centres onto the lattice.
  const int k_near = std::max(1, std::min<int>(opts.idw_neighbors, static_cast<int>(pos.size())));
  std::vector<std::pair<double, std::size_t>> dist(pos.size());
  for (int k = 0; k < counts[2]; ++k)
    for (int j = 0; j < counts[1]; ++j)
      for (int i = 0; i < counts[0]; ++i) {
        const Vec x = f.node_position(i, j, k);
        for (std::size_t p = 0; p < pos.size(); ++p) dist[p] = {(pos[p] - x).squaredNorm(), p};
        std::partial_sort(dist.begin(), dist.begin() + k_near, dist.end());
        Mat acc = Mat::Zero(dim, dim);
        if (dist[0].first < 1e-24) {
          acc = mats[dist[0].second];
        } else {
          double wsum = 0.0;
          for (int q = 0; q < k_near; ++q) {
            const double w = 1.0 / std::pow(dist[q].first, 0.5 * opts.idw_power);
            acc += w * mats[dist[q].second];
            wsum += w;
          }
          acc /= wsum;
        }
        to_components(acc, dim, &f.samples_[f.index(i, j, k)]);
      }
  gaussian_smooth(f.samples_, counts, f.ncomp_, opts.sigma);
  for (std::size_t n = 0; n < total; ++n) {
    Mat g = project_spd(from_components(&f.samples_[n * f.ncomp_], dim));
    to_components(g, dim, &f.samples_[n * f.ncomp_]);
  }
  f.prepare();
  return f;
}

Mat MetricField::at(const Vec& xin) const {
  const Vec x = box_.clamp(xin);
  double t[3] = {0.0, 0.0, 0.0};
  for (int a = 0; a < dim_; ++a) t[a] = (x[a] - box_.lo[a]) / (box_.hi[a] - box_.lo[a]) * (counts_[a] - 1);
  const std::vector<double>& src = method_ == Interpolation::CubicBSpline ? coefficients_ : samples_;
  const int nc = ncomp_;
  auto base = [&](int i, int j, int k) {
    Comp c{};
    const double* p = &src[index(i, j, k)];
    std::copy(p, p + nc, c.begin());
    return c;
  };
  auto interp = [&](auto&& get, int n, double tt) {
    return method_ == Interpolation::CubicBSpline ? bspline_1d(get, n, tt, nc) : akima_1d(get, n, tt, nc);
  };
  Comp out;
  if (dim_ == 2) {
    out = interp([&](int j) { return interp([&](int i) { return base(i, j, 0); }, counts_[0], t[0]); },
                 counts_[1], t[1]);
  } else {
    out = interp(
        [&](int k) {
          return interp([&](int j) { return interp([&](int i) { return base(i, j, k); }, counts_[0], t[0]); },
                        counts_[1], t[1]);
        },
        counts_[2], t[2]);
  }
  return project_spd(from_components(out.data(), dim_));
}

void MetricField::save(std::ostream& out) const {
  archive::Writer w(out);
  w.magic(kMagic);
  w.u64(static_cast<std::uint64_t>(dim_));
  w.vec(box_.lo);
  w.vec(box_.hi);
  for (int a = 0; a < 3; ++a) w.u64(static_cast<std::uint64_t>(counts_[a]));
  w.f64(sigma_);
  w.str(to_string(method_));
  w.f64s(samples_);
}

MetricField MetricField::load(std::istream& in) {
  archive::Reader r(in);
  r.expect_magic(kMagic);
  MetricField f;
  f.dim_ = static_cast<int>(r.u64());
  if (f.dim_ != 2 && f.dim_ != 3) throw ParseError("bad field dimension", 0);
  f.box_.lo = r.vec();
  f.box_.hi = r.vec();
  for (int a = 0; a < 3; ++a) f.counts_[a] = static_cast<int>(r.count(1 << 16));
  f.sigma_ = r.f64();
  f.method_ = interpolation_from_string(r.str());
  f.samples_ = r.f64s();
  f.ncomp_ = components_for(f.dim_);
  const std::size_t total = static_cast<std::size_t>(f.counts_[0]) * f.counts_[1] * f.counts_[2];
  if (f.box_.lo.size() != f.dim_ || f.box_.hi.size() != f.dim_ || f.samples_.size() != total * f.ncomp_)
    throw ParseError("inconsistent field archive", 0);
  f.prepare();
  return f;
}

void MetricField::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  save(out);
}

MetricField MetricField::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return load(in);
}

LightnessMetric restrict_to_lightness_axis(std::shared_ptr<const Metric> field) {
  if (field->dimension() != 3) throw Error("lightness restriction needs a 3D field");
  const Box b = field->domain();
  if (b.lo[1] > 0.0 || b.hi[1] < 0.0 || b.lo[2] > 0.0 || b.hi[2] < 0.0)
    throw Error("field domain does not contain the neutral axis");
  LightnessMetric m;
  m.lo = b.lo[0];
  m.hi = b.hi[0];
  m.g = [field](double l) { return field->at(vec3(l, 0.0, 0.0))(0, 0); };
  return m;
}

}  // namespace colorweak
