#include "colorweak/isometry.hpp"

#include "colorweak/archive.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

namespace colorweak {

std::string to_string(MapDirection d) { return d == MapDirection::Simulation ? "simulation" : "compensation"; }

MapDirection map_direction_from_string(const std::string& s) {
  if (s == "simulation" || s == "simulate") return MapDirection::Simulation;
  if (s == "compensation" || s == "compensate") return MapDirection::Compensation;
  throw Error("unknown map direction '" + s + "'");
}

IsometryMap::IsometryMap(std::shared_ptr<const NormalChart> source, std::shared_ptr<const NormalChart> target,
                         MapDirection direction)
    : source_(std::move(source)), target_(std::move(target)), direction_(direction) {
  if (!source_ || !target_) throw Error("isometry needs two charts");
  if (source_->dimension() != target_->dimension()) throw Error("charts have different dimensions");
  if (source_->resolution() != target_->resolution() || source_->radial_spacing() != target_->radial_spacing())
    throw Error("charts have different angular or radial resolution");
  if (source_->dimension() == 2 && source_->options().clip_to_gamut && target_->options().clip_to_gamut &&
      source_->options().plane_lightness != target_->options().plane_lightness)
    throw Error("2D charts belong to different lightness planes");
}

Vec IsometryMap::apply(const Vec& x) const { return map(x, false).point; }

MapResult IsometryMap::map(const Vec& x, bool fallback, bool nearest_vertex) const {
  auto uniform_of = [&](const Vec& p) -> Vec {
    if (!nearest_vertex) return source_->to_uniform(p);
    const BarycentricLocation loc = source_->locate(p);
    const NormalChart& owner = loc.patch < 0 ? *source_ : source_->patches()[static_cast<std::size_t>(loc.patch)];
    int best = loc.vertices[0];
    for (int v = 1; v < loc.count; ++v) {
      const int id = loc.vertices[static_cast<std::size_t>(v)];
      if ((owner.nodes()[static_cast<std::size_t>(id)].position - p).squaredNorm() <
          (owner.nodes()[static_cast<std::size_t>(best)].position - p).squaredNorm())
        best = id;
    }
    return loc.patch < 0 ? owner.uniform(best) : Vec(owner.uniform(best) + owner.patch_offset());
  };
  MapResult out;
  Vec y;
  try {
    y = uniform_of(x);
  } catch (const UncoveredPoint& e) {
    if (!fallback) throw;
    y = uniform_of(e.nearest());
    out.fallback = true;
  }
  if (target_->try_from_uniform(y, out.point)) return out;

  // Beyond the target geodesics: largest covered radius along the same direction.
  double lo = 0.0, hi = 1.0;
  Vec best = target_->origin();
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    Vec p;
    if (target_->try_from_uniform(mid * y, p)) {
      lo = mid;
      best = p;
    } else {
      hi = mid;
    }
  }
  out.point = best;
  out.clamped = true;
  return out;
}

IsometryMap IsometryMap::inverse() const {
  return IsometryMap(target_, source_,
                     direction_ == MapDirection::Simulation ? MapDirection::Compensation : MapDirection::Simulation);
}

void IsometryMap::save(std::ostream& out) const {
  archive::Writer w(out);
  w.magic("CWIM1");
  w.str(to_string(direction_));
  source_->save(out);
  target_->save(out);
  if (!out) throw Error("failed to write map archive");
}

IsometryMap IsometryMap::load(std::istream& in) {
  archive::Reader r(in);
  r.expect_magic("CWIM1");
  MapDirection d;
  try {
    d = map_direction_from_string(r.str());
  } catch (const ParseError&) {
    throw;
  } catch (const Error& e) {
    throw ParseError(std::string("map archive: ") + e.what(), 0);
  }
  auto src = std::make_shared<const NormalChart>(NormalChart::load(in));
  auto dst = std::make_shared<const NormalChart>(NormalChart::load(in));
  return IsometryMap(std::move(src), std::move(dst), d);
}

void IsometryMap::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  save(out);
}

IsometryMap IsometryMap::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return load(in);
}

IsometryMap compose_isometry(std::shared_ptr<const NormalChart> source, std::shared_ptr<const NormalChart> target,
                             MapDirection direction) {
  return IsometryMap(std::move(source), std::move(target), direction);
}

double isometry_residual(const IsometryMap& map, const Metric& field_src, const Metric& field_dst, const Vec& x,
                         double step) {
  const int n = map.dimension();
  if (x.size() != n || field_src.dimension() != n || field_dst.dimension() != n)
    throw Error("dimension mismatch in isometry_residual");
  auto eval = [&](const Vec& p) {
    if (!map.source().covers(p)) throw Error("point too close to the coverage boundary for the difference stencil");
    const MapResult r = map.map(p);
    if (r.clamped) throw Error("point too close to the coverage boundary for the difference stencil");
    return r.point;
  };
  const Vec fx = eval(x);
  Mat df(n, n);
  for (int a = 0; a < n; ++a) {
    Vec e = Vec::Zero(n);
    e[a] = step;
    df.col(a) = (eval(x + e) - eval(x - e)) / (2.0 * step);
  }
  const Mat pulled = df.transpose() * field_dst.at(fx) * df;
  return (field_src.at(x) - pulled).norm();
}

namespace {

// Cubic Hermite piece on [x0, x0 + h] with values y0, y1 and slopes m0, m1.
double hermite(double t, double h, double y0, double y1, double m0, double m1) {
  const double t2 = t * t, t3 = t2 * t;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * h * m1;
}

double hermite_slope(double t, double h, double y0, double y1, double m0, double m1) {
  const double t2 = t * t;
  return ((6 * t2 - 6 * t) * y0 + (-6 * t2 + 6 * t) * y1) / h + (3 * t2 - 4 * t + 1) * m0 + (3 * t2 - 2 * t) * m1;
}

using Column = std::vector<double>;

std::size_t piece(double v, const Column& keys) {
  const auto i = static_cast<std::size_t>(std::upper_bound(keys.begin(), keys.end(), v) - keys.begin());
  return std::clamp<std::size_t>(i, 1, keys.size() - 1) - 1;
}

// Monotone Hermite table with linear continuation outside the grid.
double table_eval(const Column& x, const Column& y, const Column& m, double v) {
  if (v <= x.front()) return y.front() + (v - x.front()) * m.front();
  if (v >= x.back()) return y.back() + (v - x.back()) * m.back();
  const std::size_t i = piece(v, x);
  const double h = x[i + 1] - x[i];
  return hermite((v - x[i]) / h, h, y[i], y[i + 1], m[i], m[i + 1]);
}

double table_invert(const Column& x, const Column& y, const Column& m, double target) {
  if (target <= y.front()) return x.front() + (target - y.front()) / m.front();
  if (target >= y.back()) return x.back() + (target - y.back()) / m.back();
  const std::size_t i = piece(target, y);
  if (target == y[i]) return x[i];
  if (target == y[i + 1]) return x[i + 1];
  const double h = x[i + 1] - x[i];
  // safeguarded Newton on the piece parameter
  double lo = 0.0, hi = 1.0;
  double t = (target - y[i]) / (y[i + 1] - y[i]);
  for (int it = 0; it < 100; ++it) {
    const double f = hermite(t, h, y[i], y[i + 1], m[i], m[i + 1]) - target;
    if (f == 0.0) break;
    (f < 0.0 ? lo : hi) = t;
    const double d = hermite_slope(t, h, y[i], y[i + 1], m[i], m[i + 1]) * h;
    double next = d > 0.0 ? t - f / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    const bool done = std::abs(next - t) < 1e-16;
    t = next;
    if (done) break;
  }
  return x[i] + t * h;
}

struct Table {
  Column x, y, m;
};

std::vector<double> split_grid(double lo, double origin, double hi, int intervals) {
  if (!(hi > lo)) throw Error("lightness range is empty");
  if (origin < lo || origin > hi) throw Error("lightness origin outside the metric range");
  const int left = origin > lo ? std::max(1, static_cast<int>(std::lround(intervals * (origin - lo) / (hi - lo)))) : 0;
  const int right = origin < hi ? std::max(1, intervals - left) : 0;
  std::vector<double> g;
  for (int i = 0; i < left; ++i) g.push_back(lo + (origin - lo) * i / left);
  g.push_back(origin);
  for (int i = 1; i <= right; ++i) g.push_back(i == right ? hi : origin + (hi - origin) * i / right);
  return g;
}

double root_metric(const LightnessMetric& g, double l) {
  const double v = g(std::clamp(l, g.lo, g.hi));
  if (!(v > 0.0) || !std::isfinite(v))
    throw Error("nonpositive lightness metric sample at L*=" + std::to_string(l));
  return std::sqrt(v);
}

// Arc length from the origin along the grid, 5-point Gauss-Legendre per interval.
Table arc_length(const LightnessMetric& g, const std::vector<double>& grid, double origin) {
  static constexpr std::array<double, 5> node{0.0, -0.5384693101056831, 0.5384693101056831, -0.9061798459386640,
                                              0.9061798459386640};
  static constexpr std::array<double, 5> weight{0.5688888888888889, 0.4786286704993665, 0.4786286704993665,
                                                0.2369268850561891, 0.2369268850561891};
  Table t;
  t.x = grid;
  t.y.assign(grid.size(), 0.0);
  for (double l : grid) t.m.push_back(root_metric(g, l));
  const auto o = static_cast<std::size_t>(std::find(grid.begin(), grid.end(), origin) - grid.begin());
  auto piece = [&](std::size_t i) {
    const double a = grid[i], b = grid[i + 1];
    double s = 0.0;
    for (std::size_t q = 0; q < node.size(); ++q) s += weight[q] * root_metric(g, 0.5 * (a + b) + 0.5 * (b - a) * node[q]);
    return 0.5 * (b - a) * s;
  };
  for (std::size_t i = o; i + 1 < grid.size(); ++i) t.y[i + 1] = t.y[i] + piece(i);
  for (std::size_t i = o; i > 0; --i) t.y[i - 1] = t.y[i] - piece(i - 1);
  return t;
}

}  // namespace

LightnessMap LightnessMap::identity(double lo, double hi) {
  LightnessMap m;
  m.grid_ = {lo, hi};
  m.values_ = {lo, hi};
  m.slopes_ = {1.0, 1.0};
  m.origin_ = lo;
  m.identity_ = true;
  return m;
}

double LightnessMap::simulate(double l) const { return identity_ ? l : table_eval(grid_, values_, slopes_, l); }

double LightnessMap::compensate(double l) const { return identity_ ? l : table_invert(grid_, values_, slopes_, l); }

LightnessMap build_lightness_map(const LightnessMetric& g_n, const LightnessMetric& g_w, double l_origin,
                                 int intervals) {
  if (intervals < 2) throw Error("lightness map needs at least two intervals");
  const Table arc_n = arc_length(g_n, split_grid(g_n.lo, l_origin, g_n.hi, intervals), l_origin);
  const Table arc_w = arc_length(g_w, split_grid(g_w.lo, l_origin, g_w.hi, intervals), l_origin);

  LightnessMap m;
  m.origin_ = l_origin;
  m.grid_ = arc_w.x;
  for (std::size_t i = 0; i < arc_w.x.size(); ++i) {
    const double w = table_invert(arc_n.x, arc_n.y, arc_n.m, arc_w.y[i]);
    m.values_.push_back(w);
    m.slopes_.push_back(arc_w.m[i] / root_metric(g_n, w));
  }
  // Fritsch-Carlson limiter keeps every piece monotone.
  for (std::size_t i = 0; i + 1 < m.grid_.size(); ++i) {
    const double secant = (m.values_[i + 1] - m.values_[i]) / (m.grid_[i + 1] - m.grid_[i]);
    if (!(secant > 0.0)) throw Error("lightness map is not strictly increasing");
    const double a = m.slopes_[i] / secant, b = m.slopes_[i + 1] / secant;
    const double r = a * a + b * b;
    if (r > 9.0) {
      const double tau = 3.0 / std::sqrt(r);
      m.slopes_[i] = tau * a * secant;
      m.slopes_[i + 1] = tau * b * secant;
    }
  }
  return m;
}

}  // namespace colorweak
