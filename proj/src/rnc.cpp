#include "colorweak/rnc.hpp"

#include "colorweak/archive.hpp"
#include "colorweak/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numbers>
#include <thread>

namespace colorweak {

Vec hue_475nm() { return vec2(-0.30059043617870540, -0.95375331699443930); }

// Simplex mesh with per-cell barycentric solvers and a uniform bucket grid.
struct NormalChart::Mesh {
  int dim = 2;
  std::vector<std::array<int, 4>> cells;
  std::vector<int> cell_ids;  // into the chart's cell table
  std::vector<Vec> base;
  std::vector<Mat> inverse;
  Vec lo, size;
  std::array<int, 3> dims{1, 1, 1};
  std::vector<int> offsets, members;
  // vertices of the kept cells, bucketed on the same grid
  std::vector<int> node_ids;
  std::vector<Vec> node_points;
  std::vector<int> node_offsets;

  Mesh(int d, const std::vector<std::array<int, 4>>& all, const std::vector<Vec>& points) : dim(d) {
    for (std::size_t c = 0; c < all.size(); ++c) {
      Mat e(d, d);
      const Vec& p0 = points[static_cast<std::size_t>(all[c][0])];
      double scale = 0.0;
      for (int a = 0; a < d; ++a) {
        e.col(a) = points[static_cast<std::size_t>(all[c][static_cast<std::size_t>(a + 1)])] - p0;
        scale = std::max(scale, e.col(a).norm());
      }
      const double det = e.determinant();
      if (!(std::abs(det) > 1e-12 * std::pow(scale, d))) continue;
      cells.push_back(all[c]);
      cell_ids.push_back(static_cast<int>(c));
      base.push_back(p0);
      inverse.push_back(e.inverse());
    }

    lo = Vec::Constant(d, std::numeric_limits<double>::infinity());
    Vec hi = Vec::Constant(d, -std::numeric_limits<double>::infinity());
    for (const auto& cell : cells)
      for (int v = 0; v <= d; ++v) {
        lo = lo.cwiseMin(points[static_cast<std::size_t>(cell[static_cast<std::size_t>(v)])]);
        hi = hi.cwiseMax(points[static_cast<std::size_t>(cell[static_cast<std::size_t>(v)])]);
      }
    if (cells.empty()) {
      lo = hi = Vec::Zero(d);
    }
    const Vec extent = (hi - lo).cwiseMax(1e-9);
    const double target = std::max(1.0, 0.5 * static_cast<double>(cells.size()));
    const double side = std::pow(extent.prod() / target, 1.0 / d);
    size = Vec(d);
    for (int a = 0; a < d; ++a) {
      dims[static_cast<std::size_t>(a)] = std::clamp(static_cast<int>(std::ceil(extent[a] / side)), 1, 512);
      size[a] = extent[a] / dims[static_cast<std::size_t>(a)];
    }

    const std::size_t nb = static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
    std::vector<int> count(nb + 1, 0);
    auto for_buckets = [&](std::size_t c, auto&& fn) {
      Vec clo = points[static_cast<std::size_t>(cells[c][0])], chi = clo;
      for (int v = 1; v <= d; ++v) {
        clo = clo.cwiseMin(points[static_cast<std::size_t>(cells[c][static_cast<std::size_t>(v)])]);
        chi = chi.cwiseMax(points[static_cast<std::size_t>(cells[c][static_cast<std::size_t>(v)])]);
      }
      std::array<int, 3> a0{0, 0, 0}, a1{0, 0, 0};
      for (int a = 0; a < d; ++a) {
        a0[static_cast<std::size_t>(a)] = bucket(clo[a] - 1e-9 * (1.0 + std::abs(clo[a])), a);
        a1[static_cast<std::size_t>(a)] = bucket(chi[a] + 1e-9 * (1.0 + std::abs(chi[a])), a);
      }
      for (int k = a0[2]; k <= a1[2]; ++k)
        for (int j = a0[1]; j <= a1[1]; ++j)
          for (int i = a0[0]; i <= a1[0]; ++i) fn((static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i);
    };
    for (std::size_t c = 0; c < cells.size(); ++c) for_buckets(c, [&](std::size_t b) { ++count[b + 1]; });
    for (std::size_t b = 0; b < nb; ++b) count[b + 1] += count[b];
    offsets = count;
    members.assign(static_cast<std::size_t>(offsets[nb]), 0);
    std::vector<int> fill(offsets.begin(), offsets.end() - 1);
    for (std::size_t c = 0; c < cells.size(); ++c)
      for_buckets(c, [&](std::size_t b) { members[static_cast<std::size_t>(fill[b]++)] = static_cast<int>(c); });

    std::vector<int> used;
    for (const auto& cell : cells)
      for (int v = 0; v <= d; ++v) used.push_back(cell[static_cast<std::size_t>(v)]);
    std::sort(used.begin(), used.end());
    used.erase(std::unique(used.begin(), used.end()), used.end());
    std::vector<std::pair<std::size_t, int>> keyed;
    for (int id : used) keyed.emplace_back(bucket_of(points[static_cast<std::size_t>(id)]), id);
    std::sort(keyed.begin(), keyed.end());
    node_offsets.assign(nb + 1, 0);
    for (const auto& [b, id] : keyed) {
      ++node_offsets[b + 1];
      node_ids.push_back(id);
      node_points.push_back(points[static_cast<std::size_t>(id)]);
    }
    for (std::size_t b = 0; b < nb; ++b) node_offsets[b + 1] += node_offsets[b];
  }

  std::size_t bucket_of(const Vec& x) const {
    std::size_t b = 0;
    for (int a = dim - 1; a >= 0; --a)
      b = b * static_cast<std::size_t>(dims[static_cast<std::size_t>(a)]) + static_cast<std::size_t>(bucket(x[a], a));
    return b;
  }

  // Closest cell vertex: rings of buckets around x until no closer vertex can remain.
  int nearest(const Vec& x, double& best_d2) const {
    best_d2 = std::numeric_limits<double>::infinity();
    if (node_ids.empty()) return -1;
    std::array<int, 3> c{0, 0, 0};
    int rmax = 0;
    for (int a = 0; a < dim; ++a) {
      c[static_cast<std::size_t>(a)] = bucket(x[a], a);
      rmax = std::max({rmax, c[static_cast<std::size_t>(a)], dims[static_cast<std::size_t>(a)] - 1 - c[static_cast<std::size_t>(a)]});
    }
    int best = -1;
    for (int r = 0; r <= rmax; ++r) {
      std::array<int, 3> a0{0, 0, 0}, a1{0, 0, 0};
      for (int a = 0; a < dim; ++a) {
        a0[static_cast<std::size_t>(a)] = std::max(0, c[static_cast<std::size_t>(a)] - r);
        a1[static_cast<std::size_t>(a)] = std::min(dims[static_cast<std::size_t>(a)] - 1, c[static_cast<std::size_t>(a)] + r);
      }
      for (int k = a0[2]; k <= a1[2]; ++k)
        for (int j = a0[1]; j <= a1[1]; ++j)
          for (int i = a0[0]; i <= a1[0]; ++i) {
            const int ring = std::max({std::abs(i - c[0]), std::abs(j - c[1]), std::abs(k - c[2])});
            if (ring != r) continue;
            const std::size_t b = (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
            for (int m = node_offsets[b]; m < node_offsets[b + 1]; ++m) {
              const double d2 = (node_points[static_cast<std::size_t>(m)] - x).squaredNorm();
              if (d2 < best_d2) {
                best_d2 = d2;
                best = node_ids[static_cast<std::size_t>(m)];
              }
            }
          }
      // distance from x to the part of the grid not yet scanned
      double gap = std::numeric_limits<double>::infinity();
      for (int a = 0; a < dim; ++a) {
        const auto s = static_cast<std::size_t>(a);
        if (a0[s] > 0) gap = std::min(gap, x[a] - (lo[a] + a0[s] * size[a]));
        if (a1[s] < dims[s] - 1) gap = std::min(gap, (lo[a] + (a1[s] + 1) * size[a]) - x[a]);
      }
      if (best >= 0 && (gap == std::numeric_limits<double>::infinity() || (gap > 0 && gap * gap >= best_d2))) break;
    }
    return best;
  }

  int bucket(double x, int a) const {
    const int i = static_cast<int>(std::floor((x - lo[a]) / size[a]));
    return std::clamp(i, 0, dims[static_cast<std::size_t>(a)] - 1);
  }

  bool locate(const Vec& x, BarycentricLocation& loc) const {
    if (cells.empty()) return false;
    std::size_t b = 0;
    for (int a = dim - 1; a >= 0; --a) {
      const double t = (x[a] - lo[a]) / size[a];
      if (t < -1e-9 || t > dims[static_cast<std::size_t>(a)] + 1e-9) return false;
      b = b * static_cast<std::size_t>(dims[static_cast<std::size_t>(a)]) + static_cast<std::size_t>(bucket(x[a], a));
    }
    double best = -std::numeric_limits<double>::infinity();
    std::array<double, 4> best_w{};
    int best_c = -1;
    for (int m = offsets[b]; m < offsets[b + 1]; ++m) {
      const auto c = static_cast<std::size_t>(members[static_cast<std::size_t>(m)]);
      const Vec lambda = inverse[c] * (x - base[c]);
      std::array<double, 4> w{};
      w[0] = 1.0 - lambda.sum();
      double lowest = w[0];
      for (int a = 0; a < dim; ++a) {
        w[static_cast<std::size_t>(a + 1)] = lambda[a];
        lowest = std::min(lowest, lambda[a]);
      }
      if (lowest > best) {
        best = lowest;
        best_w = w;
        best_c = static_cast<int>(c);
        if (lowest >= 0.0) break;
      }
    }
    if (best_c < 0 || best < -1e-9) return false;
    double total = 0.0;
    for (int v = 0; v <= dim; ++v) total += (best_w[static_cast<std::size_t>(v)] = std::max(0.0, best_w[static_cast<std::size_t>(v)]));
    loc.cell = cell_ids[static_cast<std::size_t>(best_c)];
    loc.count = dim + 1;
    loc.vertices = cells[static_cast<std::size_t>(best_c)];
    for (int v = 0; v <= dim; ++v) loc.weights[static_cast<std::size_t>(v)] = best_w[static_cast<std::size_t>(v)] / total;
    for (int v = dim + 1; v < 4; ++v) loc.weights[static_cast<std::size_t>(v)] = 0.0;
    return true;
  }
};

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kSparseFactor = 4.0;

double wrap_angle(double a) {
  if (a < 0.0) a += 2.0 * kPi;
  if (a >= 2.0 * kPi) a -= 2.0 * kPi;
  return a;
}

Vec g_orthonormalize(const Mat& g, const Vec& v, const std::vector<Vec>& basis, const char* what) {
  Vec w = v;
  for (const Vec& e : basis) w -= e.dot(g * w) * e;
  const double n2 = w.dot(g * w);
  if (!(n2 > 1e-18 * std::max(1.0, v.dot(g * v)))) throw Error(what);
  return w / std::sqrt(n2);
}

}  // namespace

int NormalChart::direction_count() const {
  return dim_ == 2 ? resolution_[0] : resolution_[0] * resolution_[1];
}

std::vector<int> NormalChart::geodesic(int g) const {
  std::vector<int> out{0};
  const auto& ids = geodesic_nodes_.at(static_cast<std::size_t>(g));
  out.insert(out.end(), ids.begin(), ids.end());
  return out;
}

Vec NormalChart::uniform_from_coords(const NormalCoords& nc) const {
  if (dim_ == 2) return vec2(nc.r * std::cos(nc.angles[0]), nc.r * std::sin(nc.angles[0]));
  const double st = std::sin(nc.angles[0]);
  return vec3(nc.r * std::cos(nc.angles[0]), nc.r * st * std::cos(nc.angles[1]), nc.r * st * std::sin(nc.angles[1]));
}

NormalCoords NormalChart::coords_from_uniform(const Vec& y) const {
  NormalCoords nc;
  nc.r = y.norm();
  if (nc.r == 0.0) return nc;
  if (dim_ == 2) {
    nc.angles[0] = wrap_angle(std::atan2(y[1], y[0]));
  } else {
    nc.angles[0] = std::acos(std::clamp(y[0] / nc.r, -1.0, 1.0));
    nc.angles[1] = (y[1] == 0.0 && y[2] == 0.0) ? 0.0 : wrap_angle(std::atan2(y[2], y[1]));
  }
  return nc;
}

void NormalChart::integrate(const std::vector<Vec>& directions,
                            const std::vector<std::array<double, 2>>& labels) {
  const int n_sub = std::max(1, static_cast<int>(std::ceil(spacing_ / opts_.step - 1e-9)));
  step_ = spacing_ / n_sub;
  GeodesicOptions gopts;
  gopts.step = step_;
  gopts.record_every = n_sub;
  gopts.max_length = std::floor(opts_.max_radius / spacing_ + 1e-9) * spacing_;
  const bool clip = opts_.clip_to_gamut;
  const WhitePoint white = opts_.white;
  const double plane = opts_.plane_lightness;
  const int dim = dim_;
  auto extra = opts_.admissible;
  gopts.admissible = [=](const Vec& x) {
    if (clip) {
      const LuvColor c = dim == 2 ? LuvColor{plane, x[0], x[1]} : LuvColor::from(x);
      if (!in_gamut(c, white)) return false;
    }
    return !extra || extra(x);
  };
  if (!gopts.admissible(origin_)) throw Error("chart origin is not admissible (outside gamut)");

  std::vector<Geodesic> result(directions.size());
  unsigned threads = opts_.threads ? opts_.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(directions.size()));
  std::vector<std::exception_ptr> errors(threads);
  auto work = [&](unsigned t) {
    try {
      for (std::size_t g = t; g < directions.size(); g += threads)
        result[g] = integrate_geodesic(*metric_, origin_, directions[g], gopts);
    } catch (...) {
      errors[t] = std::current_exception();
    }
  };
  if (threads <= 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(work, t);
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  // merged in geodesic order so node ids do not depend on scheduling
  nodes_.push_back({origin_, 0.0, {}});
  geodesic_nodes_.assign(directions.size(), {});
  for (std::size_t g = 0; g < result.size(); ++g) {
    for (std::size_t k = 1; k < result[g].nodes.size(); ++k) {
      geodesic_nodes_[g].push_back(static_cast<int>(nodes_.size()));
      const double s = static_cast<double>(k) * spacing_;
      nodes_.push_back({result[g].nodes[k].position, s, {s, labels[g]}});
    }
  }
}

NormalChart NormalChart::build_2d(std::shared_ptr<const Metric> metric, const Vec& origin, int n_angles,
                                  const Vec& ref_direction, const ChartOptions& opts) {
  if (!metric || metric->dimension() != 2) throw Error("2D chart needs a 2D metric");
  if (n_angles < 3) throw Error("n_angles must be at least 3");
  if (origin.size() != 2 || ref_direction.size() != 2) throw Error("2D chart needs 2D origin and direction");
  if (!(ref_direction.norm() > 0.0)) throw Error("reference direction must be nonzero");
  if (!(opts.radial_spacing > 0.0) || !(opts.step > 0.0)) throw Error("radial spacing and step must be positive");
  if (!metric->domain().contains(origin, 1e-9)) throw Error("chart origin outside the metric domain");

  NormalChart c;
  c.dim_ = 2;
  c.origin_ = origin;
  c.resolution_ = {n_angles};
  c.spacing_ = opts.radial_spacing;
  c.opts_ = opts;
  c.metric_ = std::move(metric);
  c.patch_offset_ = Vec::Zero(2);
  const Mat g0 = c.metric_->at(origin);
  const Vec e1 = g_orthonormalize(g0, ref_direction, {}, "reference direction must be nonzero");
  const Vec e2 = g_orthonormalize(g0, vec2(-ref_direction[1], ref_direction[0]), {e1}, "degenerate frame");
  c.frame_ = {e1, e2};

  std::vector<Vec> dirs;
  std::vector<std::array<double, 2>> labels;
  for (int j = 0; j < n_angles; ++j) {
    const double t = 2.0 * kPi * j / n_angles;
    dirs.push_back(std::cos(t) * e1 + std::sin(t) * e2);
    labels.push_back({t, 0.0});
    c.slot_geodesic_.push_back(j);
  }
  c.integrate(dirs, labels);
  c.build_cells();
  c.finish();
  return c;
}

NormalChart NormalChart::build_3d(std::shared_ptr<const Metric> metric, const Vec& origin, int n_polar,
                                  int n_azimuth, const Vec& axis, const Vec& second, const ChartOptions& opts) {
  if (!metric || metric->dimension() != 3) throw Error("3D chart needs a 3D metric");
  if (n_polar < 3 || n_azimuth < 3) throw Error("3D chart needs n_polar >= 3 and n_azimuth >= 3");
  if (origin.size() != 3 || axis.size() != 3 || second.size() != 3) throw Error("3D chart needs 3D vectors");
  if (!(opts.radial_spacing > 0.0) || !(opts.step > 0.0)) throw Error("radial spacing and step must be positive");
  if (!metric->domain().contains(origin, 1e-9)) throw Error("chart origin outside the metric domain");

  NormalChart c;
  c.dim_ = 3;
  c.origin_ = origin;
  c.resolution_ = {n_polar, n_azimuth};
  c.spacing_ = opts.radial_spacing;
  c.opts_ = opts;
  c.metric_ = std::move(metric);
  c.patch_offset_ = Vec::Zero(3);
  const Mat g0 = c.metric_->at(origin);
  const Vec e1 = g_orthonormalize(g0, axis, {}, "frame axis must be nonzero");
  const Vec e2 = g_orthonormalize(g0, second, {e1}, "collinear frame vectors");
  const Eigen::Vector3d a = e1, b = e2;
  const Vec e3 = g_orthonormalize(g0, Vec(a.cross(b)), {e1, e2}, "degenerate frame");
  c.frame_ = {e1, e2, e3};

  // Pole slots share one geodesic each: 2 + (n_polar - 2) * n_azimuth distinct.
  std::vector<Vec> dirs;
  std::vector<std::array<double, 2>> labels;
  for (int i = 0; i < n_polar; ++i) {
    const double theta = kPi * i / (n_polar - 1);
    const bool pole = i == 0 || i == n_polar - 1;
    for (int j = 0; j < n_azimuth; ++j) {
      if (pole && j > 0) {
        c.slot_geodesic_.push_back(c.slot_geodesic_.back());
        continue;
      }
      const double phi = pole ? 0.0 : 2.0 * kPi * j / n_azimuth;
      c.slot_geodesic_.push_back(static_cast<int>(dirs.size()));
      const double st = i == n_polar - 1 ? 0.0 : std::sin(theta);
      dirs.push_back(std::cos(theta) * e1 + st * (std::cos(phi) * e2 + std::sin(phi) * e3));
      labels.push_back({theta, phi});
    }
  }
  c.integrate(dirs, labels);
  c.build_cells();
  c.finish();
  return c;
}

void NormalChart::build_cells() {
  cells_.clear();
  auto node_at = [&](int slot, int k) -> int {
    if (k == 0) return 0;
    const auto& ids = geodesic_nodes_[static_cast<std::size_t>(slot_geodesic_[static_cast<std::size_t>(slot)])];
    return k <= static_cast<int>(ids.size()) ? ids[static_cast<std::size_t>(k - 1)] : -1;
  };
  std::size_t longest = 0;
  for (const auto& ids : geodesic_nodes_) longest = std::max(longest, ids.size());
  const int kmax = static_cast<int>(longest);

  auto distinct_valid = [](const std::array<int, 4>& v, int n) {
    for (int a = 0; a < n; ++a) {
      if (v[static_cast<std::size_t>(a)] < 0) return false;
      for (int b = 0; b < a; ++b)
        if (v[static_cast<std::size_t>(a)] == v[static_cast<std::size_t>(b)]) return false;
    }
    return true;
  };

  if (dim_ == 2) {
    const int n = resolution_[0];
    for (int k = 0; k < kmax; ++k)
      for (int j = 0; j < n; ++j) {
        const int jn = (j + 1) % n;
        const int a = node_at(j, k), b = node_at(j, k + 1), cc = node_at(jn, k + 1), d = node_at(jn, k);
        // both triangles are counter-clockwise in (k, angle), hence in uniform coordinates
        for (const std::array<int, 4>& t : {std::array<int, 4>{a, b, cc, -1}, std::array<int, 4>{a, cc, d, -1}})
          if (distinct_valid(t, 3)) cells_.push_back(t);
      }
    return;
  }

  // Kuhn split of each (k, polar, azimuth) lattice hexahedron into six tetrahedra,
  // one per axis order; cells collapsing at the origin or the poles drop out.
  const int np = resolution_[0], na = resolution_[1];
  static constexpr std::array<std::array<int, 3>, 6> perms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  static constexpr std::array<int, 6> parity{1, -1, -1, 1, 1, -1};
  for (int k = 0; k < kmax; ++k)
    for (int i = 0; i + 1 < np; ++i)
      for (int j = 0; j < na; ++j)
        for (std::size_t p = 0; p < perms.size(); ++p) {
          std::array<int, 3> at{0, 0, 0};
          std::array<int, 4> t{};
          for (int v = 0; v < 4; ++v) {
            if (v > 0) ++at[static_cast<std::size_t>(perms[p][static_cast<std::size_t>(v - 1)])];
            const int slot = (i + at[1]) * na + (j + at[2]) % na;
            t[static_cast<std::size_t>(v)] = node_at(slot, k + at[0]);
          }
          if (!distinct_valid(t, 4)) continue;
          // (r, polar, azimuth) -> uniform coordinates preserves orientation
          if (parity[p] < 0) std::swap(t[2], t[3]);
          cells_.push_back(t);
        }
}

void NormalChart::finish() {
  uniform_.clear();
  for (const auto& n : nodes_) uniform_.push_back(uniform_from_coords(n.label));
  std::vector<Vec> positions;
  for (const auto& n : nodes_) positions.push_back(n.position);

  const int nv = dim_ + 1;
  std::vector<double> edges;
  std::vector<double> longest(cells_.size(), 0.0);
  for (std::size_t c = 0; c < cells_.size(); ++c)
    for (int a = 0; a < nv; ++a)
      for (int b = a + 1; b < nv; ++b) {
        const double len = (positions[static_cast<std::size_t>(cells_[c][static_cast<std::size_t>(a)])] -
                            positions[static_cast<std::size_t>(cells_[c][static_cast<std::size_t>(b)])])
                               .norm();
        edges.push_back(len);
        longest[c] = std::max(longest[c], len);
      }
  sparse_.assign(cells_.size(), 0);
  if (!edges.empty()) {
    auto mid = edges.begin() + static_cast<std::ptrdiff_t>(edges.size() / 2);
    std::nth_element(edges.begin(), mid, edges.end());
    const double median = *mid;
    for (std::size_t c = 0; c < cells_.size(); ++c) sparse_[c] = longest[c] > kSparseFactor * median;
  }
  position_mesh_ = std::make_shared<const Mesh>(dim_, cells_, positions);
  uniform_mesh_ = std::make_shared<const Mesh>(dim_, cells_, uniform_);
}

int NormalChart::inverted_cells() const {
  int bad = 0;
  for (const auto& cell : cells_) {
    Mat e(dim_, dim_);
    for (int a = 0; a < dim_; ++a)
      e.col(a) = nodes_[static_cast<std::size_t>(cell[static_cast<std::size_t>(a + 1)])].position -
                 nodes_[static_cast<std::size_t>(cell[0])].position;
    if (!(e.determinant() > 0.0)) ++bad;
  }
  return bad;
}

int NormalChart::nodes_in_gamut() const {
  if (!opts_.clip_to_gamut) return static_cast<int>(nodes_.size());
  int n = 0;
  for (const auto& node : nodes_) {
    const Vec& x = node.position;
    const LuvColor c = dim_ == 2 ? LuvColor{opts_.plane_lightness, x[0], x[1]} : LuvColor::from(x);
    n += in_gamut(c, opts_.white) ? 1 : 0;
  }
  return n;
}

bool NormalChart::locate_own(const Vec& x, bool uniform_space, BarycentricLocation& loc) const {
  if (x.size() != dim_) throw Error("point dimension does not match the chart");
  return (uniform_space ? uniform_mesh_ : position_mesh_)->locate(x, loc);
}

bool NormalChart::to_uniform_own(const Vec& x, Vec& y, bool& sparse_hit) const {
  BarycentricLocation loc;
  if (!locate_own(x, false, loc)) return false;
  y = Vec::Zero(dim_);
  for (int v = 0; v < loc.count; ++v)
    y += loc.weights[static_cast<std::size_t>(v)] * uniform_[static_cast<std::size_t>(loc.vertices[static_cast<std::size_t>(v)])];
  sparse_hit = sparse(loc.cell);
  return true;
}

bool NormalChart::from_uniform_own(const Vec& y, Vec& x) const {
  BarycentricLocation loc;
  if (!locate_own(y, true, loc)) return false;
  x = Vec::Zero(dim_);
  for (int v = 0; v < loc.count; ++v)
    x += loc.weights[static_cast<std::size_t>(v)] *
         nodes_[static_cast<std::size_t>(loc.vertices[static_cast<std::size_t>(v)])].position;
  return true;
}

BarycentricLocation NormalChart::locate(const Vec& x) const {
  BarycentricLocation main;
  const bool found = locate_own(x, false, main);
  if (found && !(sparse(main.cell) && !patches_.empty())) return main;
  for (std::size_t p = 0; p < patches_.size(); ++p) {
    BarycentricLocation loc;
    if (patches_[p].locate_own(x, false, loc)) {
      loc.patch = static_cast<int>(p);
      return loc;
    }
  }
  if (found) return main;
  double dist = 0.0;
  Vec near = nearest_node(x, &dist);
  throw UncoveredPoint("uncovered point: no chart cell contains it (nearest node at distance " +
                           std::to_string(dist) + ")",
                       std::move(near), dist);
}

Vec NormalChart::to_uniform(const Vec& x) const {
  const BarycentricLocation loc = locate(x);
  const NormalChart& owner = loc.patch < 0 ? *this : patches_[static_cast<std::size_t>(loc.patch)];
  Vec y = loc.patch < 0 ? Vec(Vec::Zero(dim_)) : owner.patch_offset_;
  for (int v = 0; v < loc.count; ++v)
    y += loc.weights[static_cast<std::size_t>(v)] * owner.uniform_[static_cast<std::size_t>(loc.vertices[static_cast<std::size_t>(v)])];
  return y;
}

NormalCoords NormalChart::to_normal_coords(const Vec& x) const {
  const BarycentricLocation loc = locate(x);
  if (loc.patch < 0) {
    // a vertex query returns the node label itself
    for (int v = 0; v < loc.count; ++v)
      if (loc.weights[static_cast<std::size_t>(v)] >= 1.0 - 1e-12)
        return nodes_[static_cast<std::size_t>(loc.vertices[static_cast<std::size_t>(v)])].label;
  }
  return coords_from_uniform(to_uniform(x));
}

bool NormalChart::try_from_uniform(const Vec& y, Vec& x) const {
  if (y.size() != dim_) throw Error("point dimension does not match the chart");
  BarycentricLocation main;
  const bool found = uniform_mesh_->locate(y, main);
  if (found && !(sparse(main.cell) && !patches_.empty())) {
    x = Vec::Zero(dim_);
    for (int v = 0; v < main.count; ++v)
      x += main.weights[static_cast<std::size_t>(v)] *
           nodes_[static_cast<std::size_t>(main.vertices[static_cast<std::size_t>(v)])].position;
    return true;
  }
  for (const auto& p : patches_)
    if (p.from_uniform_own(y - p.patch_offset_, x)) return true;
  if (found) return from_uniform_own(y, x);
  return false;
}

Vec NormalChart::from_uniform(const Vec& y) const {
  Vec x;
  if (!try_from_uniform(y, x))
    throw OutsideChart("outside gamut: normal coordinates beyond the chart's geodesics (r = " +
                       std::to_string(y.norm()) + ")");
  return x;
}

Vec NormalChart::from_normal_coords(const NormalCoords& nc) const {
  if (!(nc.r >= 0.0)) throw Error("normal coordinate r must be nonnegative");
  return from_uniform(uniform_from_coords(nc));
}

bool NormalChart::covers(const Vec& x) const {
  BarycentricLocation loc;
  if (locate_own(x, false, loc)) return true;
  for (const auto& p : patches_)
    if (p.locate_own(x, false, loc)) return true;
  return false;
}

Vec NormalChart::nearest_node(const Vec& x, double* distance) const {
  if (x.size() != dim_) throw Error("point dimension does not match the chart");
  // only vertices of valid cells, so the result is itself covered
  double best = std::numeric_limits<double>::infinity();
  Vec out = origin_;
  auto scan = [&](const NormalChart& c) {
    double d2 = 0.0;
    const int id = c.position_mesh_->nearest(x, d2);
    if (id >= 0 && d2 < best) {
      best = d2;
      out = c.nodes_[static_cast<std::size_t>(id)].position;
    }
  };
  scan(*this);
  for (const auto& p : patches_) scan(p);
  if (distance) *distance = std::sqrt(best);
  return out;
}

void NormalChart::add_patch(const Vec& second_origin) {
  if (!metric_) throw Error("chart has no metric attached; pass one to add_patch");
  add_patch(metric_, second_origin);
}

void NormalChart::add_patch(std::shared_ptr<const Metric> metric, const Vec& second_origin) {
  if (!metric || metric->dimension() != dim_) throw Error("patch metric dimension does not match the chart");
  BarycentricLocation loc;
  if (second_origin.size() != dim_ || !locate_own(second_origin, false, loc))
    throw Error("second origin is not covered by the chart");

  Vec y0 = Vec::Zero(dim_);
  for (int v = 0; v < loc.count; ++v)
    y0 += loc.weights[static_cast<std::size_t>(v)] * uniform_[static_cast<std::size_t>(loc.vertices[static_cast<std::size_t>(v)])];

  // Frame: the chart's uniform axes pushed to colour space by the local cell
  // map, so patch coordinates line up with y - y0.
  std::vector<Vec> axes;
  if ((second_origin - origin_).norm() <= 1e-12) {
    axes = frame_;
    y0.setZero();
  } else {
    Mat xs(dim_, dim_), ys(dim_, dim_);
    const auto& cell = loc.vertices;
    for (int a = 0; a < dim_; ++a) {
      xs.col(a) = nodes_[static_cast<std::size_t>(cell[static_cast<std::size_t>(a + 1)])].position -
                  nodes_[static_cast<std::size_t>(cell[0])].position;
      ys.col(a) = uniform_[static_cast<std::size_t>(cell[static_cast<std::size_t>(a + 1)])] -
                  uniform_[static_cast<std::size_t>(cell[0])];
    }
    const Mat jac = xs * ys.inverse();
    for (int a = 0; a < dim_; ++a) axes.push_back(jac.col(a));
  }

  ChartOptions opts = opts_;
  opts.radial_spacing = spacing_;
  NormalChart patch = dim_ == 2 ? build_2d(std::move(metric), second_origin, resolution_[0], axes[0], opts)
                                : build_3d(std::move(metric), second_origin, resolution_[0], resolution_[1],
                                           axes[0], axes[1], opts);
  patch.patch_offset_ = y0;
  patches_.push_back(std::move(patch));
}

void NormalChart::save(std::ostream& out) const {
  archive::Writer w(out);
  w.magic("CWNC1");
  std::function<void(const NormalChart&)> put = [&](const NormalChart& c) {
    w.u64(static_cast<std::uint64_t>(c.dim_));
    w.vec(c.origin_);
    w.u64(c.frame_.size());
    for (const Vec& e : c.frame_) w.vec(e);
    w.u64(c.resolution_.size());
    for (int r : c.resolution_) w.i64(r);
    w.f64(c.spacing_);
    w.f64(c.step_);
    w.u64(c.opts_.clip_to_gamut ? 1 : 0);
    w.f64(c.opts_.white.X);
    w.f64(c.opts_.white.Y);
    w.f64(c.opts_.white.Z);
    w.f64(c.opts_.plane_lightness);
    w.f64(c.opts_.max_radius);
    w.u64(c.nodes_.size());
    for (const auto& n : c.nodes_) {
      w.vec(n.position);
      w.f64(n.s);
      w.f64(n.label.r);
      w.f64(n.label.angles[0]);
      w.f64(n.label.angles[1]);
    }
    w.u64(c.geodesic_nodes_.size());
    for (const auto& ids : c.geodesic_nodes_) {
      w.u64(ids.size());
      for (int id : ids) w.i64(id);
    }
    w.u64(c.slot_geodesic_.size());
    for (int g : c.slot_geodesic_) w.i64(g);
    w.u64(c.cells_.size());
    for (const auto& cell : c.cells_)
      for (int v : cell) w.i64(v);
    w.vec(c.patch_offset_);
    w.u64(c.patches_.size());
    for (const auto& p : c.patches_) put(p);
  };
  put(*this);
  if (!out) throw Error("failed to write chart archive");
}

NormalChart NormalChart::load(std::istream& in) {
  archive::Reader r(in);
  r.expect_magic("CWNC1");
  std::function<NormalChart(int)> get = [&](int depth) {
    if (depth > 4) throw ParseError("chart archive nests patches too deeply", 0);
    NormalChart c;
    c.dim_ = static_cast<int>(r.u64());
    if (c.dim_ != 2 && c.dim_ != 3) throw ParseError("chart archive has invalid dimension", 0);
    c.origin_ = r.vec();
    c.frame_.resize(r.count(3));
    for (Vec& e : c.frame_) e = r.vec();
    c.resolution_.resize(r.count(2));
    for (int& v : c.resolution_) v = static_cast<int>(r.i64());
    c.spacing_ = r.f64();
    c.step_ = r.f64();
    c.opts_.clip_to_gamut = r.u64() != 0;
    c.opts_.white.X = r.f64();
    c.opts_.white.Y = r.f64();
    c.opts_.white.Z = r.f64();
    c.opts_.plane_lightness = r.f64();
    c.opts_.max_radius = r.f64();
    c.opts_.radial_spacing = c.spacing_;
    c.opts_.step = c.step_;
    c.nodes_.resize(r.count());
    for (auto& n : c.nodes_) {
      n.position = r.vec();
      n.s = r.f64();
      n.label.r = r.f64();
      n.label.angles[0] = r.f64();
      n.label.angles[1] = r.f64();
    }
    const auto node_count = static_cast<std::int64_t>(c.nodes_.size());
    auto check_id = [&](std::int64_t id) {
      if (id < 0 || id >= node_count) throw ParseError("chart archive references a missing node", 0);
      return static_cast<int>(id);
    };
    c.geodesic_nodes_.resize(r.count());
    for (auto& ids : c.geodesic_nodes_) {
      ids.resize(r.count());
      for (int& id : ids) id = check_id(r.i64());
    }
    c.slot_geodesic_.resize(r.count());
    for (int& g : c.slot_geodesic_) {
      g = static_cast<int>(r.i64());
      if (g < 0 || g >= static_cast<int>(c.geodesic_nodes_.size()))
        throw ParseError("chart archive references a missing geodesic", 0);
    }
    c.cells_.resize(r.count());
    for (auto& cell : c.cells_)
      for (std::size_t v = 0; v < 4; ++v) {
        const std::int64_t id = r.i64();
        cell[v] = v < static_cast<std::size_t>(c.dim_ + 1) ? check_id(id) : static_cast<int>(id);
      }
    c.patch_offset_ = r.vec();
    const std::size_t np = r.count(16);
    for (std::size_t p = 0; p < np; ++p) c.patches_.push_back(get(depth + 1));
    if (c.origin_.size() != c.dim_ || c.patch_offset_.size() != c.dim_ ||
        static_cast<int>(c.frame_.size()) != c.dim_ || c.resolution_.size() != static_cast<std::size_t>(c.dim_ - 1))
      throw ParseError("chart archive is inconsistent", 0);
    c.finish();
    return c;
  };
  return get(0);
}

void NormalChart::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path + " for writing");
  save(out);
}

NormalChart NormalChart::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return load(in);
}

bool operator==(const NormalChart& a, const NormalChart& b) {
  auto same_nodes = [](const std::vector<ChartNode>& x, const std::vector<ChartNode>& y) {
    if (x.size() != y.size()) return false;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (x[i].position != y[i].position || x[i].s != y[i].s || x[i].label.r != y[i].label.r ||
          x[i].label.angles != y[i].label.angles)
        return false;
    return true;
  };
  return a.dim_ == b.dim_ && a.origin_ == b.origin_ && a.frame_ == b.frame_ && a.resolution_ == b.resolution_ &&
         a.spacing_ == b.spacing_ && a.step_ == b.step_ && a.opts_.clip_to_gamut == b.opts_.clip_to_gamut &&
         a.opts_.plane_lightness == b.opts_.plane_lightness && a.opts_.max_radius == b.opts_.max_radius &&
         same_nodes(a.nodes_, b.nodes_) && a.geodesic_nodes_ == b.geodesic_nodes_ &&
         a.slot_geodesic_ == b.slot_geodesic_ && a.cells_ == b.cells_ && a.patch_offset_ == b.patch_offset_ &&
         a.patches_ == b.patches_;
}

NormalChart build_chart_2d(std::shared_ptr<const Metric> metric, const Vec& origin, int n_angles,
                           const Vec& ref_direction, const ChartOptions& opts) {
  return NormalChart::build_2d(std::move(metric), origin, n_angles, ref_direction, opts);
}

NormalChart build_chart_3d(std::shared_ptr<const Metric> metric, const Vec& origin, int n_polar, int n_azimuth,
                           const Vec& axis, const Vec& second, const ChartOptions& opts) {
  return NormalChart::build_3d(std::move(metric), origin, n_polar, n_azimuth, axis, second, opts);
}

double grid_point_ratio(const NormalChart& weak, const NormalChart& normal) {
  if (weak.dimension() != normal.dimension() || weak.resolution() != normal.resolution() ||
      weak.radial_spacing() != normal.radial_spacing())
    throw Error("grid_point_ratio needs charts with equal angular and radial resolution");
  const int n = normal.nodes_in_gamut();
  if (n == 0) throw Error("normal chart has no nodes inside the gamut");
  return static_cast<double>(weak.nodes_in_gamut()) / n;
}

}  // namespace colorweak
