#include "colorweak/geometry.hpp"
#include "colorweak/rnc.hpp"
#include "colorweak/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

using namespace colorweak;

namespace {

constexpr double kPi = std::numbers::pi;

ChartOptions flat_options(double max_radius = 50.0) {
  ChartOptions o;
  o.clip_to_gamut = false;
  o.max_radius = max_radius;
  return o;
}

std::shared_ptr<const Metric> flat2(double c = 1.0) {
  return constant_metric({vec2(-60, -60), vec2(60, 60)}, Mat(c * Mat::Identity(2, 2)));
}

std::shared_ptr<const Metric> flat3(double c = 1.0) {
  return constant_metric({vec3(-40, -40, -40), vec3(40, 40, 40)}, Mat(c * Mat::Identity(3, 3)));
}

std::shared_ptr<const Metric> weak_field() {
  const auto model = synthetic::weak_observer();
  return std::make_shared<FunctionMetric>(Box{vec3(0, -150, -150), vec3(100, 150, 150)},
                                          [model](const Vec& x) { return Mat(model(LuvColor::from(x))); });
}

std::shared_ptr<const Metric> weak_field_plane() { return std::make_shared<PlaneMetric>(weak_field(), 50.0); }

}  // namespace

TEST_CASE("2D flat chart is the polar lattice") {
  const NormalChart c = build_chart_2d(flat2(), vec2(0, 0), 36, vec2(1, 0), flat_options());
  CHECK(c.geodesic_count() == 36);
  CHECK(c.step() == 0.5);
  double worst = 0.0;
  for (int j = 0; j < 36; ++j) {
    const auto ids = c.geodesic(j);
    REQUIRE(ids.size() == 51);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const double t = kPi / 18.0 * j;
      const Vec expect = static_cast<double>(k) * vec2(std::cos(t), std::sin(t));
      worst = std::max(worst, (c.nodes()[static_cast<std::size_t>(ids[k])].position - expect).norm());
    }
  }
  CHECK(worst < 1e-9);
  CHECK(c.inverted_cells() == 0);
}

TEST_CASE("2D chart under G = 4I has nodes at half radius") {
  const NormalChart c = build_chart_2d(flat2(4.0), vec2(0, 0), 36, vec2(1, 0), flat_options());
  for (int j = 0; j < 36; j += 5) {
    const auto ids = c.geodesic(j);
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const double t = kPi / 18.0 * j;
      const Vec expect = 0.5 * static_cast<double>(k) * vec2(std::cos(t), std::sin(t));
      CHECK((c.nodes()[static_cast<std::size_t>(ids[k])].position - expect).norm() < 1e-9);
    }
  }
}

TEST_CASE("equal-s rings of a flat chart are convex closed curves") {
  const NormalChart c = build_chart_2d(flat2(), vec2(0, 0), 36, vec2(1, 0), flat_options());
  for (std::size_t k : {1u, 7u, 30u}) {
    std::vector<Vec> ring;
    for (int j = 0; j < 36; ++j) ring.push_back(c.nodes()[static_cast<std::size_t>(c.geodesic(j)[k])].position);
    for (std::size_t i = 0; i < ring.size(); ++i) {
      const Vec a = ring[(i + 1) % ring.size()] - ring[i];
      const Vec b = ring[(i + 2) % ring.size()] - ring[(i + 1) % ring.size()];
      CHECK(a[0] * b[1] - a[1] * b[0] > 0.0);
    }
  }
}

TEST_CASE("3D flat chart is the spherical lattice") {
  const NormalChart c = build_chart_3d(flat3(), vec3(0, 0, 0), 13, 18, vec3(1, 0, 0), vec3(0, 1, 0),
                                       flat_options(30));
  CHECK(c.direction_count() == 234);
  CHECK(c.geodesic_count() == 200);
  double worst = 0.0;
  for (int i = 0; i < 13; ++i)
    for (int j = 0; j < 18; ++j) {
      const double th = kPi / 12.0 * i, ph = kPi / 9.0 * j;
      const Vec dir = vec3(std::cos(th), std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph));
      const auto ids = c.geodesic(c.slot_geodesic(i * 18 + j));
      REQUIRE(ids.size() == 31);
      for (std::size_t k = 0; k < ids.size(); ++k)
        worst = std::max(worst, (c.nodes()[static_cast<std::size_t>(ids[k])].position - double(k) * dir).norm());
    }
  CHECK(worst < 1e-9);
  CHECK(c.inverted_cells() == 0);
}

TEST_CASE("3D frame is Gram-Schmidt orthonormalised under G(origin)") {
  Mat g = Mat::Identity(3, 3);
  g(0, 0) = 4.0;
  auto m = constant_metric({vec3(-20, -20, -20), vec3(20, 20, 20)}, g);
  const NormalChart c = build_chart_3d(m, vec3(0, 0, 0), 13, 18, vec3(1, 0, 0), vec3(0, 1, 0), flat_options(5));
  CHECK((c.frame()[0] - vec3(0.5, 0, 0)).norm() < 1e-15);
  CHECK((c.frame()[1] - vec3(0, 1, 0)).norm() < 1e-15);
  CHECK((c.frame()[2] - vec3(0, 0, 1)).norm() < 1e-15);
  CHECK_THROWS_AS(build_chart_3d(m, vec3(0, 0, 0), 13, 18, vec3(1, 0, 0), vec3(-2, 0, 0), flat_options(5)), Error);
}

TEST_CASE("3D chart on the synthetic weak observer has no inverted cells") {
  ChartOptions o;
  o.radial_spacing = 2.0;
  o.step = 1.0;
  const NormalChart c = build_chart_3d(weak_field(), vec3(30, 0, 0), 13, 18, vec3(1, 0, 0),
                                       vec3(0, hue_475nm()[0], hue_475nm()[1]), o);
  CHECK(c.cells().size() > 1000);
  CHECK(c.inverted_cells() == 0);
  for (const auto& n : c.nodes()) CHECK(in_gamut(LuvColor::from(n.position)));
}

TEST_CASE("chart nodes are G-equidistant from the origin") {
  auto field = weak_field();
  ChartOptions o;
  o.plane_lightness = 50.0;
  auto plane = std::make_shared<PlaneMetric>(field, 50.0);
  const NormalChart c = build_chart_2d(plane, vec2(0, 0), 36, hue_475nm(), o);
  for (int j = 0; j < 36; j += 7) {
    // resample the same geodesic densely and measure along it
    const Geodesic g = integrate_geodesic(*plane, vec2(0, 0), c.frame()[0] * std::cos(kPi / 18 * j) +
                                                                  c.frame()[1] * std::sin(kPi / 18 * j),
                                          {.step = 0.05, .max_length = c.geodesic(j).size() - 1.0});
    std::vector<Vec> poly;
    for (const auto& n : g.nodes) poly.push_back(n.position);
    const auto ids = c.geodesic(j);
    const Vec& end = c.nodes()[static_cast<std::size_t>(ids.back())].position;
    CHECK((poly.back() - end).norm() < 1e-4);
    CHECK(std::abs(geodesic_length(*plane, poly) - c.nodes()[static_cast<std::size_t>(ids.back())].s) < 1e-4);
  }
}

TEST_CASE("locate: vertices, centroids and random points") {
  const NormalChart c = build_chart_2d(flat2(), vec2(0, 0), 36, vec2(1, 0), flat_options());
  const auto& cell = c.cells()[123];
  {
    const Vec v = c.nodes()[static_cast<std::size_t>(cell[1])].position;
    const BarycentricLocation loc = c.locate(v);
    double on_vertex = 0.0;
    for (int i = 0; i < loc.count; ++i)
      if (loc.vertices[static_cast<std::size_t>(i)] == cell[1]) on_vertex = loc.weights[static_cast<std::size_t>(i)];
    CHECK(on_vertex == doctest::Approx(1.0).epsilon(1e-12));
  }
  {
    Vec centroid = Vec::Zero(2);
    for (int i = 0; i < 3; ++i) centroid += c.nodes()[static_cast<std::size_t>(cell[static_cast<std::size_t>(i)])].position / 3.0;
    const BarycentricLocation loc = c.locate(centroid);
    CHECK(loc.cell == 123);
    for (int i = 0; i < 3; ++i) CHECK(std::abs(loc.weights[static_cast<std::size_t>(i)] - 1.0 / 3.0) < 1e-10);
  }
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-45, 45);
  double worst = 0.0, worst_sum = 0.0;
  for (int n = 0; n < 20000; ++n) {
    const Vec x = vec2(U(rng), U(rng));
    if (x.norm() > 49.0) continue;
    const BarycentricLocation loc = c.locate(x);
    Vec back = Vec::Zero(2);
    double sum = 0.0;
    for (int i = 0; i < loc.count; ++i) {
      CHECK(loc.weights[static_cast<std::size_t>(i)] >= 0.0);
      sum += loc.weights[static_cast<std::size_t>(i)];
      back += loc.weights[static_cast<std::size_t>(i)] * c.nodes()[static_cast<std::size_t>(loc.vertices[static_cast<std::size_t>(i)])].position;
    }
    worst = std::max(worst, (back - x).norm());
    worst_sum = std::max(worst_sum, std::abs(sum - 1.0));
  }
  CHECK(worst < 1e-9);
  CHECK(worst_sum < 1e-10);
  CHECK_THROWS_AS(c.locate(vec2(55, 0)), UncoveredPoint);
  try {
    c.locate(vec2(55, 0));
  } catch (const UncoveredPoint& e) {
    CHECK(e.distance() == doctest::Approx(5.0));
    CHECK((e.nearest() - vec2(50, 0)).norm() < 1e-9);
  }
}

TEST_CASE("3D locate reconstructs random points") {
  const NormalChart c = build_chart_3d(flat3(), vec3(0, 0, 0), 13, 18, vec3(1, 0, 0), vec3(0, 1, 0),
                                       flat_options(30));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-25, 25);
  double worst = 0.0;
  for (int n = 0; n < 20000; ++n) {
    const Vec x = vec3(U(rng), U(rng), U(rng));
    if (x.norm() > 28.0) continue;
    const BarycentricLocation loc = c.locate(x);
    Vec back = Vec::Zero(3);
    for (int i = 0; i < 4; ++i)
      back += loc.weights[static_cast<std::size_t>(i)] * c.nodes()[static_cast<std::size_t>(loc.vertices[static_cast<std::size_t>(i)])].position;
    worst = std::max(worst, (back - x).norm());
  }
  CHECK(worst < 1e-9);
  // on the lightness axis, through the pole cells
  CHECK((c.from_normal_coords(c.to_normal_coords(vec3(12.5, 0, 0))) - vec3(12.5, 0, 0)).norm() < 1e-9);
  CHECK((c.from_normal_coords(c.to_normal_coords(vec3(-7.25, 0, 0))) - vec3(-7.25, 0, 0)).norm() < 1e-9);
}

TEST_CASE("normal coordinates on the flat chart") {
  const NormalChart c = build_chart_2d(flat2(), vec2(0, 0), 36, vec2(1, 0), flat_options());
  CHECK(c.to_normal_coords(vec2(0, 0)).r == 0.0);
  const NormalCoords p = c.to_normal_coords(vec2(3, 4));
  CHECK(std::abs(p.r - 5.0) < 1e-3);
  CHECK(std::abs(p.angles[0] - std::atan2(4.0, 3.0)) < 1e-3);

  const int node = c.geodesic(7)[12];
  const NormalCoords q = c.to_normal_coords(c.nodes()[static_cast<std::size_t>(node)].position);
  CHECK(q.r == 12.0);
  CHECK(q.angles[0] == kPi / 18.0 * 7);

  CHECK((c.from_normal_coords({0.0, {1.234, 0.0}}) - vec2(0, 0)).norm() < 1e-12);
  const Vec x = c.from_normal_coords({5.0, {53.13010235415598 * kPi / 180.0, 0.0}});
  CHECK((x - vec2(3, 4)).norm() < 1e-3);
  CHECK_THROWS_AS(c.from_normal_coords({60.0, {0.3, 0.0}}), OutsideChart);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> U(-30, 30);
  for (int n = 0; n < 2000; ++n) {
    const Vec y = vec2(U(rng), U(rng));
    CHECK((c.from_normal_coords(c.to_normal_coords(y)) - y).norm() < 1e-6);
  }
  // the angular seam
  const NormalCoords below = c.to_normal_coords(vec2(10, -1e-7));
  CHECK(below.angles[0] > 6.28);
  CHECK((c.from_normal_coords(below) - vec2(10, -1e-7)).norm() < 1e-9);
}

TEST_CASE("patches") {
  SUBCASE("flat patch agrees with the main chart") {
    NormalChart c = build_chart_2d(flat2(), vec2(0, 0), 36, vec2(1, 0), flat_options());
    NormalChart plain = c;
    c.add_patch(vec2(12, -5));
    REQUIRE(c.patches().size() == 1);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> U(-30, 30);
    for (int n = 0; n < 500; ++n) {
      const Vec x = vec2(U(rng), U(rng));
      const auto& patch = c.patches()[0];
      if (!patch.covers(x)) continue;
      CHECK((patch.to_uniform(x) + vec2(12, -5) - plain.to_uniform(x)).norm() < 1e-6);
    }
  }
  SUBCASE("patch covers a gap behind an obstacle") {
    ChartOptions o = flat_options(40);
    // a wall on the positive u axis blocks the main fan
    o.admissible = [](const Vec& x) { return !(x[0] >= 8.0 && x[0] <= 10.0 && std::abs(x[1]) < 6.0); };
    NormalChart c = build_chart_2d(flat2(), vec2(0, 0), 36, vec2(1, 0), o);
    CHECK_FALSE(c.covers(vec2(15, 0)));
    CHECK_THROWS_AS(c.to_normal_coords(vec2(15, 0)), UncoveredPoint);
    c.add_patch(vec2(5, 20));
    const NormalCoords nc = c.to_normal_coords(vec2(15, 0));
    CHECK(nc.r == doctest::Approx(15.0).epsilon(1e-9));
    CHECK(std::abs(nc.angles[0]) < 1e-9);
    CHECK((c.from_normal_coords(nc) - vec2(15, 0)).norm() < 1e-9);
    CHECK(c.locate(vec2(15, 0)).patch == 0);
  }
  SUBCASE("patch at the main origin changes nothing") {
    const auto field = weak_field();
    auto plane = std::make_shared<PlaneMetric>(field, 50.0);
    NormalChart c = build_chart_2d(plane, vec2(0, 0));
    const NormalChart plain = c;
    c.add_patch(vec2(0, 0));
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> U(-40, 40);
    for (int n = 0; n < 300; ++n) {
      const Vec x = vec2(U(rng), U(rng));
      if (!plain.covers(x)) continue;
      CHECK((c.to_uniform(x) - plain.to_uniform(x)).norm() < 1e-12);
    }
  }
  SUBCASE("uncovered second origin") {
    NormalChart c = build_chart_2d(flat2(), vec2(0, 0), 36, vec2(1, 0), flat_options(10));
    CHECK_THROWS_AS(c.add_patch(vec2(30, 0)), Error);
  }
}

TEST_CASE("nearest_node returns the closest meshed vertex") {
  // a field that ends the geodesics at uneven lengths, so some tips are unmeshed
  const NormalChart c = build_chart_2d(weak_field_plane(), vec2(0, 0), 36, vec2(1, 0));
  std::vector<char> meshed(c.nodes().size(), 0);
  for (const auto& cell : c.cells())
    for (int v = 0; v < 3; ++v) meshed[static_cast<std::size_t>(cell[static_cast<std::size_t>(v)])] = 1;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-200, 200);
  for (int k = 0; k < 300; ++k) {
    const Vec x = vec2(U(rng), U(rng));
    double brute = std::numeric_limits<double>::infinity();
    for (std::size_t n = 0; n < c.nodes().size(); ++n)
      if (meshed[n]) brute = std::min(brute, (c.nodes()[n].position - x).norm());
    double d = -1.0;
    const Vec p = c.nearest_node(x, &d);
    CHECK(d == doctest::Approx(brute).epsilon(1e-12));
    CHECK(c.covers(p));
  }
}

TEST_CASE("grid_point_ratio") {
  auto count_oracle = [](double c) {
    // rays from the grey point in the L*=50 plane, nodes every 1/sqrt(c) in u*,v*
    int total = 1;
    for (int j = 0; j < 36; ++j) {
      const double t = kPi / 18.0 * j;
      const Vec e1 = hue_475nm(), e2 = vec2(-e1[1], e1[0]);
      const Vec d = std::cos(t) * e1 + std::sin(t) * e2;
      for (int k = 1;; ++k) {
        const Vec x = (k / std::sqrt(c)) * d;
        if (!in_gamut({50.0, x[0], x[1]})) break;
        ++total;
      }
    }
    return total;
  };
  auto plane_field = [](double c) {
    return constant_metric({vec2(-200, -200), vec2(200, 200)}, Mat(c * Mat::Identity(2, 2)));
  };
  const NormalChart n = build_chart_2d(plane_field(1.0), vec2(0, 0));
  const NormalChart w = build_chart_2d(plane_field(4.0), vec2(0, 0));
  CHECK(n.nodes_in_gamut() == count_oracle(1.0));
  CHECK(w.nodes_in_gamut() == count_oracle(4.0));
  CHECK(grid_point_ratio(n, n) == 1.0);
  CHECK(grid_point_ratio(w, n) == doctest::Approx(double(count_oracle(4.0)) / count_oracle(1.0)));
  const NormalChart coarse = build_chart_2d(plane_field(1.0), vec2(0, 0), 18);
  CHECK_THROWS_AS(grid_point_ratio(coarse, n), Error);
}

TEST_CASE("chart archive round trip is bit exact") {
  NormalChart c = build_chart_2d(flat2(), vec2(0, 0), 36, vec2(1, 0), flat_options(30));
  c.add_patch(vec2(3, 7));
  std::stringstream buf;
  c.save(buf);
  const NormalChart back = NormalChart::load(buf);
  CHECK(back == c);
  std::stringstream again;
  back.save(again);
  CHECK(again.str() == buf.str());
  CHECK(back.to_uniform(vec2(1.5, -2.25)) == c.to_uniform(vec2(1.5, -2.25)));

  std::stringstream bad("CWNC2....");
  CHECK_THROWS_AS(NormalChart::load(bad), ParseError);
  std::stringstream cut(buf.str().substr(0, 200));
  CHECK_THROWS_AS(NormalChart::load(cut), ParseError);
}

TEST_CASE("chart construction is deterministic across thread counts") {
  const auto field = weak_field();
  auto plane = std::make_shared<PlaneMetric>(field, 40.0);
  ChartOptions one, three;
  one.plane_lightness = three.plane_lightness = 40.0;
  one.threads = 1;
  three.threads = 3;
  CHECK(build_chart_2d(plane, vec2(0, 0), 36, hue_475nm(), one) ==
        build_chart_2d(plane, vec2(0, 0), 36, hue_475nm(), three));
}

TEST_CASE("chart errors") {
  CHECK_THROWS_AS(build_chart_2d(flat2(), vec2(0, 0), 2, vec2(1, 0), flat_options()), Error);
  CHECK_THROWS_AS(build_chart_2d(flat2(), vec2(0, 0), 36, vec2(0, 0), flat_options()), Error);
  CHECK_THROWS_AS(build_chart_2d(flat2(), vec2(100, 0), 36, vec2(1, 0), flat_options()), Error);
  CHECK_THROWS_AS(build_chart_2d(flat3(), vec2(0, 0), 36, vec2(1, 0), flat_options()), Error);
  CHECK_THROWS_AS(build_chart_3d(flat3(), vec3(0, 0, 0), 2, 18, vec3(1, 0, 0), vec3(0, 1, 0), flat_options()), Error);
}
