#include "colorweak/isometry.hpp"
#include "colorweak/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace colorweak;

namespace {

std::shared_ptr<const Metric> flat2(double c) {
  return constant_metric({vec2(-60, -60), vec2(60, 60)}, Mat(c * Mat::Identity(2, 2)));
}

std::shared_ptr<const NormalChart> flat_chart(double c, double max_radius = 50.0) {
  ChartOptions o;
  o.clip_to_gamut = false;
  o.max_radius = max_radius;
  return std::make_shared<const NormalChart>(build_chart_2d(flat2(c), vec2(0, 0), 36, vec2(1, 0), o));
}

std::shared_ptr<const Metric> plane_of(const synthetic::ObserverModel& model, double L) {
  auto field = std::make_shared<FunctionMetric>(Box{vec3(0, -150, -150), vec3(100, 150, 150)},
                                                [model](const Vec& x) { return Mat(model(LuvColor::from(x))); });
  return std::make_shared<PlaneMetric>(field, L);
}

LightnessMetric constant_1d(double g) { return {[g](double) { return g; }, 0.0, 100.0}; }

}  // namespace

TEST_CASE("identical charts give the identity map") {
  auto plane = plane_of(synthetic::normal_observer(), 50.0);
  auto chart = std::make_shared<const NormalChart>(build_chart_2d(plane, vec2(0, 0)));
  const IsometryMap id = compose_isometry(chart, chart, MapDirection::Compensation);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> U(-40, 40);
  int tested = 0;
  for (int n = 0; n < 2000; ++n) {
    const Vec x = vec2(U(rng), U(rng));
    if (!chart->covers(x)) continue;
    CHECK((id.apply(x) - x).norm() < 1e-6);
    ++tested;
  }
  CHECK(tested > 500);
  CHECK(isometry_residual(id, *plane, *plane, vec2(5, -3)) < 1e-6);
}

TEST_CASE("flat scaling pair: compensation halves radial distance") {
  auto normal = flat_chart(1.0);
  auto weak = flat_chart(4.0);
  const IsometryMap comp = compose_isometry(normal, weak, MapDirection::Compensation);
  const IsometryMap sim = compose_isometry(weak, normal, MapDirection::Simulation);
  CHECK((comp.apply(vec2(0, 0)) - vec2(0, 0)).norm() < 1e-12);
  CHECK((comp.apply(vec2(8, 0)) - vec2(4, 0)).norm() < 1e-3);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-34, 34);
  for (int n = 0; n < 1000; ++n) {
    const Vec x = vec2(U(rng), U(rng));
    CHECK((comp.apply(x) - 0.5 * x).norm() < 1e-3);
    CHECK((sim.apply(comp.apply(x)) - x).norm() < 2e-6);
  }
  CHECK(comp.inverse().direction() == MapDirection::Simulation);
  CHECK((comp.inverse().apply(vec2(3, 4)) - vec2(6, 8)).norm() < 1e-9);
}

TEST_CASE("source nodes map to the corresponding target nodes") {
  auto normal = std::make_shared<const NormalChart>(build_chart_2d(plane_of(synthetic::normal_observer(), 50), vec2(0, 0)));
  auto weak = std::make_shared<const NormalChart>(build_chart_2d(plane_of(synthetic::weak_observer(), 50), vec2(0, 0)));
  const IsometryMap comp = compose_isometry(normal, weak, MapDirection::Compensation);
  for (int j = 0; j < 36; j += 5) {
    const auto src = normal->geodesic(j);
    const auto dst = weak->geodesic(j);
    for (std::size_t k = 0; k < std::min(src.size(), dst.size()); k += 3)
      CHECK((comp.apply(normal->nodes()[static_cast<std::size_t>(src[k])].position) -
             weak->nodes()[static_cast<std::size_t>(dst[k])].position)
                .norm() < 1e-9);
  }
}

TEST_CASE("radial clamping and fallback") {
  auto weak = flat_chart(4.0, 50.0);    // reaches Euclidean radius 25, r = 50
  auto normal = flat_chart(1.0, 30.0);  // r = 30
  const IsometryMap sim = compose_isometry(weak, normal, MapDirection::Simulation);
  const MapResult in = sim.map(vec2(10, 0));
  CHECK_FALSE(in.clamped);
  CHECK((in.point - vec2(20, 0)).norm() < 1e-9);
  const MapResult out = sim.map(vec2(0, 20));
  CHECK(out.clamped);
  CHECK((out.point - vec2(0, 30)).norm() < 1e-6);

  CHECK_THROWS_AS(sim.apply(vec2(40, 0)), UncoveredPoint);
  const MapResult fb = sim.map(vec2(40, 0), true);
  CHECK(fb.fallback);
  CHECK(fb.clamped);
  CHECK((fb.point - vec2(30, 0)).norm() < 1e-6);
}

TEST_CASE("isometry residual") {
  auto n = flat2(1.0), w = flat2(4.0);
  auto normal = flat_chart(1.0), weak = flat_chart(4.0);
  const IsometryMap comp = compose_isometry(normal, weak, MapDirection::Compensation);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-30, 30);
  for (int k = 0; k < 100; ++k) CHECK(isometry_residual(comp, *n, *w, vec2(U(rng), U(rng))) < 1e-3);

  // a target chart built on the wrong field is detected
  const IsometryMap wrong = compose_isometry(normal, flat_chart(1.0), MapDirection::Compensation);
  CHECK(isometry_residual(wrong, *n, *w, vec2(3, 2)) > 0.1);
  // and so is a source chart read back through an isotropic target
  ChartOptions o;
  o.clip_to_gamut = false;
  o.max_radius = 50;
  Mat aniso = Mat::Identity(2, 2);
  aniso(1, 1) = 4.0;
  auto an = constant_metric({vec2(-60, -60), vec2(60, 60)}, aniso);
  auto an_chart = std::make_shared<const NormalChart>(build_chart_2d(an, vec2(0, 0), 36, vec2(1, 0), o));
  const IsometryMap self = compose_isometry(an_chart, an_chart, MapDirection::Compensation);
  CHECK(isometry_residual(self, *an, *an, vec2(3, 2)) < 1e-6);
  const IsometryMap crossed = compose_isometry(an_chart, flat_chart(1.0), MapDirection::Compensation);
  CHECK(isometry_residual(crossed, *an, *an, vec2(3, 2)) > 0.1);

  CHECK_THROWS_AS(isometry_residual(comp, *n, *w, vec2(49.8, 0)), Error);
}

TEST_CASE("compose_isometry enforces alignment") {
  ChartOptions o;
  o.clip_to_gamut = false;
  o.max_radius = 20;
  auto a = std::make_shared<const NormalChart>(build_chart_2d(flat2(1), vec2(0, 0), 36, vec2(1, 0), o));
  auto b = std::make_shared<const NormalChart>(build_chart_2d(flat2(1), vec2(0, 0), 24, vec2(1, 0), o));
  CHECK_THROWS_AS(compose_isometry(a, b, MapDirection::Compensation), Error);
  o.radial_spacing = 2.0;
  auto c = std::make_shared<const NormalChart>(build_chart_2d(flat2(1), vec2(0, 0), 36, vec2(1, 0), o));
  CHECK_THROWS_AS(compose_isometry(a, c, MapDirection::Compensation), Error);
  auto d3 = std::make_shared<const NormalChart>(build_chart_3d(
      constant_metric({vec3(-9, -9, -9), vec3(9, 9, 9)}, Mat::Identity(3, 3)), vec3(0, 0, 0), 13, 18,
      vec3(1, 0, 0), vec3(0, 1, 0), [] {
        ChartOptions q;
        q.clip_to_gamut = false;
        q.max_radius = 5;
        return q;
      }()));
  CHECK_THROWS_AS(compose_isometry(a, d3, MapDirection::Compensation), Error);
  CHECK(map_direction_from_string("simulation") == MapDirection::Simulation);
  CHECK_THROWS_AS(map_direction_from_string("sideways"), Error);
}

TEST_CASE("map archive round trip") {
  const IsometryMap comp = compose_isometry(flat_chart(1.0, 20), flat_chart(4.0, 20), MapDirection::Compensation);
  std::stringstream buf;
  comp.save(buf);
  const IsometryMap back = IsometryMap::load(buf);
  CHECK(back.direction() == MapDirection::Compensation);
  CHECK(back.source() == comp.source());
  CHECK(back.target() == comp.target());
  CHECK(back.apply(vec2(1.25, -3.5)) == comp.apply(vec2(1.25, -3.5)));
  std::stringstream bad("CWIM0");
  CHECK_THROWS_AS(IsometryMap::load(bad), ParseError);
}

TEST_CASE("lightness map: closed forms") {
  {
    const LightnessMap m = build_lightness_map(constant_1d(2.5), constant_1d(2.5), 30.0);
    for (double l = 0; l <= 100; l += 0.37) CHECK(std::abs(m.simulate(l) - l) < 1e-12);
  }
  {
    const LightnessMap m = build_lightness_map(constant_1d(1.0), constant_1d(4.0), 0.0);
    for (double l = 0; l <= 100; l += 0.37) {
      CHECK(std::abs(m.simulate(l) - 2.0 * l) < 1e-9);
      CHECK(std::abs(m.compensate(l) - 0.5 * l) < 1e-9);
    }
  }
  {
    const LightnessMetric gw{[](double l) { return (1.0 + l) * (1.0 + l); }, 0.0, 100.0};
    const LightnessMap m = build_lightness_map(constant_1d(1.0), gw, 0.0);
    double worst = 0.0;
    for (int i = 0; i <= 7000; ++i) {
      const double l = 70.0 * i / 7000.0;
      worst = std::max(worst, std::abs(m.simulate(l) - (l + 0.5 * l * l)));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("lightness map: monotone with an exact inverse") {
  const LightnessMetric gn{[](double l) { return 1.0 + 0.3 * std::sin(l / 9.0); }, 0.0, 100.0};
  const LightnessMetric gw{[](double l) { return 2.0 + std::cos(l / 13.0); }, 0.0, 100.0};
  const LightnessMap m = build_lightness_map(gn, gw, 30.0);
  CHECK(m.simulate(30.0) == 30.0);
  CHECK(m.compensate(30.0) == 30.0);
  double prev = -1e300;
  for (int i = 0; i <= 10000; ++i) {
    const double l = -5.0 + 110.0 * i / 10000.0;
    const double w = m.simulate(l);
    CHECK(w > prev);
    prev = w;
    CHECK(std::abs(m.compensate(w) - l) < 1e-9);
  }
  // arc-length oracle by a plain trapezoid sum
  auto arc = [](const LightnessMetric& g, double a, double b) {
    const int n = 200000;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double t0 = a + (b - a) * i / n, t1 = a + (b - a) * (i + 1) / n;
      s += 0.5 * (std::sqrt(g(t0)) + std::sqrt(g(t1))) * (t1 - t0);
    }
    return s;
  };
  for (double l : {10.0, 45.0, 60.0}) CHECK(arc(gn, 30.0, m.simulate(l)) == doctest::Approx(arc(gw, 30.0, l)).epsilon(1e-8));
}

TEST_CASE("lightness map errors") {
  const LightnessMetric bad{[](double l) { return l - 50.0; }, 0.0, 100.0};
  CHECK_THROWS_AS(build_lightness_map(constant_1d(1.0), bad, 30.0), Error);
  CHECK_THROWS_AS(build_lightness_map(constant_1d(1.0), constant_1d(1.0), 120.0), Error);
  const LightnessMap id = LightnessMap::identity();
  CHECK(id.simulate(42.0) == 42.0);
  CHECK(id.compensate(42.0) == 42.0);
}
