#include "colorweak/analysis.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace colorweak;

namespace {

SdScoreSheet sheet(std::array<double, 8> s, std::string image = "lake") {
  SdScoreSheet out;
  out.observer_id = "o1";
  out.image_id = std::move(image);
  out.scores = s;
  return out;
}

std::vector<Point2> random_scatter(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> N(0.0, 20.0);
  std::vector<Point2> pts(n);
  for (auto& p : pts) p = {N(rng) + 5.0, N(rng) - 3.0};
  return pts;
}

std::shared_ptr<const IsometryMap> flat_scaling(double weak) {
  ChartOptions o;
  o.clip_to_gamut = false;
  o.max_radius = 520;
  auto chart = [&](double c) {
    auto g = constant_metric({vec2(-300, -300), vec2(300, 300)}, Mat(c * Mat::Identity(2, 2)));
    return std::make_shared<const NormalChart>(build_chart_2d(g, vec2(0, 0), 36, vec2(1, 0), o));
  };
  return std::make_shared<const IsometryMap>(compose_isometry(chart(1.0), chart(weak), MapDirection::Compensation));
}

}  // namespace

TEST_CASE("pearson and sd_correlation") {
  const auto a = sheet({1, 2, 3, 4, 5, 6, 7, 7});
  CHECK(sd_correlation(a, a) == doctest::Approx(1.0).epsilon(1e-15));
  auto neg = a;
  for (double& s : neg.scores) s = 8.0 - s;  // mirrored about the midpoint 4
  CHECK(sd_correlation(a, neg) == doctest::Approx(-1.0).epsilon(1e-15));

  // by hand: deviations of (2,1,4,3,6,5,8,7) from 4.5 pair with those of 1..8
  // to give sum 38 against sum of squares 42
  const auto x = sheet({1, 2, 3, 4, 5, 6, 7, 8}), y = sheet({2, 1, 4, 3, 6, 5, 8, 7});
  CHECK(std::abs(sd_correlation(x, y) - 38.0 / 42.0) < 1e-12);

  CHECK(sd_correlation(x, y) == doctest::Approx(sd_correlation(y, x)).epsilon(1e-15));
  auto scaled = y;
  for (double& s : scaled.scores) s = 0.5 * s + 3.0;
  CHECK(sd_correlation(x, scaled) == doctest::Approx(sd_correlation(x, y)).epsilon(1e-14));

  CHECK_THROWS_WITH_AS(sd_correlation(x, sheet({4, 4, 4, 4, 4, 4, 4, 4})), "undefined correlation", Error);
  CHECK_THROWS_AS(sd_correlation(x, sheet({1, 2, 3, 4, 5, 6, 7, 8}, "street")), Error);
}

TEST_CASE("SD sheet CSV") {
  std::istringstream in(
      "observer_id,image_id,condition,s1,s2,s3,s4,s5,s6,s7,s8\n"
      "# pilot\n"
      "p1,lake,original,1,2,3,4,5,6,7,1\n"
      "p1,lake,2D+1D,2,2,3,4,5,6,7,1.5\n");
  const auto sheets = parse_sd_sheets(in);
  REQUIRE(sheets.size() == 2);
  CHECK(sheets[1].condition == Condition::PlanarLightness);
  CHECK(sheets[1].scores[7] == 1.5);
  for (Condition c : {Condition::Original, Condition::Planar, Condition::PlanarLightness, Condition::Full,
                      Condition::Simulation})
    CHECK(condition_from_string(to_string(c)) == c);

  auto bad = [](const char* text, ScoreScale scale = {}) {
    std::istringstream s(text);
    return parse_sd_sheets(s, scale);
  };
  CHECK_THROWS_AS(bad("p1,lake,original,1,2,3,4,5,6,7\n"), ParseError);
  CHECK_THROWS_AS(bad("p1,lake,original,1,2,3,4,5,6,7,8\n"), ParseError);
  CHECK_THROWS_AS(bad("p1,lake,sepia,1,2,3,4,5,6,7,7\n"), ParseError);
  CHECK_THROWS_AS(bad("p1,lake,3D,1,2,x,4,5,6,7,7\n"), ParseError);
  CHECK(bad("p1,lake,3D,-3,2,3,0,1,2,-1,3\n", {-3, 3}).size() == 1);
}

TEST_CASE("convex hull") {
  const std::vector<Point2> square{{0, 0}, {2, 0}, {2, 2}, {0, 2}, {1, 1}, {1, 0}, {0, 0}};
  const auto h = convex_hull(square);
  CHECK(h.size() == 4);
  CHECK(polygon_area(h) == 4.0);
  // hull area can never be below the area of any triangle on the points
  const auto pts = random_scatter(300, 3);
  const double area = polygon_area(convex_hull(pts));
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> pick(0, pts.size() - 1);
  for (int k = 0; k < 500; ++k) {
    const Point2 a = pts[pick(rng)], b = pts[pick(rng)], c = pts[pick(rng)];
    const double tri = 0.5 * std::abs((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]));
    CHECK(tri <= area + 1e-9);
  }
}

TEST_CASE("chroma area expansion of scaled scatters") {
  const auto pts = random_scatter(500, 5);
  CHECK(chroma_area_expansion(pts, pts) == 1.0);
  for (double c : {0.5, 2.0, 3.7}) {
    std::vector<Point2> scaled = pts;
    for (auto& p : scaled) p = {c * p[0], c * p[1]};
    CHECK(std::abs(chroma_area_expansion(pts, scaled) - c * c) < 1e-6);
  }
  std::vector<Point2> shuffled = pts;
  std::shuffle(shuffled.begin(), shuffled.end(), std::mt19937_64(6));
  CHECK(chroma_area(shuffled) == chroma_area(pts));

  const std::vector<Point2> line{{0, 0}, {1, 1}, {2, 2}, {5, 5}};
  CHECK_THROWS_AS(chroma_area_expansion(line, pts), Error);

  // the occupied-bin measure follows the hull for fine bins and dense data
  std::vector<Point2> disc, big;
  for (double x = -20; x <= 20; x += 0.05)
    for (double y = -20; y <= 20; y += 0.05)
      if (x * x + y * y <= 400) {
        disc.push_back({x, y});
        big.push_back({2 * x, 2 * y});
      }
  CHECK(chroma_area_expansion(disc, big, AreaMethod::Bins, 1.0) == doctest::Approx(4.0).epsilon(0.05));
  CHECK(area_method_from_string("bins") == AreaMethod::Bins);
}

TEST_CASE("image scatters and size checks") {
  ImageBuffer a(3, 1), b(1, 3);
  a.pixels = {{255, 0, 0}, {0, 255, 0}, {0, 0, 255}};
  b.pixels = a.pixels;
  CHECK_THROWS_AS(chroma_area_expansion(a, b), Error);
  ImageBuffer tiled(6, 1);
  tiled.pixels = {{0, 0, 255}, {255, 0, 0}, {0, 255, 0}, {255, 0, 0}, {0, 0, 255}, {0, 255, 0}};
  ImageBuffer c(6, 1);
  c.pixels = {{255, 0, 0}, {0, 255, 0}, {0, 0, 255}, {0, 0, 255}, {0, 0, 255}, {0, 0, 255}};
  CHECK(chroma_area_expansion(c, tiled) == 1.0);
  CHECK(chroma_scatter(tiled).size() == 3);
  ImageBuffer grey(4, 4, {128, 128, 128});
  CHECK_THROWS_AS(chroma_area_expansion(grey, grey), Error);
}

TEST_CASE("mean L*u*v*") {
  const LuvColor w = mean_luv(ImageBuffer(5, 5, {255, 255, 255}));
  CHECK(std::abs(w.L - 100.0) < 1e-9);
  CHECK(std::abs(w.u) < 1e-9);
  CHECK(std::abs(w.v) < 1e-9);
  ImageBuffer two(2, 1);
  two.pixels = {{0, 0, 0}, {255, 255, 255}};
  const LuvColor m = mean_luv(two);
  CHECK(std::abs(m.L - 50.0) < 1e-9);
  CHECK(std::abs(m.u) < 1e-9);

  // grey ramp: L* of each step from the closed-form sRGB and L* curves
  ImageBuffer ramp(256, 1);
  double expect = 0.0;
  for (int k = 0; k < 256; ++k) {
    ramp.pixels[static_cast<std::size_t>(k)] = {std::uint8_t(k), std::uint8_t(k), std::uint8_t(k)};
    const double e = k / 255.0;
    const double y = e <= 0.04045 ? e / 12.92 : std::pow((e + 0.055) / 1.055, 2.4);
    expect += y > 216.0 / 24389.0 ? 116.0 * std::cbrt(y) - 16.0 : 24389.0 / 27.0 * y;
  }
  expect /= 256.0;
  const LuvColor r = mean_luv(ramp);
  CHECK(std::abs(r.L - expect) < 1e-6);
  CHECK(std::abs(r.u) < 1e-6);
  CHECK(std::abs(r.v) < 1e-6);
  CHECK_THROWS_AS(mean_luv(ImageBuffer()), Error);
}

TEST_CASE("compensation and simulation scale the chroma area by 1/c^2 and c^2") {
  // c = 2: low-chroma colours so that doubling stays inside the sRGB cube
  ImageBuffer img(128, 128);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> L(50, 60), U(-14, 14);
  for (auto& p : img.pixels) {
    RgbResult r;
    do r = luv_to_srgb({L(rng), U(rng), U(rng)});
    while (r.clipped);
    p = r.rgb;
  }
  CompensationConfig cfg;
  cfg.levels.push_back({50.0, flat_scaling(4.0)});
  const ImageBuffer comp = compensate_2d(img, cfg);
  CHECK(chroma_area_expansion(img, comp) == doctest::Approx(0.25).epsilon(0.02));
  cfg.mode = Mode::SimulatePlanar;
  PipelineReport rep;
  const ImageBuffer sim = simulate(img, cfg, &rep);
  CHECK(rep.gamut_clipped == 0);
  CHECK(chroma_area_expansion(img, sim) == doctest::Approx(4.0).epsilon(0.02));
}
