#include "colorweak/colorspace.hpp"

#include <doctest.h>

#include <random>

using namespace colorweak;

TEST_CASE("reference white and black") {
  const LuvColor w = srgb_to_luv({255, 255, 255});
  CHECK(w.L == doctest::Approx(100.0).epsilon(1e-12));
  CHECK(std::abs(w.u) < 1e-9);
  CHECK(std::abs(w.v) < 1e-9);

  const LuvColor k = srgb_to_luv({0, 0, 0});
  CHECK(k.L == 0.0);
  CHECK(k.u == 0.0);
  CHECK(k.v == 0.0);

  const auto back = luv_to_srgb({100.0, 0.0, 0.0});
  CHECK(back.rgb == Rgb8{255, 255, 255});
  CHECK_FALSE(back.clipped);
}

TEST_CASE("white maps to the achromatic point under D50 too") {
  const LuvColor w = srgb_to_luv({255, 255, 255}, WhitePoint::D50());
  CHECK(w.L == doctest::Approx(100.0));
  CHECK(std::abs(w.u) < 1e-9);
  CHECK(std::abs(w.v) < 1e-9);
}

TEST_CASE("sRGB red against the published IEC matrix route") {
  // Independent route: the 7-digit IEC 61966-2-1 matrix and textbook CIELUV,
  // evaluated outside this code base (53.2408, 175.0150, 37.7564).
  const LuvColor red = srgb_to_luv({255, 0, 0});
  CHECK(red.L == doctest::Approx(53.24079).epsilon(1e-4));
  CHECK(red.u == doctest::Approx(175.0150).epsilon(1e-4));
  CHECK(red.v == doctest::Approx(37.7564).epsilon(1e-4));
}

TEST_CASE("round trip on a 17^3 lattice is exact") {
  for (int r = 0; r < 17; ++r)
    for (int g = 0; g < 17; ++g)
      for (int b = 0; b < 17; ++b) {
        const Rgb8 c{static_cast<std::uint8_t>(std::min(255, r * 16)), static_cast<std::uint8_t>(std::min(255, g * 16)),
                     static_cast<std::uint8_t>(std::min(255, b * 16))};
        const auto back = luv_to_srgb(srgb_to_luv(c));
        REQUIRE(back.rgb == c);
        REQUIRE_FALSE(back.clipped);
      }
}

TEST_CASE("gray axis is strictly monotone in L*") {
  double prev = -1.0;
  for (int i = 0; i < 256; ++i) {
    const auto c = static_cast<std::uint8_t>(i);
    const double L = srgb_to_luv({c, c, c}).L;
    CHECK(L > prev);
    prev = L;
  }
}

TEST_CASE("out-of-gamut chroma is clipped") {
  // Gamut scan oracle: no 8-bit colour reaches u* = 300 at any lightness.
  double max_u = -1e9;
  for (int r = 0; r < 256; r += 15)
    for (int g = 0; g < 256; g += 15)
      for (int b = 0; b < 256; b += 15)
        max_u = std::max(max_u, srgb_to_luv({static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g),
                                             static_cast<std::uint8_t>(b)})
                                    .u);
  REQUIRE(max_u < 300.0);
  const auto res = luv_to_srgb({50.0, 300.0, 0.0});
  CHECK(res.clipped);
}

TEST_CASE("in_gamut examples") {
  CHECK(in_gamut({50.0, 0.0, 0.0}));
  CHECK(in_gamut({0.0, 0.0, 0.0}));
  CHECK_FALSE(in_gamut({100.0, 50.0, 50.0}));
  CHECK_FALSE(in_gamut({-5.0, 0.0, 0.0}));
  CHECK_FALSE(in_gamut({50.0, 0.0, -2000.0}));
}

TEST_CASE("in_gamut agrees with the clipped flag") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> L(0.0, 100.0), c(-150.0, 150.0);
  for (int i = 0; i < 20000; ++i) {
    const LuvColor x{L(rng), c(rng), c(rng)};
    CHECK(in_gamut(x) == !luv_to_srgb(x).clipped);
  }
}

TEST_CASE("random 8-bit colours round trip") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> d(0, 255);
  for (int i = 0; i < 100000; ++i) {
    const Rgb8 c{static_cast<std::uint8_t>(d(rng)), static_cast<std::uint8_t>(d(rng)),
                 static_cast<std::uint8_t>(d(rng))};
    const auto back = luv_to_srgb(srgb_to_luv(c));
    REQUIRE(back.rgb == c);
    REQUIRE_FALSE(back.clipped);
  }
}
