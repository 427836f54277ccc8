#pragma once

#include "colorweak/types.hpp"

#include <cstdint>

namespace colorweak {

struct LuvColor {
  double L = 0.0;
  double u = 0.0;
  double v = 0.0;

  Vec vec() const { return vec3(L, u, v); }
  static LuvColor from(const Vec& x) { return {x[0], x[1], x[2]}; }
  friend bool operator==(const LuvColor&, const LuvColor&) = default;
};

struct Rgb8 {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb8&, const Rgb8&) = default;
};

/// Reference white tristimulus, Y normalised to 100.
struct WhitePoint {
  double X = 95.047;
  double Y = 100.0;
  double Z = 108.883;

  static WhitePoint D65() { return {95.047, 100.0, 108.883}; }
  static WhitePoint D50() { return {96.422, 100.0, 82.521}; }
};

struct XyzColor {
  double X = 0.0;
  double Y = 0.0;
  double Z = 0.0;
};

struct RgbResult {
  Rgb8 rgb;
  bool clipped = false;
};

// Linear-light sRGB <-> XYZ. The matrix is derived from the sRGB primaries
// with the RGB white anchored at `wp`, so (255,255,255) always maps to wp.
Eigen::Matrix3d rgb_to_xyz_matrix(const WhitePoint& wp);

double srgb_decode(double encoded);
double srgb_encode(double linear);

XyzColor luv_to_xyz(const LuvColor& c, const WhitePoint& wp);
LuvColor xyz_to_luv(const XyzColor& c, const WhitePoint& wp);

LuvColor srgb_to_luv(Rgb8 c, const WhitePoint& wp = WhitePoint::D65());

/// Inverse of srgb_to_luv. `clipped` is set when a linear channel left [0,1]
/// (beyond 1e-9) and had to be clamped.
RgbResult luv_to_srgb(const LuvColor& c, const WhitePoint& wp = WhitePoint::D65());

/// Linear RGB (unclamped) for a CIELUV colour; NaN components mark colours
/// with no valid chromaticity (v' <= 0 at positive lightness).
Eigen::Vector3d luv_to_linear_rgb(const LuvColor& c, const WhitePoint& wp = WhitePoint::D65());

bool in_gamut(const LuvColor& c, const WhitePoint& wp = WhitePoint::D65());

}  // namespace colorweak
