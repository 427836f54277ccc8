#include "colorweak/colorspace.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace colorweak {
namespace {

constexpr double kEpsilon = 216.0 / 24389.0;
constexpr double kKappa = 24389.0 / 27.0;
constexpr double kClipTolerance = 1e-9;

// sRGB primaries (x, y).
constexpr double kPrimaries[3][2] = {{0.64, 0.33}, {0.30, 0.60}, {0.15, 0.06}};

struct Matrices {
  WhitePoint wp{0.0, 0.0, 0.0};
  Eigen::Matrix3d to_xyz;
  Eigen::Matrix3d to_rgb;
};

const Matrices& matrices_for(const WhitePoint& wp) {
  thread_local Matrices cache;
  if (cache.wp.X != wp.X || cache.wp.Y != wp.Y || cache.wp.Z != wp.Z) {
    cache.wp = wp;
    cache.to_xyz = rgb_to_xyz_matrix(wp);
    cache.to_rgb = cache.to_xyz.inverse();
  }
  return cache;
}

const std::array<double, 256>& decode_table() {
  static const std::array<double, 256> table = [] {
    std::array<double, 256> t{};
    for (int i = 0; i < 256; ++i) t[i] = srgb_decode(i / 255.0);
    return t;
  }();
  return table;
}

double white_u(const WhitePoint& wp) { return 4.0 * wp.X / (wp.X + 15.0 * wp.Y + 3.0 * wp.Z); }
double white_v(const WhitePoint& wp) { return 9.0 * wp.Y / (wp.X + 15.0 * wp.Y + 3.0 * wp.Z); }

std::uint8_t quantize(double linear) {
  double e = srgb_encode(std::min(std::max(linear, 0.0), 1.0));
  return static_cast<std::uint8_t>(std::lround(e * 255.0));
}

}  // namespace

Eigen::Matrix3d rgb_to_xyz_matrix(const WhitePoint& wp) {
  Eigen::Matrix3d p;
  for (int c = 0; c < 3; ++c) {
    const double x = kPrimaries[c][0];
    const double y = kPrimaries[c][1];
    p(0, c) = x / y;
    p(1, c) = 1.0;
    p(2, c) = (1.0 - x - y) / y;
  }
  const Eigen::Vector3d white(wp.X, wp.Y, wp.Z);
  const Eigen::Vector3d scale = p.inverse() * white;
  return p * scale.asDiagonal();
}

double srgb_decode(double e) {
  return e <= 0.04045 ? e / 12.92 : std::pow((e + 0.055) / 1.055, 2.4);
}

double srgb_encode(double l) {
  return l <= 0.0031308 ? 12.92 * l : 1.055 * std::pow(l, 1.0 / 2.4) - 0.055;
}

LuvColor xyz_to_luv(const XyzColor& c, const WhitePoint& wp) {
  const double yr = c.Y / wp.Y;
  const double L = yr > kEpsilon ? 116.0 * std::cbrt(yr) - 16.0 : kKappa * yr;
  const double denom = c.X + 15.0 * c.Y + 3.0 * c.Z;
  if (denom <= 0.0) return {L, 0.0, 0.0};
  const double up = 4.0 * c.X / denom;
  const double vp = 9.0 * c.Y / denom;
  return {L, 13.0 * L * (up - white_u(wp)), 13.0 * L * (vp - white_v(wp))};
}

XyzColor luv_to_xyz(const LuvColor& c, const WhitePoint& wp) {
  if (c.L == 0.0) return {0.0, 0.0, 0.0};
  const double Y = c.L > kKappa * kEpsilon ? wp.Y * std::pow((c.L + 16.0) / 116.0, 3.0)
                                           : wp.Y * c.L / kKappa;
  const double up = c.u / (13.0 * c.L) + white_u(wp);
  const double vp = c.v / (13.0 * c.L) + white_v(wp);
  if (vp <= 0.0) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, Y, nan};
  }
  return {Y * 9.0 * up / (4.0 * vp), Y, Y * (12.0 - 3.0 * up - 20.0 * vp) / (4.0 * vp)};
}

LuvColor srgb_to_luv(Rgb8 c, const WhitePoint& wp) {
  const auto& dec = decode_table();
  const Eigen::Vector3d lin(dec[c.r], dec[c.g], dec[c.b]);
  const Eigen::Vector3d xyz = matrices_for(wp).to_xyz * lin;
  return xyz_to_luv({xyz[0], xyz[1], xyz[2]}, wp);
}

Eigen::Vector3d luv_to_linear_rgb(const LuvColor& c, const WhitePoint& wp) {
  const XyzColor xyz = luv_to_xyz(c, wp);
  return matrices_for(wp).to_rgb * Eigen::Vector3d(xyz.X, xyz.Y, xyz.Z);
}

RgbResult luv_to_srgb(const LuvColor& c, const WhitePoint& wp) {
  Eigen::Vector3d lin = luv_to_linear_rgb(c, wp);
  RgbResult out;
  if (!lin.allFinite()) {
    // No valid chromaticity: fall back to the grey of the same lightness.
    out.clipped = true;
    lin = luv_to_linear_rgb({c.L, 0.0, 0.0}, wp);
  }
  for (int i = 0; i < 3; ++i)
    if (lin[i] < -kClipTolerance || lin[i] > 1.0 + kClipTolerance) out.clipped = true;
  out.rgb = {quantize(lin[0]), quantize(lin[1]), quantize(lin[2])};
  return out;
}

bool in_gamut(const LuvColor& c, const WhitePoint& wp) { return !luv_to_srgb(c, wp).clipped; }

}  // namespace colorweak
