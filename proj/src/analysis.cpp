#include "colorweak/analysis.hpp"
#include "csv.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <utility>

namespace colorweak {

std::string to_string(Condition c) {
  switch (c) {
    case Condition::Original: return "original";
    case Condition::Planar: return "2D";
    case Condition::PlanarLightness: return "2D+1D";
    case Condition::Full: return "3D";
    case Condition::Simulation: return "simulation";
  }
  return "?";
}

Condition condition_from_string(const std::string& s) {
  for (Condition c : {Condition::Original, Condition::Planar, Condition::PlanarLightness, Condition::Full,
                      Condition::Simulation})
    if (to_string(c) == s) return c;
  throw Error("unknown condition '" + s + "'");
}

std::vector<SdScoreSheet> parse_sd_sheets(std::istream& in, ScoreScale scale) {
  if (!(scale.lo < scale.hi)) throw Error("score scale must have lo < hi");
  std::vector<SdScoreSheet> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    line = csv::trim(line);
    if (line.empty() || line[0] == '#' || line.rfind("observer_id", 0) == 0) continue;
    const auto f = csv::split(line);
    if (f.size() != 11) throw ParseError("expected 11 fields, got " + std::to_string(f.size()), n);
    SdScoreSheet s;
    s.observer_id = csv::trim(f[0]);
    s.image_id = csv::trim(f[1]);
    if (s.observer_id.empty() || s.image_id.empty()) throw ParseError("empty observer or image id", n);
    try {
      s.condition = condition_from_string(csv::trim(f[2]));
    } catch (const Error& e) {
      throw ParseError(e.what(), n);
    }
    for (std::size_t i = 0; i < 8; ++i) {
      const double v = csv::to_double(f[3 + i], n, "score");
      if (v < scale.lo || v > scale.hi) throw ParseError("score " + f[3 + i] + " outside the scale", n);
      s.scores[i] = v;
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<SdScoreSheet> load_sd_sheets(const std::string& path, ScoreScale scale) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  return parse_sd_sheets(in, scale);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw Error("pearson needs two samples of equal length >= 2");
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) throw Error("undefined correlation");
  return sab / std::sqrt(saa * sbb);
}

double sd_correlation(const SdScoreSheet& a, const SdScoreSheet& b) {
  if (a.image_id != b.image_id) throw Error("sheets are for different images: " + a.image_id + ", " + b.image_id);
  return pearson(a.scores, b.scores);
}

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

}  // namespace

std::vector<Point2> convex_hull(std::vector<Point2> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<Point2> h(2 * pts.size());
  std::size_t k = 0;
  for (const Point2& p : pts) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p) <= 0) --k;
    h[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(h[k - 2], h[k - 1], pts[i]) <= 0) --k;
    h[k++] = pts[i];
  }
  h.resize(k - 1);
  return h;
}

double polygon_area(std::span<const Point2> poly) {
  double a = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % poly.size()];
    a += p[0] * q[1] - q[0] * p[1];
  }
  return 0.5 * std::abs(a);
}

std::string to_string(AreaMethod m) { return m == AreaMethod::Hull ? "hull" : "bins"; }

AreaMethod area_method_from_string(const std::string& s) {
  if (s == "hull") return AreaMethod::Hull;
  if (s == "bins") return AreaMethod::Bins;
  throw Error("unknown area method '" + s + "' (hull, bins)");
}

double chroma_area(std::span<const Point2> uv, AreaMethod method, double bin) {
  if (method == AreaMethod::Hull) {
    const auto hull = convex_hull({uv.begin(), uv.end()});
    return hull.size() < 3 ? 0.0 : polygon_area(hull);
  }
  if (!(bin > 0.0)) throw Error("bin size must be positive");
  std::set<std::pair<long long, long long>> cells;
  for (const Point2& p : uv)
    cells.emplace(static_cast<long long>(std::floor(p[0] / bin)), static_cast<long long>(std::floor(p[1] / bin)));
  return static_cast<double>(cells.size()) * bin * bin;
}

double chroma_area_expansion(std::span<const Point2> before, std::span<const Point2> after, AreaMethod method,
                             double bin) {
  const double a0 = chroma_area(before, method, bin);
  if (!(a0 > 0.0)) throw Error("degenerate chroma scatter: the before image has zero area");
  return chroma_area(after, method, bin) / a0;
}

std::vector<Point2> chroma_scatter(const ImageBuffer& img, const WhitePoint& wp) {
  std::vector<std::uint32_t> keys;
  keys.reserve(img.pixels.size());
  for (const Rgb8& p : img.pixels) keys.push_back((std::uint32_t{p.r} << 16) | (std::uint32_t{p.g} << 8) | p.b);
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());
  std::vector<Point2> out;
  out.reserve(keys.size());
  for (std::uint32_t k : keys) {
    const LuvColor c = srgb_to_luv({std::uint8_t(k >> 16), std::uint8_t(k >> 8), std::uint8_t(k)}, wp);
    out.push_back({c.u, c.v});
  }
  return out;
}

double chroma_area_expansion(const ImageBuffer& before, const ImageBuffer& after, AreaMethod method, double bin,
                             const WhitePoint& wp) {
  if (before.width != after.width || before.height != after.height)
    throw Error("images differ in size: " + std::to_string(before.width) + "x" + std::to_string(before.height) +
                " vs " + std::to_string(after.width) + "x" + std::to_string(after.height));
  return chroma_area_expansion(chroma_scatter(before, wp), chroma_scatter(after, wp), method, bin);
}

LuvColor mean_luv(const ImageBuffer& img, const WhitePoint& wp) {
  if (img.pixels.empty()) throw Error("mean_luv of an empty image");
  double L = 0, u = 0, v = 0;
  for (const Rgb8& p : img.pixels) {
    const LuvColor c = srgb_to_luv(p, wp);
    L += c.L;
    u += c.u;
    v += c.v;
  }
  const auto n = static_cast<double>(img.pixels.size());
  return {L / n, u / n, v / n};
}

}  // namespace colorweak
