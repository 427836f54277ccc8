#pragma once

#include "colorweak/pipeline.hpp"

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace colorweak {

enum class Condition { Original, Planar, PlanarLightness, Full, Simulation };

/// "original", "2D", "2D+1D", "3D", "simulation".
std::string to_string(Condition c);
Condition condition_from_string(const std::string& s);

struct ScoreScale {
  double lo = 1.0;
  double hi = 7.0;
};

/// One questionnaire: eight adjective-pair scores in a fixed order.
struct SdScoreSheet {
  std::string observer_id;
  std::string image_id;
  Condition condition = Condition::Original;
  std::array<double, 8> scores{};
};

/// CSV rows `observer_id,image_id,condition,s1..s8`; a header line starting
/// with `observer_id` and `#` comments are skipped.
std::vector<SdScoreSheet> parse_sd_sheets(std::istream& in, ScoreScale scale = {});
std::vector<SdScoreSheet> load_sd_sheets(const std::string& path, ScoreScale scale = {});

/// Pearson r. Throws "undefined correlation" when either side is constant.
double pearson(std::span<const double> a, std::span<const double> b);
/// Sheets must describe the same image.
double sd_correlation(const SdScoreSheet& a, const SdScoreSheet& b);

using Point2 = std::array<double, 2>;

/// Counter-clockwise hull without collinear points (Andrew's monotone chain).
std::vector<Point2> convex_hull(std::vector<Point2> pts);
double polygon_area(std::span<const Point2> poly);

enum class AreaMethod { Hull, Bins };

std::string to_string(AreaMethod m);
AreaMethod area_method_from_string(const std::string& s);

/// Area of the (u*, v*) scatter: convex hull, or occupied bins of side `bin`.
double chroma_area(std::span<const Point2> uv, AreaMethod method = AreaMethod::Hull, double bin = 1.0);
/// after / before; throws when the before area is degenerate.
double chroma_area_expansion(std::span<const Point2> before, std::span<const Point2> after,
                             AreaMethod method = AreaMethod::Hull, double bin = 1.0);

/// (u*, v*) of every distinct colour in the image.
std::vector<Point2> chroma_scatter(const ImageBuffer& img, const WhitePoint& wp = WhitePoint::D65());
double chroma_area_expansion(const ImageBuffer& before, const ImageBuffer& after,
                             AreaMethod method = AreaMethod::Hull, double bin = 1.0,
                             const WhitePoint& wp = WhitePoint::D65());

LuvColor mean_luv(const ImageBuffer& img, const WhitePoint& wp = WhitePoint::D65());

}  // namespace colorweak
