#pragma once

#include "colorweak/colorspace.hpp"
#include "colorweak/isometry.hpp"

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace colorweak {

struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<Rgb8> pixels;  // row-major

  ImageBuffer() = default;
  ImageBuffer(int w, int h, Rgb8 fill = {});

  Rgb8& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)]; }
  const Rgb8& at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  std::size_t size() const { return pixels.size(); }
  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;
};

/// 8-bit RGB PNG; other layouts are converted on read (alpha is dropped).
ImageBuffer read_png(const std::string& path);
void write_png(const ImageBuffer& img, const std::string& path);

enum class Mode { Planar, PlanarLightness, Full, SimulatePlanar, SimulatePlanarLightness, SimulateFull };

/// "2D", "2D+1D", "3D" and their "simulate-" variants.
std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);
bool is_simulation(Mode m);

enum class VertexInterpolation { Barycentric, NearestVertex };

std::string to_string(VertexInterpolation v);
VertexInterpolation vertex_interpolation_from_string(const std::string& s);

/// Missing or inconsistent artefacts for the selected mode.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct LevelMap {
  double lightness = 50.0;
  std::shared_ptr<const IsometryMap> map;  // 2D, either direction
};

inline constexpr std::array<double, 5> kDefaultLevels{30.0, 40.0, 50.0, 60.0, 70.0};

struct CompensationConfig {
  Mode mode = Mode::Planar;
  /// Chromaticity maps keyed by L*; the one closest to a pixel's L* is used,
  /// ties going to the lower level.
  std::vector<LevelMap> levels;
  std::optional<LightnessMap> lightness;
  std::shared_ptr<const IsometryMap> map3d;
  VertexInterpolation interpolation = VertexInterpolation::Barycentric;
  WhitePoint white = WhitePoint::D65();
  unsigned threads = 0;
};

struct PipelineReport {
  std::string mode;
  std::string interpolation;
  std::uint64_t pixels = 0;
  /// Disjoint: mapped + clamped + fallback == pixels.
  std::uint64_t mapped = 0;
  std::uint64_t clamped = 0;
  std::uint64_t fallback = 0;
  /// Output colours clipped into the sRGB cube (overlaps the above).
  std::uint64_t gamut_clipped = 0;
  std::uint64_t unique_colors = 0;
  std::string config_digest;

  /// `key: value` lines.
  std::string to_text() const;
};

struct PipelineResult {
  ImageBuffer image;
  PipelineReport report;
};

/// Per-colour result, before quantisation.
struct PixelResult {
  LuvColor luv;
  bool clamped = false;
  bool fallback = false;
};

/// Validated, direction-resolved form of a config; maps one colour at a time.
class Compensator {
 public:
  explicit Compensator(const CompensationConfig& cfg);

  PixelResult map(const LuvColor& c) const;
  Mode mode() const { return cfg_.mode; }
  /// Index into the level list used for lightness L.
  std::size_t level_for(double L) const;
  const std::string& digest() const { return digest_; }

 private:
  CompensationConfig cfg_;
  std::vector<LevelMap> levels_;  // sorted, resolved to the mode's direction
  std::shared_ptr<const IsometryMap> map3d_;
  std::string digest_;
};

/// Dispatch on cfg.mode.
PipelineResult run_pipeline(const ImageBuffer& img, const CompensationConfig& cfg);

ImageBuffer compensate_2d(const ImageBuffer& img, CompensationConfig cfg, PipelineReport* report = nullptr);
ImageBuffer compensate_2d1d(const ImageBuffer& img, CompensationConfig cfg, PipelineReport* report = nullptr);
ImageBuffer compensate_3d(const ImageBuffer& img, CompensationConfig cfg, PipelineReport* report = nullptr);
/// cfg.mode must be one of the simulate- modes.
ImageBuffer simulate(const ImageBuffer& img, const CompensationConfig& cfg, PipelineReport* report = nullptr);

/// size^3 table of output RGB (as reals) over the RGB cube.
struct Lut {
  int size = 33;
  std::vector<std::array<double, 3>> table;  // r fastest
};

Lut bake_lut(const CompensationConfig& cfg, int size = 33);
ImageBuffer apply_lut(const ImageBuffer& img, const Lut& lut);

}  // namespace colorweak
