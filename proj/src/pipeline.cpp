#include "colorweak/pipeline.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <sstream>
#include <thread>

namespace colorweak {

ImageBuffer::ImageBuffer(int w, int h, Rgb8 fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw Error("image dimensions must be nonnegative");
  pixels.assign(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill);
}

ImageBuffer read_png(const std::string& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str()))
    throw Error("cannot read PNG " + path + ": " + image.message);
  image.format = PNG_FORMAT_RGB;
  ImageBuffer img(static_cast<int>(image.width), static_cast<int>(image.height));
  std::vector<png_byte> raw(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, raw.data(), 0, nullptr)) {
    png_image_free(&image);
    throw Error("cannot decode PNG " + path + ": " + image.message);
  }
  for (std::size_t i = 0; i < img.pixels.size(); ++i) img.pixels[i] = {raw[3 * i], raw[3 * i + 1], raw[3 * i + 2]};
  return img;
}

void write_png(const ImageBuffer& img, const std::string& path) {
  if (img.width <= 0 || img.height <= 0) throw Error("cannot write an empty image");
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  std::vector<png_byte> raw;
  raw.reserve(img.pixels.size() * 3);
  for (const Rgb8& p : img.pixels) {
    raw.push_back(p.r);
    raw.push_back(p.g);
    raw.push_back(p.b);
  }
  if (!png_image_write_to_file(&image, path.c_str(), 0, raw.data(), 0, nullptr))
    throw Error("cannot write PNG " + path + ": " + image.message);
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::Planar: return "2D";
    case Mode::PlanarLightness: return "2D+1D";
    case Mode::Full: return "3D";
    case Mode::SimulatePlanar: return "simulate-2D";
    case Mode::SimulatePlanarLightness: return "simulate-2D+1D";
    case Mode::SimulateFull: return "simulate-3D";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  for (Mode m : {Mode::Planar, Mode::PlanarLightness, Mode::Full, Mode::SimulatePlanar,
                 Mode::SimulatePlanarLightness, Mode::SimulateFull})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown mode '" + s + "' (2D, 2D+1D, 3D, simulate-2D, simulate-2D+1D, simulate-3D)");
}

bool is_simulation(Mode m) {
  return m == Mode::SimulatePlanar || m == Mode::SimulatePlanarLightness || m == Mode::SimulateFull;
}

std::string to_string(VertexInterpolation v) {
  return v == VertexInterpolation::Barycentric ? "barycentric" : "nearest-vertex";
}

VertexInterpolation vertex_interpolation_from_string(const std::string& s) {
  if (s == "barycentric") return VertexInterpolation::Barycentric;
  if (s == "nearest-vertex" || s == "nearest") return VertexInterpolation::NearestVertex;
  throw ConfigError("unknown interpolation '" + s + "' (barycentric, nearest-vertex)");
}

namespace {

bool planar(Mode m) { return m != Mode::Full && m != Mode::SimulateFull; }
bool with_lightness(Mode m) { return m == Mode::PlanarLightness || m == Mode::SimulatePlanarLightness; }

// FNV-1a over the serialized artefacts.
struct Digest {
  std::uint64_t h = 1469598103934665603ull;
  void add(const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 1099511628211ull;
    }
    h ^= 0xff;
    h *= 1099511628211ull;
  }
  void add(double v) {
    std::ostringstream o;
    o.precision(17);
    o << v;
    add(o.str());
  }
  std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
  }
};

std::shared_ptr<const IsometryMap> resolve(const std::shared_ptr<const IsometryMap>& m, MapDirection want) {
  if (m->direction() == want) return m;
  return std::make_shared<const IsometryMap>(m->inverse());
}

unsigned worker_count(unsigned requested, std::size_t jobs) {
  unsigned t = requested ? requested : std::max(1u, std::thread::hardware_concurrency());
  return static_cast<unsigned>(std::max<std::size_t>(1, std::min<std::size_t>(t, jobs)));
}

// Runs fn(i) for i in [0, n) on `threads` workers with a static interleaved split.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Compensator::Compensator(const CompensationConfig& cfg) : cfg_(cfg) {
  const Mode m = cfg.mode;
  const MapDirection want = is_simulation(m) ? MapDirection::Simulation : MapDirection::Compensation;
  Digest d;
  d.add(to_string(m));
  d.add(to_string(cfg.interpolation));
  d.add(cfg.white.X);
  d.add(cfg.white.Y);
  d.add(cfg.white.Z);
  if (planar(m)) {
    if (cfg.levels.empty()) throw ConfigError("mode " + to_string(m) + " needs chromaticity level maps");
    for (const auto& lv : cfg.levels) {
      if (!lv.map || lv.map->dimension() != 2)
        throw ConfigError("level map for L*=" + std::to_string(lv.lightness) + " is missing or not 2D");
      levels_.push_back({lv.lightness, resolve(lv.map, want)});
    }
    std::sort(levels_.begin(), levels_.end(),
              [](const LevelMap& a, const LevelMap& b) { return a.lightness < b.lightness; });
    for (std::size_t i = 1; i < levels_.size(); ++i)
      if (levels_[i].lightness == levels_[i - 1].lightness) throw ConfigError("duplicate level map lightness");
    for (const auto& lv : levels_) {
      d.add(lv.lightness);
      std::ostringstream o;
      lv.map->save(o);
      d.add(o.str());
    }
    if (with_lightness(m)) {
      if (!cfg.lightness) throw ConfigError("mode " + to_string(m) + " needs a lightness map");
      d.add(cfg.lightness->origin());
      for (double v : cfg.lightness->grid()) d.add(v);
      for (double v : cfg.lightness->values()) d.add(v);
    }
  } else {
    if (!cfg.map3d || cfg.map3d->dimension() != 3) throw ConfigError("mode " + to_string(m) + " needs a 3D map");
    map3d_ = resolve(cfg.map3d, want);
    std::ostringstream o;
    map3d_->save(o);
    d.add(o.str());
  }
  digest_ = d.hex();
}

std::size_t Compensator::level_for(double L) const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < levels_.size(); ++i)
    if (std::abs(L - levels_[i].lightness) < std::abs(L - levels_[best].lightness)) best = i;
  return best;
}

PixelResult Compensator::map(const LuvColor& c) const {
  const bool nearest = cfg_.interpolation == VertexInterpolation::NearestVertex;
  PixelResult out;
  if (map3d_) {
    const MapResult r = map3d_->map(c.vec(), true, nearest);
    out.luv = LuvColor::from(r.point);
    out.clamped = r.clamped;
    out.fallback = r.fallback;
    return out;
  }
  // level chosen by the original lightness, before any lightness mapping
  const MapResult r = levels_[level_for(c.L)].map->map(vec2(c.u, c.v), true, nearest);
  out.luv = {c.L, r.point[0], r.point[1]};
  out.clamped = r.clamped;
  out.fallback = r.fallback;
  if (with_lightness(cfg_.mode)) {
    const double l = is_simulation(cfg_.mode) ? cfg_.lightness->simulate(c.L) : cfg_.lightness->compensate(c.L);
    out.luv.L = std::clamp(l, 0.0, 100.0);
    if (out.luv.L != l) out.clamped = true;
  }
  return out;
}

std::string PipelineReport::to_text() const {
  std::ostringstream o;
  o << "mode: " << mode << "\n"
    << "interpolation: " << interpolation << "\n"
    << "pixels: " << pixels << "\n"
    << "mapped: " << mapped << "\n"
    << "clamped: " << clamped << "\n"
    << "fallback: " << fallback << "\n"
    << "gamut_clipped: " << gamut_clipped << "\n"
    << "unique_colors: " << unique_colors << "\n"
    << "config_digest: " << config_digest << "\n";
  return o.str();
}

PipelineResult run_pipeline(const ImageBuffer& img, const CompensationConfig& cfg) {
  if (img.pixels.size() != static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height))
    throw Error("image pixel count does not match its dimensions");
  const Compensator comp(cfg);

  auto key = [](Rgb8 p) { return (std::uint32_t{p.r} << 16) | (std::uint32_t{p.g} << 8) | p.b; };
  std::vector<std::uint32_t> keys;
  keys.reserve(img.pixels.size());
  for (const Rgb8& p : img.pixels) keys.push_back(key(p));
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  struct Entry {
    Rgb8 rgb;
    bool clamped, fallback, clipped;
  };
  std::vector<Entry> mapped(keys.size());
  parallel_for(keys.size(), worker_count(cfg.threads, keys.size()), [&](std::size_t i) {
    const std::uint32_t k = keys[i];
    const Rgb8 in{static_cast<std::uint8_t>(k >> 16), static_cast<std::uint8_t>(k >> 8), static_cast<std::uint8_t>(k)};
    const PixelResult r = comp.map(srgb_to_luv(in, cfg.white));
    const RgbResult rgb = luv_to_srgb(r.luv, cfg.white);
    mapped[i] = {rgb.rgb, r.clamped, r.fallback, rgb.clipped};
  });

  PipelineResult out;
  out.image = ImageBuffer(img.width, img.height);
  PipelineReport& rep = out.report;
  rep.mode = to_string(cfg.mode);
  rep.interpolation = to_string(cfg.interpolation);
  rep.pixels = img.pixels.size();
  rep.unique_colors = keys.size();
  rep.config_digest = comp.digest();
  for (std::size_t p = 0; p < img.pixels.size(); ++p) {
    const auto i = static_cast<std::size_t>(std::lower_bound(keys.begin(), keys.end(), key(img.pixels[p])) - keys.begin());
    const Entry& e = mapped[i];
    out.image.pixels[p] = e.rgb;
    if (e.fallback)
      ++rep.fallback;
    else if (e.clamped)
      ++rep.clamped;
    else
      ++rep.mapped;
    if (e.clipped) ++rep.gamut_clipped;
  }
  return out;
}

namespace {

ImageBuffer run_as(const ImageBuffer& img, CompensationConfig cfg, Mode mode, PipelineReport* report) {
  cfg.mode = mode;
  PipelineResult r = run_pipeline(img, cfg);
  if (report) *report = r.report;
  return std::move(r.image);
}

}  // namespace

ImageBuffer compensate_2d(const ImageBuffer& img, CompensationConfig cfg, PipelineReport* report) {
  return run_as(img, std::move(cfg), Mode::Planar, report);
}

ImageBuffer compensate_2d1d(const ImageBuffer& img, CompensationConfig cfg, PipelineReport* report) {
  return run_as(img, std::move(cfg), Mode::PlanarLightness, report);
}

ImageBuffer compensate_3d(const ImageBuffer& img, CompensationConfig cfg, PipelineReport* report) {
  return run_as(img, std::move(cfg), Mode::Full, report);
}

ImageBuffer simulate(const ImageBuffer& img, const CompensationConfig& cfg, PipelineReport* report) {
  if (!is_simulation(cfg.mode)) throw ConfigError("simulate needs a simulate- mode, got " + to_string(cfg.mode));
  return run_as(img, cfg, cfg.mode, report);
}

Lut bake_lut(const CompensationConfig& cfg, int size) {
  if (size < 2) throw Error("LUT size must be at least 2");
  const Compensator comp(cfg);
  const Eigen::Matrix3d to_xyz = rgb_to_xyz_matrix(cfg.white);
  Lut lut;
  lut.size = size;
  const auto n = static_cast<std::size_t>(size);
  lut.table.resize(n * n * n);
  parallel_for(lut.table.size(), worker_count(cfg.threads, lut.table.size()), [&](std::size_t idx) {
    const std::size_t r = idx % n, g = (idx / n) % n, b = idx / (n * n);
    const Eigen::Vector3d lin(srgb_decode(static_cast<double>(r) / (size - 1)),
                              srgb_decode(static_cast<double>(g) / (size - 1)),
                              srgb_decode(static_cast<double>(b) / (size - 1)));
    const Eigen::Vector3d xyz = to_xyz * lin;
    const PixelResult res = comp.map(xyz_to_luv({xyz[0], xyz[1], xyz[2]}, cfg.white));
    Eigen::Vector3d out = luv_to_linear_rgb(res.luv, cfg.white);
    if (!out.allFinite()) out = luv_to_linear_rgb({res.luv.L, 0.0, 0.0}, cfg.white);
    for (int c = 0; c < 3; ++c) lut.table[idx][static_cast<std::size_t>(c)] = 255.0 * srgb_encode(std::clamp(out[c], 0.0, 1.0));
  });
  return lut;
}

ImageBuffer apply_lut(const ImageBuffer& img, const Lut& lut) {
  const int n = lut.size;
  if (lut.table.size() != static_cast<std::size_t>(n) * n * n) throw Error("LUT table has the wrong size");
  ImageBuffer out(img.width, img.height);
  auto at = [&](int r, int g, int b) -> const std::array<double, 3>& {
    return lut.table[(static_cast<std::size_t>(b) * n + g) * n + r];
  };
  for (std::size_t p = 0; p < img.pixels.size(); ++p) {
    const Rgb8 in = img.pixels[p];
    int i0[3];
    double f[3];
    const double ch[3] = {double(in.r), double(in.g), double(in.b)};
    for (int c = 0; c < 3; ++c) {
      const double t = ch[c] / 255.0 * (n - 1);
      i0[c] = std::min(static_cast<int>(t), n - 2);
      f[c] = t - i0[c];
    }
    double acc[3] = {0, 0, 0};
    for (int corner = 0; corner < 8; ++corner) {
      const int dr = corner & 1, dg = (corner >> 1) & 1, db = (corner >> 2) & 1;
      const double w = (dr ? f[0] : 1 - f[0]) * (dg ? f[1] : 1 - f[1]) * (db ? f[2] : 1 - f[2]);
      const auto& v = at(i0[0] + dr, i0[1] + dg, i0[2] + db);
      for (int c = 0; c < 3; ++c) acc[c] += w * v[static_cast<std::size_t>(c)];
    }
    auto q = [](double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 255.0))); };
    out.pixels[p] = {q(acc[0]), q(acc[1]), q(acc[2])};
  }
  return out;
}

}  // namespace colorweak
