#include "colorweak/cli.hpp"

#include "colorweak/analysis.hpp"
#include "colorweak/pipeline.hpp"
#include "colorweak/service.hpp"
#include "colorweak/synthetic.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

namespace colorweak {
namespace {

// Input problems the user can fix: reported with exit code 2.
class UsageError : public Error {
 public:
  using Error::Error;
};

std::vector<double> parse_numbers(const std::string& s, const char* what) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw UsageError(std::string("invalid ") + what + " '" + s + "'");
    }
  }
  return out;
}

Vec parse_point(const std::string& s, int dim, const char* what) {
  const auto v = parse_numbers(s, what);
  if (static_cast<int>(v.size()) != dim)
    throw UsageError(std::string(what) + " needs " + std::to_string(dim) + " comma-separated values");
  return dim == 2 ? vec2(v[0], v[1]) : vec3(v[0], v[1], v[2]);
}

WhitePoint parse_white(const std::string& s) {
  if (s == "D65") return WhitePoint::D65();
  if (s == "D50") return WhitePoint::D50();
  const auto v = parse_numbers(s, "white point");
  if (v.size() != 3 || v[1] <= 0) throw UsageError("white point must be D65, D50 or X,Y,Z");
  return {v[0], v[1], v[2]};
}

std::shared_ptr<const Metric> load_field(const std::string& path) {
  return std::make_shared<const MetricField>(MetricField::load(path));
}

std::string fixed(double v, int prec = 4) {
  std::ostringstream o;
  o << std::fixed << std::setprecision(prec) << v;
  return o.str();
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string output;
  std::vector<std::string> observers{"normal=normal", "weak=weak"};
  double noise = 0.0;
  std::uint64_t seed = 1;
};

synthetic::ObserverModel parse_model(const std::string& spec) {
  // <model>[*factor]
  const auto star = spec.find('*');
  const std::string name = spec.substr(0, star);
  synthetic::ObserverModel base;
  if (name == "normal")
    base = synthetic::normal_observer();
  else if (name == "weak")
    base = synthetic::weak_observer();
  else
    throw UsageError("unknown observer model '" + name + "' (normal, weak)");
  if (star == std::string::npos) return base;
  const auto f = parse_numbers(spec.substr(star + 1), "model factor");
  if (f.size() != 1 || !(f[0] > 0)) throw UsageError("model factor must be one positive number");
  return synthetic::scaled(base, f[0]);
}

int cmd_synth(const SynthArgs& a, std::ostream& out) {
  std::vector<std::pair<std::string, synthetic::ObserverModel>> obs;
  for (const auto& o : a.observers) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError("observer must be name=model[*factor]: '" + o + "'");
    obs.emplace_back(o.substr(0, eq), parse_model(o.substr(eq + 1)));
  }
  synthetic::RunOptions ro;
  ro.seed = a.seed;
  ro.noise = a.noise;
  const MeasurementSet set = synthetic::simulate_measurements(obs, synthetic::protocol_centers(), ro);
  std::ofstream f(a.output);
  if (!f) throw Error("cannot write " + a.output);
  write_measurements(f, set);
  out << "records: " << set.records.size() << "\n"
      << "observers: " << obs.size() << "\n"
      << "centers: " << set.centers.size() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  std::string input, output, observer, versus, method = "bspline";
  int dim = 3;
  double level = 50.0, sigma = 1.5, spacing = 5.0, pad = 0.0;
};

int cmd_fit(const FitArgs& a, std::ostream& out) {
  const MeasurementSet set = load_measurements(a.input);
  const auto observers = set.observers();
  if (observers.empty()) throw UsageError(a.input + " has no records");
  std::string id = a.observer;
  if (id.empty()) {
    if (observers.size() != 1) throw UsageError("several observers in " + a.input + "; pick one with --observer");
    id = observers.front();
  }
  const auto ellipsoids = fit_observer(set, id);

  out << "observer: " << id << "\n";
  out << "level  ellipsoids\n";
  std::map<double, int> per_level;
  for (const auto& e : ellipsoids) ++per_level[e.center.L];
  for (const auto& [L, n] : per_level) out << std::setw(5) << fixed(L, 1) << "  " << n << "\n";
  out << "total  " << ellipsoids.size() << "\n";

  if (!a.versus.empty()) {
    const auto weak = fit_observer(set, a.versus);
    out << "\nratio " << a.versus << " / " << id << "\n";
    out << "level  volume    area\n";
    for (const auto& [L, n] : per_level)
      out << std::setw(5) << fixed(L, 1) << "  " << fixed(volume_ratio(ellipsoids, weak, L)) << "  "
          << fixed(area_ratio(ellipsoids, weak, L)) << "\n";
    out << "all    " << fixed(volume_ratio(ellipsoids, weak)) << "  " << fixed(area_ratio(ellipsoids, weak)) << "\n";
  }

  if (!a.output.empty()) {
    FieldOptions fo;
    fo.dimension = a.dim;
    fo.sigma = a.sigma;
    fo.spacing = a.spacing;
    fo.method = interpolation_from_string(a.method);
    std::vector<Ellipsoid> used;
    for (const auto& e : ellipsoids)
      if (a.dim == 3 || e.center.L == a.level) used.push_back(e);
    if (used.empty()) throw UsageError("no ellipsoids at L*=" + fixed(a.level, 1));
    if (a.pad > 0.0) {
      Box b;
      for (const auto& e : used) {
        const Vec p = a.dim == 3 ? e.center.vec() : vec2(e.center.u, e.center.v);
        b.lo = b.lo.size() ? Vec(b.lo.cwiseMin(p)) : p;
        b.hi = b.hi.size() ? Vec(b.hi.cwiseMax(p)) : p;
      }
      for (int i = a.dim == 3 ? 1 : 0; i < a.dim; ++i) {
        b.lo[i] -= a.pad;
        b.hi[i] += a.pad;
      }
      fo.domain = b;
    }
    const MetricField field = MetricField::build(used, fo);
    field.save(a.output);
    out << "\nwrote " << a.output << " (" << a.dim << "D field, " << used.size() << " ellipsoids)\n";
  }
  return kExitOk;
}

// ---------------------------------------------------------------- chart

struct ChartArgs {
  std::string input, output, origin, patch, white = "D65";
  int dim = 2, angles = 36, polar = 13, azimuth = 18;
  double level = 50.0, spacing = 1.0, step = 0.5, max_radius = 400.0;
  std::optional<double> ref_hue;
  bool no_clip = false;
  unsigned threads = 0;
};

int cmd_chart(const ChartArgs& a, std::ostream& out) {
  std::shared_ptr<const Metric> field = load_field(a.input);
  ChartOptions o;
  o.radial_spacing = a.spacing;
  o.step = a.step;
  o.max_radius = a.max_radius;
  o.clip_to_gamut = !a.no_clip;
  o.white = parse_white(a.white);
  o.threads = a.threads;
  Vec hue = hue_475nm();
  if (a.ref_hue) {
    const double t = *a.ref_hue * std::acos(-1.0) / 180.0;
    hue = vec2(std::cos(t), std::sin(t));
  }

  std::optional<NormalChart> chart;
  if (a.dim == 2) {
    if (field->dimension() == 3) field = std::make_shared<const PlaneMetric>(field, a.level);
    o.plane_lightness = a.level;
    const Vec origin = a.origin.empty() ? vec2(0, 0) : parse_point(a.origin, 2, "origin");
    chart = build_chart_2d(field, origin, a.angles, hue, o);
  } else {
    if (field->dimension() != 3) throw UsageError("a 3D chart needs a 3D field archive");
    const Vec origin = a.origin.empty() ? vec3(30, 0, 0) : parse_point(a.origin, 3, "origin");
    chart = build_chart_3d(field, origin, a.polar, a.azimuth, vec3(1, 0, 0), vec3(0, hue[0], hue[1]), o);
  }
  if (!a.patch.empty()) chart->add_patch(parse_point(a.patch, a.dim, "patch origin"));
  chart->save(a.output);
  int sparse = 0;
  for (int c = 0; c < static_cast<int>(chart->cells().size()); ++c) sparse += chart->sparse(c);
  out << "dimension: " << chart->dimension() << "\n"
      << "geodesics: " << chart->geodesic_count() << " (" << chart->direction_count() << " directions)\n"
      << "nodes: " << chart->nodes().size() << "\n"
      << "nodes_in_gamut: " << chart->nodes_in_gamut() << "\n"
      << "cells: " << chart->cells().size() << "\n"
      << "sparse_cells: " << sparse << "\n"
      << "inverted_cells: " << chart->inverted_cells() << "\n"
      << "patches: " << chart->patches().size() << "\n"
      << "wrote " << a.output << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- map

struct MapArgs {
  std::string source, target, output, direction = "compensation";
};

int cmd_map(const MapArgs& a, std::ostream& out) {
  auto src = std::make_shared<const NormalChart>(NormalChart::load(a.source));
  auto dst = std::make_shared<const NormalChart>(NormalChart::load(a.target));
  IsometryMap m = [&] {
    try {
      return compose_isometry(src, dst, map_direction_from_string(a.direction));
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
  }();
  m.save(a.output);
  out << "direction: " << to_string(m.direction()) << "\n"
      << "dimension: " << m.dimension() << "\n"
      << "grid_point_ratio: " << fixed(grid_point_ratio(*dst, *src)) << " (target / source)\n"
      << "wrote " << a.output << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- compensate

struct CompensateArgs {
  std::string input, output, mode = "2D", map3d, report, interpolation = "barycentric", white = "D65";
  std::vector<std::string> maps, lightness_fields;
  double lightness_origin = 30.0;
  int lut = 0;
  unsigned threads = 0;
};

CompensationConfig make_config(const CompensateArgs& a) {
  CompensationConfig cfg;
  try {
    cfg.mode = mode_from_string(a.mode);
    cfg.interpolation = vertex_interpolation_from_string(a.interpolation);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  cfg.white = parse_white(a.white);
  cfg.threads = a.threads;
  for (const auto& spec : a.maps) {
    const auto eq = spec.find('=');
    std::string path = eq == std::string::npos ? spec : spec.substr(eq + 1);
    auto m = std::make_shared<const IsometryMap>(IsometryMap::load(path));
    double level = m->source().options().plane_lightness;
    if (eq != std::string::npos) {
      const auto v = parse_numbers(spec.substr(0, eq), "map level");
      if (v.size() != 1) throw UsageError("map level must be one number: '" + spec + "'");
      level = v[0];
    }
    cfg.levels.push_back({level, std::move(m)});
  }
  if (!a.map3d.empty()) cfg.map3d = std::make_shared<const IsometryMap>(IsometryMap::load(a.map3d));
  if (!a.lightness_fields.empty()) {
    if (a.lightness_fields.size() != 2) throw UsageError("--lightness-fields takes NORMAL WEAK");
    const LightnessMetric gn = restrict_to_lightness_axis(load_field(a.lightness_fields[0]));
    const LightnessMetric gw = restrict_to_lightness_axis(load_field(a.lightness_fields[1]));
    cfg.lightness = build_lightness_map(gn, gw, a.lightness_origin);
  }
  return cfg;
}

int cmd_compensate(const CompensateArgs& a, std::ostream& out) {
  const CompensationConfig cfg = make_config(a);
  const ImageBuffer img = read_png(a.input);
  PipelineResult r;
  if (a.lut > 0) {
    // the report still comes from the direct per-colour pass
    r = run_pipeline(img, cfg);
    r.image = apply_lut(img, bake_lut(cfg, a.lut));
  } else {
    r = run_pipeline(img, cfg);
  }
  write_png(r.image, a.output);
  const std::string text = r.report.to_text();
  out << text;
  if (!a.report.empty()) {
    std::ofstream f(a.report);
    if (!f) throw Error("cannot write " + a.report);
    f << text;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- stats

struct StatsArgs {
  std::string before, after, sd, reference, area = "hull", white = "D65", scale = "1,7";
  double bin = 1.0;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  const bool images = !a.before.empty() || !a.after.empty();
  if (images == !a.sd.empty()) throw UsageError("give either --before/--after or --sd");
  if (images) {
    if (a.before.empty() || a.after.empty()) throw UsageError("--before and --after go together");
    const WhitePoint wp = parse_white(a.white);
    const ImageBuffer b = read_png(a.before), f = read_png(a.after);
    AreaMethod method;
    try {
      method = area_method_from_string(a.area);
    } catch (const Error& e) {
      throw UsageError(e.what());
    }
    const double e = chroma_area_expansion(b, f, method, a.bin, wp);
    const LuvColor mb = mean_luv(b, wp), ma = mean_luv(f, wp);
    out << "area_expansion: " << fixed(e, 6) << " (" << to_string(method) << ")\n";
    out << "         L*        u*        v*\n";
    out << "before " << std::setw(9) << fixed(mb.L) << " " << std::setw(9) << fixed(mb.u) << " " << std::setw(9)
        << fixed(mb.v) << "\n";
    out << "after  " << std::setw(9) << fixed(ma.L) << " " << std::setw(9) << fixed(ma.u) << " " << std::setw(9)
        << fixed(ma.v) << "\n";
    return kExitOk;
  }
  const auto bounds = parse_numbers(a.scale, "score scale");
  if (bounds.size() != 2) throw UsageError("--scale takes LO,HI");
  const auto sheets = load_sd_sheets(a.sd, {bounds[0], bounds[1]});
  if (a.reference.empty()) throw UsageError("--sd needs --reference OBSERVER");
  // reference observer's "original" sheet per image
  std::map<std::string, const SdScoreSheet*> ref;
  for (const auto& s : sheets)
    if (s.observer_id == a.reference && s.condition == Condition::Original) ref[s.image_id] = &s;
  if (ref.empty()) throw UsageError("no original sheets for reference observer '" + a.reference + "'");
  out << "image  observer  condition  r\n";
  for (const auto& s : sheets) {
    if (s.observer_id == a.reference) continue;
    auto it = ref.find(s.image_id);
    if (it == ref.end()) continue;
    out << s.image_id << "  " << s.observer_id << "  " << to_string(s.condition) << "  ";
    try {
      out << fixed(sd_correlation(*it->second, s)) << "\n";
    } catch (const Error&) {
      out << "undefined\n";
    }
  }
  return kExitOk;
}

// ---------------------------------------------------------------- serve

struct ServeArgs {
  std::string host = "127.0.0.1", data_dir, static_dir;
  int port = 8080;
  std::uint64_t seed = 0;
};

int cmd_serve(const ServeArgs& a, std::ostream& out) {
  SessionStore store(a.data_dir, {}, a.seed);
  httplib::Server server;
  mount_session_routes(server, store, a.static_dir);
  out << "serving on http://" << a.host << ":" << a.port << " (data in " << a.data_dir << ")" << std::endl;
  if (!server.listen(a.host, a.port)) throw Error("cannot listen on " + a.host + ":" + std::to_string(a.port));
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Riemannian colour-weak simulation and compensation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "colorweak 0.1.0");

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Write a synthetic measurement CSV (77 centres x 14 directions x 4 repetitions)");
  s->add_option("-o,--output", synth.output, "Output CSV")->required();
  s->add_option("--observer", synth.observers, "name=model[*factor], model normal or weak (repeatable)");
  s->add_option("--noise", synth.noise, "Relative noise on matched lengths");
  s->add_option("--seed", synth.seed, "PRNG seed");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit threshold ellipsoids and write a metric field archive");
  f->add_option("measurements", fit.input, "Measurement CSV")->required()->check(CLI::ExistingFile);
  f->add_option("-o,--output", fit.output, "Field archive (CWMF1)");
  f->add_option("--observer", fit.observer, "Observer to fit");
  f->add_option("--versus", fit.versus, "Second observer for the volume/area ratio table");
  f->add_option("--dim", fit.dim, "Field dimension")->check(CLI::IsMember({2, 3}));
  f->add_option("--level", fit.level, "L* plane for a 2D field");
  f->add_option("--sigma", fit.sigma, "Gaussian smoothing width in lattice cells");
  f->add_option("--spacing", fit.spacing, "Lattice spacing");
  f->add_option("--method", fit.method, "bspline or akima")->check(CLI::IsMember({"bspline", "cubic-b-spline", "akima"}));
  f->add_option("--pad", fit.pad, "Extend the field domain in u*, v* beyond the centres");

  ChartArgs chart;
  auto* c = app.add_subcommand("chart", "Build Riemann normal coordinates on a field");
  c->add_option("field", chart.input, "Field archive")->required()->check(CLI::ExistingFile);
  c->add_option("-o,--output", chart.output, "Chart archive (CWNC1)")->required();
  c->add_option("--dim", chart.dim, "Chart dimension")->check(CLI::IsMember({2, 3}));
  c->add_option("--level", chart.level, "L* plane of a 2D chart");
  c->add_option("--origin", chart.origin, "u,v (2D, default 0,0) or L,u,v (3D, default 30,0,0)");
  c->add_option("--angles", chart.angles, "2D geodesic count")->check(CLI::PositiveNumber);
  c->add_option("--polar", chart.polar, "3D polar resolution")->check(CLI::Range(2, 1000));
  c->add_option("--azimuth", chart.azimuth, "3D azimuth resolution")->check(CLI::Range(3, 1000));
  c->add_option("--spacing", chart.spacing, "Node spacing in arc length")->check(CLI::PositiveNumber);
  c->add_option("--step", chart.step, "RK4 step")->check(CLI::PositiveNumber);
  c->add_option("--max-radius", chart.max_radius, "Geodesic length cap")->check(CLI::PositiveNumber);
  c->add_option("--ref-hue", chart.ref_hue, "Zero direction as a hue angle in degrees (default 475 nm)");
  c->add_flag("--no-clip", chart.no_clip, "Do not stop geodesics at the sRGB gamut");
  c->add_option("--white", chart.white, "D65, D50 or X,Y,Z");
  c->add_option("--patch", chart.patch, "Second origin for a patch");
  c->add_option("--threads", chart.threads, "Worker threads (0 = all)");

  MapArgs map;
  auto* m = app.add_subcommand("map", "Compose two aligned charts into an isometry");
  m->add_option("--source", map.source, "Source chart")->required()->check(CLI::ExistingFile);
  m->add_option("--target", map.target, "Target chart")->required()->check(CLI::ExistingFile);
  m->add_option("--direction", map.direction, "compensation or simulation");
  m->add_option("-o,--output", map.output, "Map archive (CWIM1)")->required();

  CompensateArgs comp;
  auto* p = app.add_subcommand("compensate", "Compensate or simulate an image");
  p->add_option("image", comp.input, "Input PNG")->required()->check(CLI::ExistingFile);
  p->add_option("-o,--output", comp.output, "Output PNG")->required();
  p->add_option("--mode", comp.mode, "2D, 2D+1D, 3D or simulate-2D, simulate-2D+1D, simulate-3D");
  p->add_option("--map", comp.maps, "2D map archive, optionally L=path (repeatable)")
      ->check(CLI::Validator(
          [](std::string& v) {
            const auto eq = v.find('=');
            const std::string path = eq == std::string::npos ? v : v.substr(eq + 1);
            return std::ifstream(path) ? std::string() : "map archive does not exist: " + path;
          },
          "[L=]FILE"));
  p->add_option("--map3d", comp.map3d, "3D map archive")->check(CLI::ExistingFile);
  p->add_option("--lightness-fields", comp.lightness_fields, "NORMAL WEAK 3D field archives for the L* map")
      ->expected(2)
      ->check(CLI::ExistingFile);
  p->add_option("--lightness-origin", comp.lightness_origin, "Fixed point of the L* map");
  p->add_option("--interpolation", comp.interpolation, "barycentric or nearest-vertex");
  p->add_option("--lut", comp.lut, "Apply through a baked N^3 LUT instead of per colour")->check(CLI::NonNegativeNumber);
  p->add_option("--report", comp.report, "Also write the report here");
  p->add_option("--white", comp.white, "D65, D50 or X,Y,Z");
  p->add_option("--threads", comp.threads, "Worker threads (0 = all)");

  StatsArgs stats;
  auto* t = app.add_subcommand("stats", "Image and SD-score statistics");
  t->add_option("--before", stats.before, "Original PNG")->check(CLI::ExistingFile);
  t->add_option("--after", stats.after, "Processed PNG")->check(CLI::ExistingFile);
  t->add_option("--area", stats.area, "hull or bins");
  t->add_option("--bin", stats.bin, "Bin side for --area bins")->check(CLI::PositiveNumber);
  t->add_option("--sd", stats.sd, "SD score CSV")->check(CLI::ExistingFile);
  t->add_option("--reference", stats.reference, "Observer whose original sheets are the reference");
  t->add_option("--scale", stats.scale, "Score scale LO,HI");
  t->add_option("--white", stats.white, "D65, D50 or X,Y,Z");

  ServeArgs serve;
  auto* v = app.add_subcommand("serve", "Run the measurement session service");
  v->add_option("--data-dir", serve.data_dir, "Session and CSV directory")->required();
  v->add_option("--static-dir", serve.static_dir, "UI bundle served at /")->check(CLI::ExistingDirectory);
  v->add_option("--host", serve.host, "Bind address");
  v->add_option("--port", serve.port, "Port")->check(CLI::Range(1, 65535));
  v->add_option("--seed", serve.seed, "Base seed for sessions created without one");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*s) return cmd_synth(synth, out);
    if (*f) return cmd_fit(fit, out);
    if (*c) return cmd_chart(chart, out);
    if (*m) return cmd_map(map, out);
    if (*p) return cmd_compensate(comp, out);
    if (*t) return cmd_stats(stats, out);
    if (*v) return cmd_serve(serve, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace colorweak
