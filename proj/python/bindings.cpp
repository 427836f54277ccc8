#include "colorweak/analysis.hpp"
#include "colorweak/cli.hpp"
#include "colorweak/isometry.hpp"
#include "colorweak/pipeline.hpp"
#include "colorweak/rnc.hpp"
#include "colorweak/thresholds.hpp"

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <sstream>

namespace py = pybind11;
using namespace colorweak;

namespace {

Vec to_vec(const std::vector<double>& x) {
  if (x.size() != 2 && x.size() != 3) throw py::value_error("points have 2 or 3 coordinates");
  Vec v(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) v[static_cast<Eigen::Index>(i)] = x[i];
  return v;
}

std::vector<double> from_vec(const Vec& v) { return {v.data(), v.data() + v.size()}; }

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;
using F64Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

ImageBuffer to_image(const U8Array& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw py::value_error("image must be an (H, W, 3) uint8 array");
  ImageBuffer img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  const std::uint8_t* p = a.data();
  for (auto& px : img.pixels) {
    px = {p[0], p[1], p[2]};
    p += 3;
  }
  return img;
}

U8Array from_image(const ImageBuffer& img) {
  U8Array a({static_cast<py::ssize_t>(img.height), static_cast<py::ssize_t>(img.width), py::ssize_t{3}});
  std::uint8_t* p = a.mutable_data();
  for (const auto& px : img.pixels) {
    p[0] = px.r;
    p[1] = px.g;
    p[2] = px.b;
    p += 3;
  }
  return a;
}

py::dict report_dict(const PipelineReport& r) {
  py::dict d;
  d["mode"] = r.mode;
  d["interpolation"] = r.interpolation;
  d["pixels"] = r.pixels;
  d["mapped"] = r.mapped;
  d["clamped"] = r.clamped;
  d["fallback"] = r.fallback;
  d["gamut_clipped"] = r.gamut_clipped;
  d["unique_colors"] = r.unique_colors;
  d["config_digest"] = r.config_digest;
  return d;
}

WhitePoint white_from(const std::string& name) {
  if (name == "D65") return WhitePoint::D65();
  if (name == "D50") return WhitePoint::D50();
  throw py::value_error("white must be 'D65' or 'D50'");
}

std::shared_ptr<NormalChart> build_chart(std::shared_ptr<MetricField> field, int dim,
                                         std::optional<std::vector<double>> origin, double level, int angles,
                                         int polar, int azimuth, double spacing, double step, double max_radius,
                                         bool clip, std::optional<double> ref_hue, unsigned threads) {
  ChartOptions o;
  o.radial_spacing = spacing;
  o.step = step;
  o.max_radius = max_radius;
  o.clip_to_gamut = clip;
  o.threads = threads;
  Vec hue = hue_475nm();
  if (ref_hue) {
    const double t = *ref_hue * std::acos(-1.0) / 180.0;
    hue = vec2(std::cos(t), std::sin(t));
  }
  std::shared_ptr<const Metric> metric = std::move(field);
  if (dim == 2) {
    if (metric->dimension() == 3) metric = std::make_shared<const PlaneMetric>(metric, level);
    o.plane_lightness = level;
    return std::make_shared<NormalChart>(build_chart_2d(metric, origin ? to_vec(*origin) : vec2(0, 0), angles, hue, o));
  }
  if (dim != 3 || metric->dimension() != 3) throw py::value_error("a 3D chart needs a 3D field");
  return std::make_shared<NormalChart>(build_chart_3d(metric, origin ? to_vec(*origin) : vec3(30, 0, 0), polar,
                                                      azimuth, vec3(1, 0, 0), vec3(0, hue[0], hue[1]), o));
}

using FieldPair = std::optional<std::pair<std::shared_ptr<MetricField>, std::shared_ptr<MetricField>>>;

CompensationConfig make_config(const std::string& mode, const std::vector<py::object>& maps,
                               std::shared_ptr<IsometryMap> map3d, const FieldPair& lightness_fields,
                               double lightness_origin, const std::string& interpolation, unsigned threads) {
  CompensationConfig cfg;
  cfg.mode = mode_from_string(mode);
  cfg.interpolation = vertex_interpolation_from_string(interpolation);
  cfg.threads = threads;
  for (const py::object& m : maps) {
    // IsometryMap or (L*, IsometryMap)
    if (py::isinstance<py::tuple>(m)) {
      const auto t = m.cast<std::pair<double, std::shared_ptr<IsometryMap>>>();
      cfg.levels.push_back({t.first, t.second});
    } else {
      auto p = m.cast<std::shared_ptr<IsometryMap>>();
      cfg.levels.push_back({p->source().options().plane_lightness, p});
    }
  }
  cfg.map3d = std::move(map3d);
  if (lightness_fields)
    cfg.lightness = build_lightness_map(restrict_to_lightness_axis(lightness_fields->first),
                                        restrict_to_lightness_axis(lightness_fields->second), lightness_origin);
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Colour-weak compensation and simulation";

  // later registrations are tried first, so the base class goes first
  auto& error = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ParseError>(m, "ParseError", error.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", error.ptr());
  py::register_exception<UncoveredPoint>(m, "UncoveredPoint", error.ptr());

  m.def(
      "srgb_to_luv",
      [](const U8Array& rgb, const std::string& white) {
        if (rgb.ndim() < 1 || rgb.shape(rgb.ndim() - 1) != 3) throw py::value_error("last axis must have length 3");
        const WhitePoint wp = white_from(white);
        std::vector<py::ssize_t> shape(rgb.shape(), rgb.shape() + rgb.ndim());
        F64Array out(shape);
        const std::uint8_t* p = rgb.data();
        double* q = out.mutable_data();
        for (py::ssize_t i = 0; i < rgb.size() / 3; ++i, p += 3, q += 3) {
          const LuvColor c = srgb_to_luv({p[0], p[1], p[2]}, wp);
          q[0] = c.L;
          q[1] = c.u;
          q[2] = c.v;
        }
        return out;
      },
      py::arg("rgb"), py::arg("white") = "D65", "8-bit sRGB (..., 3) to CIELUV (..., 3).");
  m.def(
      "luv_to_srgb",
      [](const F64Array& luv, const std::string& white) {
        if (luv.ndim() < 1 || luv.shape(luv.ndim() - 1) != 3) throw py::value_error("last axis must have length 3");
        const WhitePoint wp = white_from(white);
        std::vector<py::ssize_t> shape(luv.shape(), luv.shape() + luv.ndim());
        U8Array out(shape);
        std::vector<py::ssize_t> flag_shape(shape.begin(), shape.end() - 1);
        py::array_t<bool> clipped(flag_shape);
        const double* p = luv.data();
        std::uint8_t* q = out.mutable_data();
        bool* f = clipped.mutable_data();
        for (py::ssize_t i = 0; i < luv.size() / 3; ++i, p += 3, q += 3) {
          const RgbResult r = luv_to_srgb({p[0], p[1], p[2]}, wp);
          q[0] = r.rgb.r;
          q[1] = r.rgb.g;
          q[2] = r.rgb.b;
          f[i] = r.clipped;
        }
        return py::make_tuple(out, clipped);
      },
      py::arg("luv"), py::arg("white") = "D65", "CIELUV (..., 3) to 8-bit sRGB plus a per-colour clip flag.");

  py::class_<Metric, std::shared_ptr<Metric>>(m, "Metric")
      .def_property_readonly("dimension", &Metric::dimension)
      .def(
          "at", [](const Metric& g, const std::vector<double>& x) {
            const Mat G = g.at(to_vec(x));
            py::array_t<double> out({G.rows(), G.cols()});
            for (Eigen::Index i = 0; i < G.rows(); ++i)
              for (Eigen::Index j = 0; j < G.cols(); ++j) out.mutable_at(i, j) = G(i, j);
            return out;
          },
          py::arg("x"), "Metric tensor at x.");

  py::class_<MetricField, Metric, std::shared_ptr<MetricField>>(m, "MetricField")
      .def_static(
          "fit",
          [](const std::string& measurements, const std::string& observer, int dim, double level, double spacing,
             double sigma, const std::string& method) {
            const MeasurementSet set = load_measurements(measurements);
            std::vector<Ellipsoid> used;
            for (const auto& e : fit_observer(set, observer))
              if (dim == 3 || e.center.L == level) used.push_back(e);
            if (used.empty()) throw py::value_error("no ellipsoids for this observer and level");
            FieldOptions fo;
            fo.dimension = dim;
            fo.spacing = spacing;
            fo.sigma = sigma;
            fo.method = interpolation_from_string(method);
            return std::make_shared<MetricField>(MetricField::build(used, fo));
          },
          py::arg("measurements"), py::arg("observer"), py::arg("dim") = 3, py::arg("level") = 50.0,
          py::arg("spacing") = 5.0, py::arg("sigma") = 1.5, py::arg("method") = "bspline",
          "Fit threshold ellipsoids from a measurement CSV and smooth them into a field.")
      .def_static(
          "from_lattice",
          [](const std::vector<double>& lo, const std::vector<double>& hi, std::array<int, 3> counts,
             const F64Array& samples, double sigma, const std::string& method) {
            const Eigen::Index d = static_cast<Eigen::Index>(lo.size());
            if (samples.ndim() != 3 || samples.shape(1) != d || samples.shape(2) != d)
              throw py::value_error("samples must be an (N, d, d) array");
            std::vector<Mat> mats;
            const double* p = samples.data();
            for (py::ssize_t n = 0; n < samples.shape(0); ++n) {
              Mat G(d, d);
              for (Eigen::Index i = 0; i < d; ++i)
                for (Eigen::Index j = 0; j < d; ++j) G(i, j) = *p++;
              mats.push_back(G);
            }
            return std::make_shared<MetricField>(MetricField::from_lattice(
                {to_vec(lo), to_vec(hi)}, counts, std::move(mats), sigma, interpolation_from_string(method)));
          },
          py::arg("lo"), py::arg("hi"), py::arg("counts"), py::arg("samples"), py::arg("sigma") = 0.0,
          py::arg("method") = "bspline", "Field from lattice samples, axis 0 varying fastest.")
      .def_static("load", [](const std::string& path) { return std::make_shared<MetricField>(MetricField::load(path)); })
      .def("save", py::overload_cast<const std::string&>(&MetricField::save, py::const_))
      .def_property_readonly("counts", &MetricField::counts);

  py::class_<NormalChart, std::shared_ptr<NormalChart>>(m, "NormalChart")
      .def_static("build", &build_chart, py::arg("field"), py::arg("dim") = 2, py::arg("origin") = py::none(),
                  py::arg("level") = 50.0, py::arg("angles") = 36, py::arg("polar") = 13, py::arg("azimuth") = 18,
                  py::arg("spacing") = 1.0, py::arg("step") = 0.5, py::arg("max_radius") = 400.0,
                  py::arg("clip") = true, py::arg("ref_hue") = py::none(), py::arg("threads") = 0,
                  py::call_guard<py::gil_scoped_release>())
      .def_static("load", [](const std::string& path) { return std::make_shared<NormalChart>(NormalChart::load(path)); })
      .def("save", py::overload_cast<const std::string&>(&NormalChart::save, py::const_))
      .def_property_readonly("dimension", &NormalChart::dimension)
      .def_property_readonly("origin", [](const NormalChart& c) { return from_vec(c.origin()); })
      .def_property_readonly("node_count", [](const NormalChart& c) { return c.nodes().size(); })
      .def_property_readonly("nodes_in_gamut", &NormalChart::nodes_in_gamut)
      .def_property_readonly("geodesic_count", &NormalChart::geodesic_count)
      .def("covers", [](const NormalChart& c, const std::vector<double>& x) { return c.covers(to_vec(x)); })
      .def(
          "to_normal_coords",
          [](const NormalChart& c, const std::vector<double>& x) {
            const NormalCoords nc = c.to_normal_coords(to_vec(x));
            return py::make_tuple(nc.r, c.dimension() == 2 ? py::tuple(py::make_tuple(nc.angles[0]))
                                                           : py::make_tuple(nc.angles[0], nc.angles[1]));
          },
          "(r, angles) of x.")
      .def("to_uniform", [](const NormalChart& c, const std::vector<double>& x) { return from_vec(c.to_uniform(to_vec(x))); })
      .def("from_uniform",
           [](const NormalChart& c, const std::vector<double>& y) { return from_vec(c.from_uniform(to_vec(y))); });

  m.def("grid_point_ratio", &grid_point_ratio, py::arg("weak"), py::arg("normal"));

  py::class_<IsometryMap, std::shared_ptr<IsometryMap>>(m, "IsometryMap")
      .def_static(
          "compose",
          [](std::shared_ptr<NormalChart> src, std::shared_ptr<NormalChart> dst, const std::string& dir) {
            return std::make_shared<IsometryMap>(compose_isometry(src, dst, map_direction_from_string(dir)));
          },
          py::arg("source"), py::arg("target"), py::arg("direction") = "compensation")
      .def_static("load", [](const std::string& path) { return std::make_shared<IsometryMap>(IsometryMap::load(path)); })
      .def("save", py::overload_cast<const std::string&>(&IsometryMap::save, py::const_))
      .def_property_readonly("direction", [](const IsometryMap& mp) { return to_string(mp.direction()); })
      .def_property_readonly("dimension", &IsometryMap::dimension)
      .def("inverse", [](const IsometryMap& mp) { return std::make_shared<IsometryMap>(mp.inverse()); })
      .def("apply", [](const IsometryMap& mp, const std::vector<double>& x) { return from_vec(mp.apply(to_vec(x))); })
      .def(
          "map",
          [](const IsometryMap& mp, const std::vector<double>& x, bool fallback) {
            const MapResult r = mp.map(to_vec(x), fallback);
            return py::make_tuple(from_vec(r.point), r.clamped, r.fallback);
          },
          py::arg("x"), py::arg("fallback") = true, "(point, clamped, fallback).");

  m.def(
      "compensate",
      [](const U8Array& image, const std::string& mode, const std::vector<py::object>& maps,
         std::shared_ptr<IsometryMap> map3d, const FieldPair& lightness_fields,
         double lightness_origin, const std::string& interpolation, unsigned threads) {
        const CompensationConfig cfg =
            make_config(mode, maps, std::move(map3d), lightness_fields, lightness_origin, interpolation, threads);
        const ImageBuffer img = to_image(image);
        PipelineResult r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(img, cfg);
        }
        return py::make_tuple(from_image(r.image), report_dict(r.report));
      },
      py::arg("image"), py::arg("mode") = "2D", py::arg("maps") = std::vector<py::object>{},
      py::arg("map3d") = nullptr, py::arg("lightness_fields") = py::none(), py::arg("lightness_origin") = 30.0,
      py::arg("interpolation") = "barycentric", py::arg("threads") = 0,
      "Run the pipeline on an (H, W, 3) uint8 image. `maps` holds 2D maps or (L*, map) pairs. "
      "Returns (image, report).");

  m.def("read_png", [](const std::string& path) { return from_image(read_png(path)); });
  m.def("write_png", [](const U8Array& image, const std::string& path) { write_png(to_image(image), path); });

  m.def("pearson", [](const std::vector<double>& a, const std::vector<double>& b) { return pearson(a, b); });
  m.def(
      "chroma_area_expansion",
      [](const U8Array& before, const U8Array& after, const std::string& method, double bin) {
        return chroma_area_expansion(to_image(before), to_image(after), area_method_from_string(method), bin);
      },
      py::arg("before"), py::arg("after"), py::arg("method") = "hull", py::arg("bin") = 1.0);
  m.def("mean_luv", [](const U8Array& image) {
    const LuvColor c = mean_luv(to_image(image));
    return py::make_tuple(c.L, c.u, c.v);
  });

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv{"colorweak"};
        for (const auto& a : args) argv.push_back(a.c_str());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Run the command-line tool in-process; returns (exit_code, stdout, stderr).");
}
