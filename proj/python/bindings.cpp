#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "hotspot/experiment.hpp"

namespace py = pybind11;
using namespace hotspot;

namespace {

std::vector<Event> to_events(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.size() == 0) return {};
  if (a.ndim() != 2 || a.shape(1) != 3) {
    throw std::invalid_argument("events must be an (n, 3) array of x, y, t");
  }
  const auto r = a.unchecked<2>();
  std::vector<Event> events(static_cast<std::size_t>(r.shape(0)));
  for (py::ssize_t i = 0; i < r.shape(0); ++i) events[i] = {r(i, 0), r(i, 1), r(i, 2)};
  return events;
}

py::array_t<double> to_array(const std::vector<Event>& events) {
  py::array_t<double> a({static_cast<py::ssize_t>(events.size()), py::ssize_t{3}});
  auto w = a.mutable_unchecked<2>();
  for (std::size_t i = 0; i < events.size(); ++i) {
    w(i, 0) = events[i].x;
    w(i, 1) = events[i].y;
    w(i, 2) = events[i].t;
  }
  return a;
}

}  // namespace

PYBIND11_MODULE(_hotspot, m) {
  m.doc() = "Self-exciting point process hotspot simulation";

  py::register_exception<ContractViolation>(m, "ContractViolation", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<SeppParams>(m, "SeppParams")
      .def(py::init([](double mu_bar, double theta, double omega, double sigma_x, double sigma_y) {
             return SeppParams{mu_bar, theta, omega, sigma_x, sigma_y};
           }),
           py::arg("mu_bar"), py::arg("theta"), py::arg("omega"), py::arg("sigma_x"),
           py::arg("sigma_y"))
      .def_readwrite("mu_bar", &SeppParams::mu_bar)
      .def_readwrite("theta", &SeppParams::theta)
      .def_readwrite("omega", &SeppParams::omega)
      .def_readwrite("sigma_x", &SeppParams::sigma_x)
      .def_readwrite("sigma_y", &SeppParams::sigma_y)
      .def("validate", &SeppParams::validate)
      .def("subcritical", &SeppParams::subcritical)
      .def("__eq__", [](const SeppParams& a, const SeppParams& b) { return a == b; })
      .def("__repr__", [](const SeppParams& p) {
        return "SeppParams(mu_bar=" + std::to_string(p.mu_bar) + ", theta=" +
               std::to_string(p.theta) + ", omega=" + std::to_string(p.omega) + ", sigma_x=" +
               std::to_string(p.sigma_x) + ", sigma_y=" + std::to_string(p.sigma_y) + ")";
      });

  py::class_<SpatialDomain>(m, "SpatialDomain")
      .def(py::init<double, double, double, double, double, double>(), py::arg("x_min"),
           py::arg("x_max"), py::arg("y_min"), py::arg("y_max"), py::arg("cell_size"),
           py::arg("horizon"))
      .def_static("centered", &SpatialDomain::centered, py::arg("width"), py::arg("height"),
                  py::arg("cell_size"), py::arg("horizon"))
      .def_property_readonly("nx", &SpatialDomain::nx)
      .def_property_readonly("ny", &SpatialDomain::ny)
      .def_property_readonly("cell_count", &SpatialDomain::cell_count)
      .def_property_readonly("horizon", &SpatialDomain::horizon)
      .def("cell_bounds", [](const SpatialDomain& d, std::size_t index) {
        const GridCell c = d.cell(index);
        return py::make_tuple(c.x_lo, c.x_hi, c.y_lo, c.y_hi);
      })
      .def("cell_of", &SpatialDomain::cell_of);

  m.def("offspring_mean", &offspring_mean);
  m.def("theta_for_offspring_mean", &theta_for_offspring_mean, py::arg("m"), py::arg("sigma_x"),
        py::arg("sigma_y"));
  m.def("background_intensity", &background_intensity, py::arg("params"), py::arg("x"), py::arg("y"),
        py::arg("deviation") = kBackgroundDeviationKm);
  m.def("triggering", &triggering, py::arg("params"), py::arg("dt"), py::arg("dx"), py::arg("dy"));
  m.def(
      "conditional_intensity",
      [](const SeppParams& p, const py::array_t<double>& history, double x, double y, double t) {
        return conditional_intensity(IntensityModel::fitted(p), to_events(history), x, y, t);
      },
      py::arg("params"), py::arg("history"), py::arg("x"), py::arg("y"), py::arg("t"));
  m.def(
      "cell_integral",
      [](const SeppParams& p, const py::array_t<double>& history, const SpatialDomain& d,
         std::size_t cell, double t) {
        return cell_integral(IntensityModel::fitted(p), to_events(history), d.cell(cell), t);
      },
      py::arg("params"), py::arg("history"), py::arg("domain"), py::arg("cell"), py::arg("t"));

  m.def(
      "sample_events",
      [](const SeppParams& p, const SpatialDomain& d, double horizon, std::uint64_t seed) {
        Rng rng = make_rng(seed);
        return to_array(sample_candidates(IntensityModel::fitted(p), d, horizon, rng).events);
      },
      py::arg("params"), py::arg("domain"), py::arg("horizon"), py::arg("seed"),
      "Simulate the fitted-form model; returns an (n, 3) array sorted by time.");

  py::class_<FitReport>(m, "FitReport")
      .def_readonly("params", &FitReport::params)
      .def_readonly("iterations", &FitReport::iterations)
      .def_readonly("converged", &FitReport::converged)
      .def_readonly("loglik", &FitReport::loglik)
      .def_readonly("expected_loglik", &FitReport::expected_loglik);

  m.def(
      "default_initial_params",
      [](std::size_t n, const SpatialDomain& d, double start, double end) {
        return default_initial_params(n, d, FitWindow{start, end});
      },
      py::arg("n"), py::arg("domain"), py::arg("start"), py::arg("end"));
  m.def(
      "fit",
      [](const py::array_t<double>& events, const SpatialDomain& d, double start, double end,
         const SeppParams& init, double tol, int max_iter, bool accelerate) {
        const std::vector<Event> ev = to_events(events);
        EmOptions opt;
        opt.tol = tol;
        opt.max_iter = max_iter;
        opt.accelerate = accelerate;
        py::gil_scoped_release release;
        return fit(ev, d, FitWindow{start, end}, init, opt);
      },
      py::arg("events"), py::arg("domain"), py::arg("start"), py::arg("end"), py::arg("init"),
      py::arg("tol") = 1e-4, py::arg("max_iter") = 200, py::arg("accelerate") = false);

  m.def(
      "daily_cell_counts",
      [](const py::array_t<double>& events, const SpatialDomain& d, double first_day, int days) {
        return daily_cell_counts(to_events(events), d, first_day, days);
      },
      py::arg("events"), py::arg("domain"), py::arg("first_day"), py::arg("days"));
  m.def("default_beta_grid", &default_beta_grid);
  m.def("mavg_forecast_mse", &mavg_forecast_mse, py::arg("daily_counts"), py::arg("beta"));
  m.def(
      "mavg_fit_bandwidth",
      [](const std::vector<std::vector<double>>& counts, const std::vector<double>& grid) {
        return mavg_fit_bandwidth(counts, grid);
      },
      py::arg("daily_counts"), py::arg("candidates"));
  m.def(
      "spearman",
      [](const std::vector<double>& x, const std::vector<double>& y) { return spearman(x, y); },
      py::arg("x"), py::arg("y"));

  py::class_<ExperimentConfig>(m, "ExperimentConfig")
      .def_static("defaults", &ExperimentConfig::defaults)
      .def_static("load", &ExperimentConfig::load, py::arg("name_or_path"))
      .def_static("from_json", [](const std::string& text) {
        return ExperimentConfig::from_json_text(text);
      })
      .def("to_json", &ExperimentConfig::to_json_text)
      .def("validate", &ExperimentConfig::validate)
      .def_readwrite("runs", &ExperimentConfig::runs)
      .def_readwrite("hotspots", &ExperimentConfig::hotspots)
      .def_readwrite("jobs", &ExperimentConfig::jobs)
      .def_property(
          "seed", [](const ExperimentConfig& c) { return c.sim.seed; },
          [](ExperimentConfig& c, std::uint64_t s) { c.sim.seed = s; })
      .def_property(
          "models",
          [](const ExperimentConfig& c) {
            std::vector<std::string> out;
            for (const auto& v : c.models) out.push_back(v.label());
            return out;
          },
          [](ExperimentConfig& c, const std::string& list) { c.models = parse_variants(list); })
      .def_property_readonly("eval_start", &ExperimentConfig::eval_start)
      .def_property_readonly("eval_days", &ExperimentConfig::eval_days);

  m.def(
      "run_experiment",
      [](const ExperimentConfig& config, const std::filesystem::path& out_dir, bool sanity) {
        RunOptions ro;
        ro.sanity = sanity;
        ExperimentResult result;
        {
          py::gil_scoped_release release;
          result = run_experiment(config, ro);
        }
        OutputOptions oo;
        oo.sanity = sanity;
        oo.datasets = config.dump_datasets;
        oo.predictions = config.dump_predictions;
        oo.fits = config.dump_fits;
        write_outputs(result, out_dir, oo);
        return result.failed();
      },
      py::arg("config"), py::arg("out_dir"), py::arg("sanity") = false,
      "Run the study and write its CSV tables into out_dir; returns the number of failed runs.");
}
