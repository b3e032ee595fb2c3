#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "g2sim/errors.hpp"
#include "g2sim/fitter.hpp"
#include "g2sim/io.hpp"
#include "g2sim/kinetics.hpp"
#include "g2sim/optics.hpp"
#include "g2sim/pipeline.hpp"
#include "g2sim/presets.hpp"
#include "g2sim/scenario.hpp"

namespace py = pybind11;
using namespace g2sim;

namespace {

template <typename T>
py::array_t<T> to_array(const std::vector<T>& v) {
  py::array_t<T> out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

template <typename T>
std::vector<T> to_vector(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 1) throw py::value_error("expected a 1-d array");
  return {a.data(), a.data() + a.size()};
}

TimeTagStream make_stream(const py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>& tags,
                          std::int64_t duration_ps, Channel ch) {
  return {to_vector<std::int64_t>(tags), ch, duration_ps};
}

py::dict histogram_dict(const CorrelationHistogram& h) {
  std::vector<double> lag(h.n_bins()), width(h.n_bins());
  for (std::size_t i = 0; i < h.n_bins(); ++i) {
    lag[i] = h.lag_ns(i);
    const auto k = static_cast<std::int64_t>(i) - static_cast<std::int64_t>(h.n_bins() / 2);
    width[i] = static_cast<double>(bin_span(k, h.bin_width)) * 1e-3;
  }
  py::dict d;
  d["lag_ns"] = to_array(lag);
  d["width_ns"] = to_array(width);
  d["counts"] = to_array(h.counts);
  d["g2"] = to_array(h.g2);
  d["sigma"] = to_array(h.sigma);
  d["bin_width_ps"] = h.bin_width;
  d["rate_a_hz"] = h.rate_a;
  d["rate_b_hz"] = h.rate_b;
  d["n_a"] = h.n_a;
  d["n_b"] = h.n_b;
  d["duration_ps"] = h.duration;
  return d;
}

}  // namespace

PYBIND11_MODULE(_g2sim, m) {
  m.doc() = "Three-level antibunching simulation, correlation and fitting";
  m.attr("__version__") = kToolVersion;

  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);

  py::class_<RateSet>(m, "RateSet")
      .def(py::init<>())
      .def(py::init([](double k12, double k21, double k23, double k31) { return RateSet{k12, k21, k23, k31}; }),
           py::arg("k12"), py::arg("k21"), py::arg("k23"), py::arg("k31"))
      .def_static("from_lifetimes", &RateSet::from_lifetimes, py::arg("tau21"), py::arg("tau12"), py::arg("tau23"),
                  py::arg("tau31"))
      .def_readwrite("k12", &RateSet::k12)
      .def_readwrite("k21", &RateSet::k21)
      .def_readwrite("k23", &RateSet::k23)
      .def_readwrite("k31", &RateSet::k31)
      .def("__repr__", [](const RateSet& r) {
        return "RateSet(k12=" + std::to_string(r.k12) + ", k21=" + std::to_string(r.k21) +
               ", k23=" + std::to_string(r.k23) + ", k31=" + std::to_string(r.k31) + ")";
      });

  py::class_<DerivedParams>(m, "DerivedParams")
      .def(py::init([](double g1, double g2, double beta) { return DerivedParams{g1, g2, beta}; }),
           py::arg("gamma1"), py::arg("gamma2"), py::arg("beta"))
      .def_readwrite("gamma1", &DerivedParams::gamma1)
      .def_readwrite("gamma2", &DerivedParams::gamma2)
      .def_property(
          "beta", [](const DerivedParams& d) { return d.beta; },
          [](DerivedParams& d, double beta) {
            d.beta = beta;
            d.beta_excess = std::numeric_limits<double>::quiet_NaN();
          })
      .def("__repr__", [](const DerivedParams& d) {
        return "DerivedParams(gamma1=" + std::to_string(d.gamma1) + ", gamma2=" + std::to_string(d.gamma2) +
               ", beta=" + std::to_string(d.beta) + ")";
      });

  m.def("preset_rates", [](const std::string& key) {
    const auto p = find_preset(key);
    if (!p) throw Error(ErrorKind::UnknownScenario, "unknown preset '" + key + "'");
    return p->rates();
  });
  m.def("derived_params", &derived_params, py::arg("rates"));
  m.def("exact_params", &exact_params, py::arg("rates"));
  m.def("invert_rates", &invert_rates, py::arg("params"), py::arg("k12"));
  m.def("invert_rates_exact", &invert_rates_exact, py::arg("params"), py::arg("k12"));
  m.def("quantum_yield", &quantum_yield, py::arg("rates"));
  m.def("photon_rate", &photon_rate, py::arg("rates"));
  m.def(
      "g2_model",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> tau, const DerivedParams& dp, int n_emitters,
         double rho) {
        const EnsembleConfig cfg{n_emitters, rho};
        cfg.validate();
        py::array_t<double> out(tau.size());
        for (py::ssize_t i = 0; i < tau.size(); ++i) out.mutable_data()[i] = g2_model(tau.data()[i], dp, cfg);
        return out;
      },
      py::arg("tau"), py::arg("params"), py::arg("n_emitters") = 1, py::arg("rho") = 1.0);
  m.def(
      "conditional_intensity",
      [](const RateSet& r, py::array_t<double, py::array::c_style | py::array::forcecast> tau) {
        const auto grid = to_vector<double>(tau);
        return to_array(conditional_intensity(r, grid));
      },
      py::arg("rates"), py::arg("tau"));

  m.def("coupling_ratio", &coupling_ratio, py::arg("n_spp"));
  m.def("collection_fraction", &collection_fraction, py::arg("fiber_effective_diameter"), py::arg("ring_radius_bfp"));

  m.def(
      "cross_correlate",
      [](py::array_t<std::int64_t, py::array::c_style | py::array::forcecast> a,
         py::array_t<std::int64_t, py::array::c_style | py::array::forcecast> b, std::int64_t duration_ps,
         std::int64_t lag_max_ps, std::int64_t bin_width_ps, const std::string& estimator) {
        const Estimator est = estimator == "start_stop" ? Estimator::StartStop : Estimator::AllPairs;
        if (estimator != "start_stop" && estimator != "all_pairs") throw py::value_error("unknown estimator");
        return histogram_dict(cross_correlate(make_stream(a, duration_ps, Channel::A),
                                              make_stream(b, duration_ps, Channel::B), lag_max_ps, bin_width_ps, est));
      },
      py::arg("a"), py::arg("b"), py::arg("duration_ps"), py::arg("lag_max_ps") = 150000,
      py::arg("bin_width_ps") = 1000, py::arg("estimator") = "all_pairs");

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init([](double g1, double g2, double beta, double c) { return ModelParams{g1, g2, beta, c}; }),
           py::arg("gamma1"), py::arg("gamma2"), py::arg("beta"), py::arg("c"))
      .def_readwrite("gamma1", &ModelParams::gamma1)
      .def_readwrite("gamma2", &ModelParams::gamma2)
      .def_readwrite("beta", &ModelParams::beta)
      .def_readwrite("c", &ModelParams::c)
      .def("shape", &ModelParams::shape);

  py::class_<FitResult>(m, "FitResult")
      .def_readonly("params", &FitResult::params)
      .def_readonly("chi2", &FitResult::chi2)
      .def_readonly("chi2_reduced", &FitResult::chi2_reduced)
      .def_readonly("n_points", &FitResult::n_points)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("non_identifiable", &FitResult::non_identifiable)
      .def_readonly("diagnostics", &FitResult::diagnostics)
      .def_property_readonly("status", [](const FitResult& f) { return std::string(to_string(f.status)); })
      .def_property_readonly("sigma", [](const FitResult& f) {
        return std::vector<double>{f.sigma(0), f.sigma(1), f.sigma(2), f.sigma(3)};
      });

  m.def(
      "fit_g2",
      [](py::array_t<double, py::array::c_style | py::array::forcecast> tau,
         py::array_t<double, py::array::c_style | py::array::forcecast> g2,
         py::array_t<double, py::array::c_style | py::array::forcecast> sigma, std::optional<py::array_t<double>> width) {
        FitData d{to_vector<double>(tau), to_vector<double>(g2), to_vector<double>(sigma), {}};
        if (width) d.width = to_vector<double>(*width);
        return fit_g2(d);
      },
      py::arg("tau"), py::arg("g2"), py::arg("sigma"), py::arg("width") = py::none());

  py::class_<Quantity>(m, "Quantity")
      .def_readonly("value", &Quantity::value)
      .def_readonly("sigma", &Quantity::sigma)
      .def("__repr__", [](const Quantity& q) { return std::to_string(q.value) + " +- " + std::to_string(q.sigma); });

  py::class_<PhotophysicsReport>(m, "PhotophysicsReport")
      .def_readonly("tau12", &PhotophysicsReport::tau12)
      .def_readonly("tau21", &PhotophysicsReport::tau21)
      .def_readonly("tau23", &PhotophysicsReport::tau23)
      .def_readonly("tau31", &PhotophysicsReport::tau31)
      .def_readonly("quantum_yield", &PhotophysicsReport::quantum_yield)
      .def_readonly("rates", &PhotophysicsReport::rates)
      .def_readonly("no_shelving", &PhotophysicsReport::no_shelving)
      .def_readonly("emitters_estimate", &PhotophysicsReport::emitters_estimate);

  m.def(
      "report_photophysics",
      [](const FitResult& fit, double k12, int n_emitters, double rho, const std::string& inversion) {
        return report_photophysics(fit, k12, n_emitters, rho, parse_inversion_model(inversion));
      },
      py::arg("fit"), py::arg("k12"), py::arg("n_emitters"), py::arg("rho") = 1.0, py::arg("inversion") = "exact");

  py::class_<Scenario>(m, "Scenario")
      .def_readwrite("name", &Scenario::name)
      .def_readwrite("rates", &Scenario::rates)
      .def_readwrite("n_emitters", &Scenario::n_emitters)
      .def_readwrite("duration_ns", &Scenario::duration_ns)
      .def_readwrite("seed", &Scenario::seed)
      .def_readwrite("bin_width_ps", &Scenario::bin_width_ps)
      .def_readwrite("window_ps", &Scenario::window_ps)
      .def_readwrite("k12_fit", &Scenario::k12_fit)
      .def_readwrite("rho", &Scenario::rho)
      .def("use_ideal_detection",
           [](Scenario& s) {
             s.detection = DetectionMode::Ideal;
             s.budget = ideal_budget();
           })
      .def("validate", &Scenario::validate)
      .def("to_json", [](const Scenario& s) { return s.to_json().dump(); });

  m.def(
      "make_scenario",
      [](const std::string& preset, const std::string& kind, int n, const std::string& fibers, double duration_ns,
         std::uint64_t seed) {
        return make_scenario(preset, parse_scenario_kind(kind), n, parse_fiber_config(fibers), duration_ns, seed);
      },
      py::arg("preset") = "silver", py::arg("kind") = "silver_filtered", py::arg("n_emitters") = 10,
      py::arg("fibers") = "AB", py::arg("duration_ns") = 1e8, py::arg("seed") = 1);
  m.def("load_scenario", [](const std::string& path) { return load_scenario(path); }, py::arg("path"));

  m.def(
      "simulate",
      [](const Scenario& s) {
        const DetectionRecord rec = simulate_detection(s);
        return py::make_tuple(to_array(rec.tags.a.tags), to_array(rec.tags.b.tags));
      },
      py::arg("scenario"));

  m.def(
      "run_pipeline",
      [](const Scenario& s, std::optional<std::filesystem::path> out_dir) {
        const PipelineResult r = run_pipeline(s, out_dir);
        py::dict d;
        d["histogram"] = histogram_dict(r.histogram);
        d["fit"] = r.fit;
        d["report"] = r.report ? py::cast(*r.report) : py::none();
        d["report_error"] = r.report_error;
        d["config_hash"] = r.manifest.value("config_hash", std::string());
        return d;
      },
      py::arg("scenario"), py::arg("out_dir") = py::none());
}
