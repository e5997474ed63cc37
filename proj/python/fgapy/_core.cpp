#include "fga/errors.hpp"
#include "fga/harness.hpp"
#include "fga/pipeline.hpp"
#include "fga/reference.hpp"

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

namespace py = pybind11;
using namespace fga;

namespace {

using CArray = py::array_t<cplx, py::array::c_style | py::array::forcecast>;

struct Bands {
  std::string lattice;
  std::unique_ptr<BandSetup> setup;
};

WaveField to_field(const CArray& a, double eps, double length) {
  if (a.ndim() < 1 || a.ndim() > 2) throw py::value_error("field must be 1- or 2-dimensional");
  for (int k = 1; k < a.ndim(); ++k)
    if (a.shape(k) != a.shape(0)) throw py::value_error("field must have equal extent on every axis");
  WaveField w(static_cast<int>(a.ndim()), static_cast<int>(a.shape(0)), length, eps);
  std::copy(a.data(), a.data() + a.size(), w.data.begin());
  w.validate();
  return w;
}

CArray to_array(const WaveField& w) {
  std::vector<py::ssize_t> shape(w.dim, w.points);
  CArray a(shape);
  std::copy(w.data.begin(), w.data.end(), a.mutable_data());
  return a;
}

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), v.size()); }

py::dict to_dict(const std::map<std::string, double>& m) {
  py::dict d;
  for (const auto& [k, v] : m) d[py::str(k)] = v;
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Frozen Gaussian dynamics in periodic media";

  static py::exception<Error> error(m, "FgaError");
  // Instances carry .kind (the error class) and .exit_code (the CLI mapping).
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::object exc = py::reinterpret_borrow<py::object>(error.ptr())(e.what());
      exc.attr("kind") = to_string(e.kind());
      exc.attr("exit_code") = exit_code_for(e.kind());
      PyErr_SetObject(error.ptr(), exc.ptr());
    }
  });

  py::class_<Bands>(m, "Bands")
      .def_property_readonly("dim", [](const Bands& b) { return b.setup->table.grid.dim; })
      .def_property_readonly("lattice", [](const Bands& b) { return b.lattice; })
      .def_property_readonly("n_bands", [](const Bands& b) { return b.setup->table.n_bands; })
      .def_property_readonly("nodes",
                             [](const Bands& b) {
                               const BrillouinGrid& g = b.setup->table.grid;
                               py::array_t<double> a({static_cast<py::ssize_t>(g.size()), static_cast<py::ssize_t>(g.dim)});
                               auto r = a.mutable_unchecked<2>();
                               for (std::size_t i = 0; i < g.size(); ++i)
                                 for (int k = 0; k < g.dim; ++k) r(i, k) = g.node(i)[k];
                               return a;
                             })
      .def_property_readonly("energies",
                             [](const Bands& b) {
                               const Eigen::MatrixXd& e = b.setup->table.energies;
                               py::array_t<double> a({static_cast<py::ssize_t>(b.setup->table.n_bands),
                                                      static_cast<py::ssize_t>(e.cols())});
                               auto r = a.mutable_unchecked<2>();
                               for (int n = 0; n < b.setup->table.n_bands; ++n)
                                 for (Eigen::Index j = 0; j < e.cols(); ++j) r(n, j) = e(n, j);
                               return a;
                             })
      .def_property_readonly("min_gap", [](const Bands& b) { return b.setup->table.min_gap; })
      .def_property_readonly("grad_discrepancy", [](const Bands& b) { return b.setup->grad.max_discrepancy; })
      .def_property_readonly("berry_max_imaginary", [](const Bands& b) { return b.setup->berry.max_imaginary; })
      .def("energy", [](const Bands& b, int band, std::vector<double> xi) { return b.setup->model(band - 1).energy(to_vec(xi)); },
           py::arg("band"), py::arg("xi"))
      .def("gradient",
           [](const Bands& b, int band, std::vector<double> xi) {
             const Vec g = b.setup->model(band - 1).gradient(to_vec(xi));
             return std::vector<double>(g.data(), g.data() + g.size());
           },
           py::arg("band"), py::arg("xi"));

  m.def(
      "solve_bands",
      [](const std::string& lattice, int dim, int nodes, int cutoff, int n_bands, int threads) {
        auto b = std::make_unique<Bands>();
        b->lattice = lattice;
        py::gil_scoped_release release;
        b->setup = prepare_bands(parse_lattice_spec(lattice, dim), nodes, cutoff, n_bands, threads);
        return b;
      },
      py::arg("lattice") = "cos(amp=1)", py::arg("dim") = 1, py::arg("nodes") = 128, py::arg("cutoff") = 16,
      py::arg("n_bands") = 3, py::arg("threads") = 1,
      "Bands of the lattice potential on the Brillouin grid. Bands are 1-based in every other call.");

  m.def(
      "bloch_packet",
      [](const Bands& b, int band, double eps, double length, int points_per_cell, std::vector<double> q0,
         std::vector<double> p0, double width) {
        const int dim = b.setup->table.grid.dim;
        const WaveField skeleton(dim, static_cast<int>(std::lround(length / eps)) * points_per_cell, length, eps);
        return to_array(bloch_packet(b.setup->table, band - 1, skeleton, to_vec(q0), to_vec(p0), width));
      },
      py::arg("bands"), py::arg("band"), py::arg("eps"), py::arg("length"), py::arg("points_per_cell"),
      py::arg("q0"), py::arg("p0"), py::arg("width") = 1.0);

  m.def(
      "band_projection",
      [](const Bands& b, const CArray& psi, double eps, double length, int band, double c_g, double r_c, int threads) {
        const WaveField w = to_field(psi, eps, length);
        const PhaseSpaceGrid grid = make_phase_space_grid(w, b.setup->table.grid.nodes_per_axis, c_g, r_c);
        py::gil_scoped_release release;
        WaveField out = band_projection(w, b.setup->table, band - 1, grid, threads);
        py::gil_scoped_acquire acquire;
        return to_array(out);
      },
      py::arg("bands"), py::arg("psi"), py::arg("eps"), py::arg("length"), py::arg("band") = 1, py::arg("c_g") = 0.5,
      py::arg("r_c") = 8.0, py::arg("threads") = 1);

  m.def(
      "propagate",
      [](const Bands& b, const CArray& psi, double eps, double length, std::vector<double> times,
         std::vector<int> bands, const std::string& external, double dt, bool track_a1, double seed_threshold,
         double gap_factor, int threads) {
        const WaveField w = to_field(psi, eps, length);
        std::vector<int> idx;
        for (int n : bands) idx.push_back(n - 1);
        FgaOptions o;
        o.seed_threshold = seed_threshold;
        o.isolation.factor = gap_factor;
        o.integrator.dt = dt;
        o.integrator.track_a1 = track_a1 && w.dim == 1;
        const ExternalPotential u = ExternalPotential::parse(external, w.dim);
        FgaRun run;
        {
          py::gil_scoped_release release;
          run = run_fga(w, *b.setup, idx, u, times, o, threads);
        }
        py::list fields;
        for (const WaveField& f : run.fields) fields.append(to_array(f));
        py::dict monitors;
        monitors["seeds"] = run.seeds;
        monitors["phase_space_points"] = run.grid_points;
        monitors["failed_trajectories"] = run.synthesis.skipped;
        monitors["max_symplecticity_residual"] = run.max_sympl_residual;
        monitors["min_sigma_z"] = run.min_sigma_z;
        monitors["projection_residual"] = run.projection_residual;
        if (run.t0_consistency >= 0.0) monitors["t0_consistency"] = run.t0_consistency;
        return py::make_tuple(fields, to_array(run.projected), monitors);
      },
      py::arg("bands"), py::arg("psi"), py::arg("eps"), py::arg("length"), py::arg("times"),
      py::arg("band_indices") = std::vector<int>{1}, py::arg("external") = "zero", py::arg("dt") = 1e-3,
      py::arg("track_a1") = false, py::arg("seed_threshold") = 1e-8, py::arg("gap_factor") = 10.0, py::arg("threads") = 1,
      "Returns (fields at each time, sum of band projections of psi, monitors).");

  m.def(
      "reference_propagate",
      [](const CArray& psi, double eps, double length, double T, const std::string& lattice,
         const std::string& external, double dt_divisor) {
        const WaveField w = to_field(psi, eps, length);
        ReferenceConfig c = ReferenceConfig::resolved(eps, length, T, parse_lattice_spec(lattice, w.dim),
                                                      ExternalPotential::parse(external, w.dim), dt_divisor);
        c.points = w.points;
        ReferenceStats st;
        WaveField out;
        {
          py::gil_scoped_release release;
          out = reference_propagate(w, c, &st);
        }
        py::dict stats;
        stats["steps"] = st.steps;
        stats["dt"] = st.step;
        stats["norm_drift"] = st.norm_drift;
        return py::make_tuple(to_array(out), stats);
      },
      py::arg("psi"), py::arg("eps"), py::arg("length"), py::arg("T"), py::arg("lattice") = "cos(amp=1)",
      py::arg("external") = "zero", py::arg("dt_divisor") = 1.0);

  m.def(
      "run_command",
      [](const std::string& command, const std::string& config, std::vector<std::string> overrides, int threads) {
        const RunConfig cfg = RunConfig::parse(config, overrides);
        RunReport report;
        report.command = command;
        report.threads = threads;
        report.config = cfg;
        std::ostringstream log;
        int code = 0;
        {
          py::gil_scoped_release release;
          if (command == "bands") code = cmd_bands(cfg, threads, report, log);
          else if (command == "decompose") code = cmd_decompose(cfg, threads, report, log);
          else if (command == "propagate") code = cmd_propagate(cfg, threads, report, log);
          else if (command == "reference") code = cmd_reference(cfg, threads, report, log);
          else if (command == "convergence") code = cmd_convergence(cfg, threads, report, log);
          else fail(ErrorKind::kConfig, "unknown command " + command);
        }
        py::dict out;
        out["exit_code"] = code;
        out["monitors"] = to_dict(report.monitors);
        out["errors"] = to_dict(report.errors);
        out["notes"] = report.notes;
        out["log"] = log.str();
        out["report"] = report.serialize();
        return out;
      },
      py::arg("command"), py::arg("config") = "", py::arg("overrides") = std::vector<std::string>{},
      py::arg("threads") = 1, "Runs a harness command on config text; outputs go to run.out.");

  m.def(
      "resolve_config",
      [](const std::string& config, std::vector<std::string> overrides) {
        return RunConfig::parse(config, overrides).serialize();
      },
      py::arg("config") = "", py::arg("overrides") = std::vector<std::string>{},
      "Validated config with every default filled in.");
}
