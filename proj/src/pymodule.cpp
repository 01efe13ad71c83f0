#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "krflow/experiment.h"

namespace py = pybind11;
using namespace krflow;

namespace {

std::vector<double> to_vec(const py::array_t<double>& a, std::size_t want) {
    py::buffer_info info = py::array_t<double, py::array::c_style |
                                                   py::array::forcecast>(a)
                               .request();
    std::vector<double> v((double*)info.ptr, (double*)info.ptr + info.size);
    if (v.size() != want)
        throw py::value_error("potential has " + std::to_string(v.size()) +
                              " values, grid wants " + std::to_string(want));
    return v;
}

py::array_t<double> to_arr(const std::vector<double>& v) {
    py::array_t<double> a((py::ssize_t)v.size());
    std::copy(v.begin(), v.end(), (double*)a.request().ptr);
    return a;
}

// reference geometry plus the operations evaluated against it
struct PyModel {
    ReducedModel model;
    ReferenceData ref;
    RefCurvature rc;

    PyModel(const std::string& preset, double L, int N, bool ke)
        : model(build_model(preset)),
          ref(build_reference(
              model, Grid(model.n, N > 0 ? N : (model.n == 1 ? 513 : 161), L),
              ke && preset == "cp1")),
          rc(build_ref_curvature(ref)) {}

    PotentialField field(const py::array_t<double>& phi) const {
        return hessian_field(ref, to_vec(phi, ref.grid.size()));
    }

    py::dict functionals(const py::array_t<double>& phi) const {
        FunctionalValues v = compute_functionals(field(phi));
        py::dict d;
        d["I"] = v.I;
        d["J"] = v.J;
        d["F0"] = v.F0;
        d["F"] = v.F;
        d["nu"] = v.nu;
        d["int_phi_ref"] = v.int_phi_ref;
        d["int_negphi_ev"] = v.int_negphi_ev;
        return d;
    }

    py::tuple ricci(const py::array_t<double>& phi) const {
        auto [h, c] = ricci_potential(field(phi));
        return py::make_tuple(to_arr(h), c);
    }

    py::array_t<double> rhs(const py::array_t<double>& phi) const {
        return to_arr(flow_rhs(field(phi)));
    }

    py::dict poincare(const py::array_t<double>& phi) const {
        PoincareResult r = poincare_proxy(field(phi));
        py::dict d;
        d["lambda1"] = r.lambda1;
        d["proxy"] = r.proxy;
        d["residual"] = r.residual;
        d["iters"] = r.iters;
        return d;
    }

    py::dict alpha_sweep(const std::vector<py::array_t<double>>& phis,
                         const std::vector<double>& deltas,
                         double budget) const {
        std::vector<std::vector<double>> traj;
        for (const auto& p : phis) traj.push_back(to_vec(p, ref.grid.size()));
        DeltaSweepResult r = delta_sweep(ref, traj, deltas, budget);
        py::dict d;
        d["deltas"] = r.deltas;
        d["sup_integrals"] = r.sup_integrals;
        d["alpha_hat"] = r.alpha_hat;
        d["budget"] = r.budget;
        d["threshold_passed"] = r.threshold_passed;
        return d;
    }
};

py::dict summary_dict(const RunSummary& s) {
    py::dict d;
    d["outcome"] = to_string(s.outcome);
    d["exit_code"] = exit_code(s.outcome);
    d["failure"] = s.failure;
    d["final_t"] = s.final_t;
    d["final_sup_h"] = s.final_sup_h;
    d["rate"] = s.rate;
    d["rate_fitted"] = s.rate_fitted;
    d["c0"] = s.c0;
    d["alpha_hat"] = s.alpha_hat;
    d["equivalence"] = to_string(s.equivalence);
    d["wall_seconds"] = s.wall_seconds;
    d["config_hash"] = s.hash;
    d["out_dir"] = s.out_dir;
    return d;
}

}  // namespace

PYBIND11_MODULE(_krflow, m) {
    m.doc() = "symmetry-reduced Kahler-Ricci flow laboratory";

    py::register_exception<ConfigError>(m, "ConfigError");
    py::register_exception<DomainError>(m, "DomainError");
    py::register_exception<AdmissibilityError>(m, "AdmissibilityError");
    py::register_exception<IoError>(m, "IoError");

    m.def("preset_names", &preset_names);

    py::class_<PyModel>(m, "Model")
        .def(py::init<const std::string&, double, int, bool>(),
             py::arg("preset"), py::arg("L") = 18.0, py::arg("N") = 0,
             py::arg("ke_reference") = true)
        .def_property_readonly("n",
                               [](const PyModel& s) { return s.ref.grid.n; })
        .def_property_readonly("N",
                               [](const PyModel& s) { return s.ref.grid.N; })
        .def_property_readonly("L",
                               [](const PyModel& s) { return s.ref.grid.L; })
        .def_property_readonly(
            "volume", [](const PyModel& s) { return s.model.volume; })
        .def_property_readonly(
            "x", [](const PyModel& s) { return to_arr(s.ref.x); })
        .def_property_readonly(
            "h_ref", [](const PyModel& s) { return to_arr(s.ref.h_ref); })
        .def("functionals", &PyModel::functionals, py::arg("phi"))
        .def("ricci_potential", &PyModel::ricci, py::arg("phi"))
        .def("flow_rhs", &PyModel::rhs, py::arg("phi"))
        .def("poincare_proxy", &PyModel::poincare, py::arg("phi"))
        .def("alpha_sweep", &PyModel::alpha_sweep, py::arg("phis"),
             py::arg("deltas"), py::arg("budget") = 1e3);

    m.def(
        "run",
        [](const std::string& config_text) {
            return summary_dict(run_experiment(parse_config_text(config_text)));
        },
        py::arg("config_text"),
        "run one experiment from key = value config text; writes the usual "
        "run directory and returns the summary");

    m.def(
        "run_file",
        [](const std::string& path) {
            return summary_dict(run_experiment(parse_config(path)));
        },
        py::arg("path"));

    m.def("canonical_config", [](const std::string& config_text) {
        return serialize_config(parse_config_text(config_text));
    });
}
