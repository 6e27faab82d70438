#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/stl.h>

#include "varspec/cli.hpp"
#include "varspec/closed_form.hpp"
#include "varspec/simulator.hpp"
#include "varspec/validate.hpp"

namespace py = pybind11;
using namespace varspec;

namespace {

Problem problem_for(const std::string& config, bool general) {
    return cli::make_problem(cli::parse_config(config), general);
}

py::dict fixed_point_dict(const FixedPoint& fp) {
    py::dict d;
    d["z"] = fp.z;
    d["a"] = fp.a;
    d["b"] = fp.b;
    d["m0"] = fp.m0;
    d["iterations"] = fp.iters;
    d["residual"] = fp.residual;
    d["converged"] = fp.converged;
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Spectral law of MANOVA variance-component estimators";

    static py::exception<Error> exc(m, "VarspecError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(exc.ptr(), e.what());
        }
    });

    m.def("mp_stieltjes", &mp_stieltjes, py::arg("z"), py::arg("gamma"));
    m.def("mp_density", &mp_density, py::arg("x"), py::arg("gamma"));

    m.def("oneway_b", [](const CVec& a, const std::vector<int>& J, int t) { return oneway_b(a, J, t); },
          py::arg("a"), py::arg("group_sizes"), py::arg("target"));
    m.def("nested_b", [](const CVec& a, const std::vector<int>& J, int t) { return nested_b(a, J, t); },
          py::arg("a"), py::arg("levels"), py::arg("target"));
    m.def("crossed_b",
          [](const CVec& a, int I, int J, int K, int L, int t) { return crossed_b(a, CrossedTwoWay{I, J, K, L}, t); },
          py::arg("a"), py::arg("I"), py::arg("J"), py::arg("K"), py::arg("L"), py::arg("target"));

    m.def(
        "solve_at_z",
        [](const std::string& config, cplx z, bool general) {
            const cli::RunConfig cfg = cli::parse_config(config);
            py::gil_scoped_release nogil;
            FixedPoint fp = solve_at_z(z, cli::make_problem(cfg, general), cfg.solver);
            py::gil_scoped_acquire gil;
            return fixed_point_dict(fp);
        },
        py::arg("config"), py::arg("z"), py::arg("general") = false);

    m.def(
        "density",
        [](const std::string& config, std::vector<double> grid, double eps, bool general) {
            const cli::RunConfig cfg = cli::parse_config(config);
            const Problem pr = cli::make_problem(cfg, general);
            SpectralDensity d;
            {
                py::gil_scoped_release nogil;
                d = grid.empty() ? auto_density(pr, eps, cfg.solver)
                                 : solve_grid({std::move(grid), eps}, pr, cfg.solver);
            }
            return py::make_tuple(d.grid, d.values, std::vector<bool>(d.converged.begin(), d.converged.end()));
        },
        py::arg("config"), py::arg("grid") = std::vector<double>{}, py::arg("eps") = 1e-4,
        py::arg("general") = false);

    m.def(
        "simulate",
        [](const std::string& config, std::uint64_t seed, int reps, int target) {
            const cli::RunConfig cfg = cli::parse_config(config);
            Simulator sim({cfg.design, cfg.components, seed, reps, target > 0 ? target : cfg.target});
            std::vector<std::vector<double>> out;
            {
                py::gil_scoped_release nogil;
                for (auto& s : sim.run()) out.push_back(std::move(s.eigenvalues));
            }
            return out;
        },
        py::arg("config"), py::arg("seed") = 0, py::arg("reps") = 1, py::arg("target") = 0);

    m.def(
        "compare",
        [](std::vector<double> eigenvalues, std::vector<double> grid, std::vector<double> values, double eps,
           int trim) {
            EmpiricalSpectrum s;
            std::sort(eigenvalues.begin(), eigenvalues.end());
            s.p = static_cast<int>(eigenvalues.size());
            s.eigenvalues = std::move(eigenvalues);
            SpectralDensity d;
            d.grid = std::move(grid);
            d.values = std::move(values);
            d.epsilon = eps;
            const ComparisonReport r = compare(s, d, trim);
            py::dict out;
            out["ks"] = r.ks;
            out["moment_gaps"] = r.moment_gaps;
            out["mass"] = r.mass;
            out["trimmed"] = r.trimmed;
            out["trimmed_values"] = r.trimmed_values;
            return out;
        },
        py::arg("eigenvalues"), py::arg("grid"), py::arg("values"), py::arg("eps") = 1e-4, py::arg("trim") = 0);

    m.def(
        "check",
        [](const std::string& config, int z_samples) {
            const cli::RunConfig cfg = cli::parse_config(config);
            const Design d = realize(cfg.design);
            const Problem pr = Problem::from_model(to_general_model(d, cfg.components, cfg.target));
            const double R = std::max(pr.support_bound(), 1e-3);
            const InvariantLedger led =
                invariant_suite(pr, recognize(d, cfg.target), sample_z(z_samples, -0.1 * R, 1.1 * R), cfg.solver);
            py::list checks;
            for (const auto& c : led.checks) {
                py::dict e;
                e["name"] = c.name;
                e["z"] = c.z;
                e["value"] = c.value;
                e["threshold"] = c.threshold;
                e["passed"] = c.passed;
                checks.append(e);
            }
            return py::make_tuple(led.all_passed(), checks);
        },
        py::arg("config"), py::arg("z_samples") = 20);
}
