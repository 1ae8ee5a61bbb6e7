#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <memory>
#include <sstream>

#include "tack/acceptance.hpp"
#include "tack/cli.hpp"
#include "tack/collect.hpp"
#include "tack/config.hpp"
#include "tack/corrector.hpp"
#include "tack/crystal.hpp"
#include "tack/error.hpp"
#include "tack/pseudo.hpp"

namespace py = pybind11;
using namespace tack;

namespace {

// (nz, nr) array, row j at height grid.z(j).
py::array_t<double> grid_array(const field::ScalarField2D& f) {
    py::array_t<double> a({f.nz(), f.nr()});
    auto m = a.mutable_unchecked<2>();
    for (int j = 0; j < f.nz(); ++j)
        for (int i = 0; i < f.nr(); ++i) m(j, i) = f.at(i, j);
    return a;
}

py::array_t<double> positions_array(const std::vector<Vec3>& p) {
    py::array_t<double> a({static_cast<py::ssize_t>(p.size()), py::ssize_t{3}});
    auto m = a.mutable_unchecked<2>();
    for (std::size_t k = 0; k < p.size(); ++k) {
        m(k, 0) = p[k].x;
        m(k, 1) = p[k].y;
        m(k, 2) = p[k].z;
    }
    return a;
}

collect::EmissionModel emission_from(const std::string& kind, const std::vector<double>& axis) {
    if (kind == "isotropic") return collect::EmissionModel::isotropic();
    if (kind == "dipole") return collect::EmissionModel::dipole({axis.at(0), axis.at(1), axis.at(2)});
    fail(ErrorCode::ConfigError, "emission must be 'isotropic' or 'dipole'");
}

py::dict solve(const config::RunConfig& rc) {
    const auto sol = pseudo::solve_trap(rc.geometry, rc.grid, rc.drive, rc.ion, rc.solver);
    const auto& a = sol.analysis;
    py::dict d;
    d["minimum_z"] = a.minimum.z;
    d["tip_distance"] = a.tip_distance;
    d["depth_eV"] = a.depth.depth;
    d["saddle"] = py::make_tuple(a.depth.saddle_r, a.depth.saddle_z);
    d["axial_hz"] = a.secular.axial;
    d["radial_hz"] = a.secular.radial;
    d["iterations"] = sol.report.iterations;
    d["psi_eV"] = grid_array(sol.psi);
    d["rf_unit"] = grid_array(sol.rf_unit);
    py::array_t<double> r(sol.psi.nr()), z(sol.psi.nz());
    auto rm = r.mutable_unchecked<1>();
    auto zm = z.mutable_unchecked<1>();
    for (int i = 0; i < sol.psi.nr(); ++i) rm(i) = rc.grid.r(i);
    for (int j = 0; j < sol.psi.nz(); ++j) zm(j) = rc.grid.z(j);
    d["r"] = r;
    d["z"] = z;
    return d;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Needle-and-mirror ion trap: fields, crystals, collection optics";

    static py::exception<Error> err(m, "TackError", PyExc_RuntimeError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(err.ptr(), e.what());
        }
    });

    py::class_<config::RunConfig>(m, "RunConfig")
        .def_property_readonly("hash", &config::RunConfig::hash)
        .def_property_readonly("ion_z", [](const config::RunConfig& c) { return c.ion_z; })
        .def_property_readonly("resolved", [](const config::RunConfig& c) { return c.resolved.dump(); })
        .def_property_readonly("seed", [](const config::RunConfig& c) { return c.seed; });

    m.def("default_config", [](const std::vector<std::string>& overrides) {
        return config::parse(config::default_json(), overrides);
    }, py::arg("overrides") = std::vector<std::string>{});
    m.def("segmented_config", [](const std::vector<std::string>& overrides) {
        return config::parse(config::segmented_json(), overrides);
    }, py::arg("overrides") = std::vector<std::string>{});
    m.def("load_config", [](const std::string& path, const std::vector<std::string>& overrides) {
        return config::load(path, overrides);
    }, py::arg("path"), py::arg("overrides") = std::vector<std::string>{});
    m.def("parse_config", [](const std::string& text, const std::vector<std::string>& overrides) {
        return config::parse(nlohmann::json::parse(text), overrides);
    }, py::arg("text"), py::arg("overrides") = std::vector<std::string>{});

    m.def("solve_trap", &solve, py::arg("config"),
          "Solve the RF field and analyse the pseudopotential; lengths in m, energies in eV.");

    m.def("collection_fraction",
          [](double ion_z, double radius, double aperture, double hole, bool needle, const std::string& emission,
             const std::vector<double>& axis, long samples, std::uint64_t seed) {
              collect::CollectionGeometry g;
              g.ion_z = ion_z;
              g.mirror.radius_of_curvature = radius;
              g.mirror.aperture_diameter = aperture;
              g.mirror.vertex_hole_diameter = hole;
              if (needle) g.needle = geometry::NeedleSpec{};
              const auto em = emission_from(emission, axis);
              const auto f = samples > 0 ? collect::solid_angle_monte_carlo(g, em, samples, seed)
                                         : collect::solid_angle(g, em);
              py::dict d;
              d["geometric"] = f.geometric;
              d["weighted"] = f.weighted;
              d["geometric_error"] = f.geometric_error;
              d["weighted_error"] = f.weighted_error;
              return d;
          },
          py::arg("ion_z"), py::arg("radius") = 4e-3, py::arg("aperture") = 6e-3, py::arg("hole") = 0.75e-3,
          py::arg("needle") = false, py::arg("emission") = "isotropic",
          py::arg("axis") = std::vector<double>{0, 0, 1}, py::arg("samples") = 0L, py::arg("seed") = 1ULL);

    m.def("na_equivalent", [](double f) {
        const auto e = collect::na_equivalent(f);
        return py::make_tuple(e.solid_angle, e.na, e.above_hemisphere);
    }, py::arg("fraction"));

    m.def("photon_budget", [](double weighted, double n_excitations) {
        return collect::photon_budget(weighted, collect::default_loss_chain(), n_excitations).expected_counts;
    }, py::arg("weighted_fraction"), py::arg("n_excitations") = 1e6);

    m.def("relax_crystal",
          [](int n, double axial_hz, double radial_hz, std::uint64_t seed) {
              crystal::RelaxOptions o;
              o.seed = seed;
              const auto cfg = crystal::relax(n, crystal::TrapModel::harmonic(axial_hz, radial_hz),
                                              pseudo::IonSpecies::barium138(), o);
              const auto cls = crystal::classify(cfg);
              py::dict d;
              d["positions"] = positions_array(cfg.positions);
              d["energy"] = cfg.energy;
              d["shells"] = cls.shells;
              d["planarity"] = cls.planarity;
              d["converged"] = cfg.converged;
              return d;
          },
          py::arg("n_ions"), py::arg("axial_hz") = 420e3, py::arg("radial_hz") = 200e3, py::arg("seed") = 1ULL);

    m.def("design_corrector", [](const config::RunConfig& rc) {
        const auto p = corrector::design(rc.corrector);
        const auto v = corrector::verify(p, rc.corrector, rc.verify);
        std::ostringstream table;
        corrector::export_profile(p, table, rc.export_pitch);
        py::dict d;
        d["r"] = p.r;
        d["z"] = p.z;
        d["coefficients"] = p.coefficients;
        d["z0"] = p.z0;
        d["fit_residual_rms"] = p.fit_residual_rms;
        d["direction_spread"] = v.direction_spread;
        d["opl_spread"] = v.opl_spread;
        d["magnification"] = v.magnification;
        d["ion_rms_radius"] = v.ion_rms_radius;
        d["table"] = table.str();
        return d;
    }, py::arg("config"));

    m.def("acceptance", [] {
        py::list out;
        for (const auto& r : acceptance::run(acceptance::default_inputs())) {
            py::dict d;
            d["id"] = r.id;
            d["name"] = r.name;
            d["measured"] = r.measured;
            d["target"] = r.target;
            d["pass"] = r.pass;
            out.append(d);
        }
        return out;
    });

    m.def("run_cli", &cli::run, py::arg("args"), "Run a tack subcommand; returns the exit code.");
}
