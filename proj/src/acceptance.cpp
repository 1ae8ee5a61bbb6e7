#include "tack/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <memory>
#include <random>

#include <fmt/format.h>

#include "tack/collect.hpp"
#include "tack/constants.hpp"
#include "tack/corrector.hpp"
#include "tack/crystal.hpp"
#include "tack/error.hpp"
#include "tack/field.hpp"
#include "tack/pseudo.hpp"
#include "tack/rays.hpp"

namespace tack::acceptance {

namespace c = tack::constants;

SuiteInputs default_inputs() { return {config::parse(config::default_json()), config::parse(config::segmented_json())}; }

std::string format_line(const CriterionResult& r) {
    return fmt::format("[{}] criterion {:>2} {:<28} measured: {} | target: {} | {:.2f} s", r.pass ? "PASS" : "FAIL", r.id,
                       r.name, r.measured, r.target, r.seconds);
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

collect::CollectionGeometry bare_mirror(const config::RunConfig& rc, double z) {
    collect::CollectionGeometry g;
    g.ion_z = z;
    g.mirror = rc.geometry.mirror;
    return g;
}

// Coaxial cylinders with the analytic log profile imposed on the end caps.
double coaxial_error(double spacing) {
    const double a = 1e-3, b = 4e-3;
    geometry::GridSpec g;
    g.r_max = b;
    g.z_min = 0.0;
    g.z_max = 2e-3;
    g.spacing = spacing;
    auto phi = [&](double r) { return std::log(b / r) / std::log(b / a); };
    std::vector<geometry::ElectrodeInfo> el{{"inner", geometry::ElectrodeRole::rf()},
                                            {"outer", geometry::ElectrodeRole::ground()}};
    std::vector<double> values{1.0, 0.0};
    const int nr = g.nr(), nz = g.nz();
    std::vector<int> cap(nr, -1);
    for (int i = 0; i < nr; ++i) {
        const double r = g.r(i);
        if (r > a + 1e-12 && r < b - 1e-12) {
            cap[i] = static_cast<int>(el.size());
            el.push_back({fmt::format("cap{}", i), geometry::ElectrodeRole::ground()});
            values.push_back(phi(r));
        }
    }
    auto mask = std::make_shared<geometry::ElectrodeMask>(g, el);
    for (int j = 0; j < nz; ++j)
        for (int i = 0; i < nr; ++i) {
            const double r = g.r(i);
            if (r <= a + 1e-12) mask->set(i, j, 0);
            else if (r >= b - 1e-12) mask->set(i, j, 1);
            else if (j == 0 || j == nz - 1) mask->set(i, j, static_cast<std::int16_t>(cap[i]));
        }
    const auto [f, report] = field::solve_laplace(mask, values);
    double err = 0.0;
    for (int j = 0; j < nz; ++j)
        for (int i = 0; i < nr; ++i) {
            const double r = g.r(i);
            if (r > a && r < b) err = std::max(err, std::abs(f.at(i, j) - phi(r)) / phi(r));
        }
    return err;
}

// Largest violation of Snell's law and the law of reflection over random
// rays hitting random conics.
std::pair<double, double> optics_invariants(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double snell = 0.0, mirror = 0.0;
    for (int k = 0; k < 5000; ++k) {
        geometry::ConicSurface s;
        s.vertex_z = 0.0;
        s.curvature = 200.0 * u(rng);
        s.conic_constant = u(rng);
        s.r_max = 2e-3;
        const Vec3 o{1e-3 * u(rng), 1e-3 * u(rng), -5e-3};
        const Vec3 d = Vec3{0.2 * u(rng), 0.2 * u(rng), 1.0}.normalized();
        const auto hit = rays::intersect(rays::Ray{o, d, 0.0, true}, s);
        if (!hit) continue;
        const double n1 = 1.0 + 0.5 * (u(rng) + 1.0), n2 = 1.0 + 0.5 * (u(rng) + 1.0);
        const rays::Ray in{o, d, 0.0, true};
        if (const auto out = rays::refract(in, *hit, n1, n2)) {
            const Vec3& e = out->direction;
            snell = std::max(snell, std::abs(n1 * d.cross(hit->normal).norm() - n2 * e.cross(hit->normal).norm()));
            snell = std::max(snell, std::abs(d.cross(hit->normal).dot(e)));  // coplanar
        }
        const auto r = rays::reflect(in, *hit);
        mirror = std::max(mirror, std::abs(std::abs(d.dot(hit->normal)) - std::abs(r.direction.dot(hit->normal))));
        mirror = std::max(mirror, (d - hit->normal * d.dot(hit->normal) -
                                   (r.direction - hit->normal * r.direction.dot(hit->normal)))
                                      .norm());
    }
    return {snell, mirror};
}

} // namespace

std::vector<CriterionResult> run(const SuiteInputs& in, const std::function<void(const CriterionResult&)>& on_result) {
    const auto& rc = in.base;
    const double R = rc.geometry.mirror.radius_of_curvature;
    std::vector<CriterionResult> out;
    std::optional<pseudo::TrapSolution> trap;

    auto criterion = [&](int id, std::string name, std::string target, auto body) {
        CriterionResult r;
        r.id = id;
        r.name = std::move(name);
        r.target = std::move(target);
        const auto t0 = Clock::now();
        try {
            body(r);
        } catch (const Error& e) {
            r.pass = false;
            r.measured = fmt::format("error {} ({})", to_string(e.code()), e.message());
        } catch (const std::exception& e) {
            r.pass = false;
            r.measured = fmt::format("error ({})", e.what());
        }
        r.seconds = seconds_since(t0);
        out.push_back(r);
        if (on_result) on_result(r);
    };
    auto solved = [&]() -> const pseudo::TrapSolution& {
        if (!trap) trap = pseudo::solve_trap(rc.geometry, rc.grid, rc.drive, rc.ion, rc.solver);
        return *trap;
    };

    criterion(1, "solid angle from focus", "0.386 +- 0.005, < 1 s", [&](CriterionResult& r) {
        const auto t0 = Clock::now();
        const auto f = collect::solid_angle(bare_mirror(rc, R / 2), collect::EmissionModel::isotropic());
        const double dt = seconds_since(t0);
        r.measured = fmt::format("{:.4f} in {:.3f} s", f.geometric, dt);
        r.pass = std::abs(f.geometric - 0.386) <= 0.005 && dt < 1.0;
    });

    criterion(2, "solid angle focus+0.25 mm", "0.350 +- 0.005, < 1 s", [&](CriterionResult& r) {
        const auto t0 = Clock::now();
        const auto f = collect::solid_angle(bare_mirror(rc, R / 2 + 0.25e-3), collect::EmissionModel::isotropic());
        const double dt = seconds_since(t0);
        r.measured = fmt::format("{:.4f} in {:.3f} s", f.geometric, dt);
        r.pass = std::abs(f.geometric - 0.350) <= 0.005 && dt < 1.0;
    });

    criterion(3, "NA equivalence", "3.0 +- 0.1 sr, NA 0.85 +- 0.01", [&](CriterionResult& r) {
        const auto na = collect::na_equivalent(0.24);
        r.measured = fmt::format("{:.3f} sr, NA {:.4f}", na.solid_angle, na.na);
        r.pass = std::abs(na.solid_angle - 3.0) <= 0.1 && std::abs(na.na - 0.85) <= 0.01;
    });

    criterion(4, "ion height above tip", "0.55 mm +- 15%", [&](CriterionResult& r) {
        const auto& a = solved().analysis;
        r.measured = fmt::format("{:.4f} mm (minimum at z = {:.4f} mm)", a.tip_distance * 1e3, a.minimum.z * 1e3);
        r.pass = std::abs(a.tip_distance - 0.55e-3) <= 0.15 * 0.55e-3;
    });

    criterion(5, "trap depth", "0.05 eV within 2x: [0.025, 0.1] eV", [&](CriterionResult& r) {
        const auto& d = solved().analysis.depth;
        r.measured = fmt::format("{:.4f} eV (saddle r = {:.3f} mm, z = {:.3f} mm)", d.depth, d.saddle_r * 1e3,
                                 d.saddle_z * 1e3);
        r.pass = d.depth >= 0.025 && d.depth <= 0.1;
    });

    criterion(6, "secular structure", "axial > radial, ratio 2.1 +- 30%", [&](CriterionResult& r) {
        const auto& s = solved().analysis.secular;
        const double ratio = s.axial / s.radial;
        r.measured = fmt::format("axial {:.1f} kHz, radial {:.1f} kHz, ratio {:.3f}", s.axial / 1e3, s.radial / 1e3, ratio);
        r.pass = s.axial > s.radial && std::abs(ratio - 2.1) <= 0.3 * 2.1;
    });

    criterion(7, "needle scan", "R^2 > 0.99 over central 1 mm, depth within +-50%", [&](CriterionResult& r) {
        const auto scan = pseudo::needle_scan(rc.geometry, rc.grid, rc.scan_tips(), rc.drive, rc.ion, rc.solver,
                                              rc.scan.central_span);
        r.measured = fmt::format("slope {:.4f}, R^2 {:.6f}, depth variation {:.1f}%", scan.slope, scan.r_squared,
                                 100 * scan.depth_variation);
        r.pass = scan.r_squared > 0.99 && scan.depth_variation < 0.5;
    });

    criterion(8, "7-ion crystal", "shells [1,6], planarity < 0.05, 2-ion d within 0.1%, < 10 s", [&](CriterionResult& r) {
        const auto t0 = Clock::now();
        const auto model = crystal::TrapModel::harmonic(rc.crystal.axial_frequency, rc.crystal.radial_frequency);
        crystal::RelaxOptions opt;
        opt.seed = rc.seed;
        opt.restarts = rc.crystal.restarts;
        const auto seven = crystal::relax(7, model, rc.ion, opt);
        const auto cls = crystal::classify(seven);
        const auto two = crystal::relax(2, model, rc.ion, opt);
        const double d = (two.positions[0] - two.positions[1]).norm();
        // Weaker confinement sets the pair axis: m w^2 d/2 = k q^2 / d^2.
        const double w = 2 * c::pi * std::min(rc.crystal.axial_frequency, rc.crystal.radial_frequency);
        const double d0 = std::cbrt(2 * c::coulomb_constant * rc.ion.charge * rc.ion.charge / (rc.ion.mass * w * w));
        const double dt = seconds_since(t0);
        std::string shells;
        for (int s : cls.shells) shells += (shells.empty() ? "" : ",") + std::to_string(s);
        r.measured = fmt::format("shells [{}], planarity {:.2e}, d = {:.4f} um vs {:.4f} um, {:.2f} s", shells,
                                 cls.planarity, d * 1e6, d0 * 1e6, dt);
        r.pass = cls.shells == std::vector<int>{1, 6} && cls.planarity < 0.05 && std::abs(d / d0 - 1) < 1e-3 && dt < 10;
    });

    criterion(9, "aspheric corrector", "spread <= 1e-4 rad, ion rms <= 1.15 um, hyperbola <= 1 um, < 30 s",
              [&](CriterionResult& r) {
        const auto t0 = Clock::now();
        const auto profile = corrector::design(rc.corrector);
        const auto v = corrector::verify(profile, rc.corrector, rc.verify);

        // Source at the centre of curvature: the collimator is a hyperbola.
        corrector::CorrectorDesignSpec hs = rc.corrector;
        hs.source_z = R;
        hs.window.reset();
        hs.aspheric_face = corrector::AsphericFace::Front;
        hs.front_face_z = R + 6e-3;
        hs.max_emission_angle = 10 * c::deg;
        const auto hp = corrector::design(hs);
        const double n = hs.material_index, f = hs.front_face_z - R;
        geometry::ConicSurface hyp;
        hyp.vertex_z = hs.front_face_z;
        hyp.curvature = 1.0 / (f * (n - 1));
        hyp.conic_constant = -n * n;
        hyp.r_max = 1.0;
        double sag_err = 0.0;
        for (std::size_t k = 0; k < hp.r.size(); ++k)
            sag_err = std::max(sag_err, std::abs(hp.z[k] - hyp.sag_unchecked(hp.r[k])));
        const double dt = seconds_since(t0);
        r.measured = fmt::format("spread {:.2e} rad, ion rms {:.3e} um (M {:.2f}, fit {:.3f} um), hyperbola {:.2e} um, {:.2f} s",
                                 v.direction_spread, v.ion_rms_radius * 1e6, v.magnification,
                                 profile.fit_residual_rms * 1e6, sag_err * 1e6, dt);
        r.pass = v.direction_spread <= 1e-4 && v.ion_rms_radius <= 1.15e-6 && sag_err <= 1e-6 && dt < 30;
    });

    criterion(10, "uncorrected contrast", "< 20% of rays within 10 um (ion-referred)", [&](CriterionResult& r) {
        const double zs = R / 2 + 0.25e-3;
        rays::SurfaceStack stack;
        stack.add(geometry::mirror_surface(rc.geometry.mirror));
        const auto& m = rc.geometry.mirror;
        rays::Sampling s;
        s.n_rays = rc.optics.n_rays;
        s.min_polar = std::atan2(m.hole_radius(), zs - m.sag(m.hole_radius()));
        s.max_polar = std::atan2(m.aperture_radius(), zs - m.sag(m.aperture_radius()));
        const auto paths = rays::trace_bundle({0, 0, zs}, stack, s);
        const auto spot = rays::best_focus(paths, rc.optics.best_focus_lo, rc.optics.best_focus_hi);
        const double mag = std::abs(rays::paraxial_magnification({0, 0, zs}, stack));
        const double frac = spot.enclosed_fraction(rc.optics.spot_radius * mag);
        r.measured = fmt::format("{:.1f}% within {:.0f} um at z = {:.3f} mm (M {:.3f}, rms {:.1f} um)", 100 * frac,
                                 rc.optics.spot_radius * mag * 1e6, spot.plane_z * 1e3, mag, spot.rms_radius * 1e6);
        r.pass = frac < 0.2;
    });

    criterion(11, "segmented mirror", "trap z (RF top only) > trap z (RF top two)", [&](CriterionResult& r) {
        const auto& sg = in.segmented;
        const auto two = pseudo::solve_trap(sg.geometry, sg.grid, sg.drive, sg.ion, sg.solver).analysis;
        auto top_only = sg.geometry;
        // Ground every segment except the highest RF one.
        std::size_t top = 0;
        for (std::size_t k = 0; k < top_only.mirror_segments.size(); ++k)
            if (top_only.mirror_segments[k].z_max > top_only.mirror_segments[top].z_max) top = k;
        for (std::size_t k = 0; k < top_only.mirror_segments.size(); ++k)
            if (k != top) top_only.mirror_segments[k].role = geometry::ElectrodeRole::ground();
        const auto one = pseudo::solve_trap(top_only, sg.grid, sg.drive, sg.ion, sg.solver).analysis;
        r.measured = fmt::format("top only {:.4f} mm vs top two {:.4f} mm", one.minimum.z * 1e3, two.minimum.z * 1e3);
        r.pass = one.minimum.z > two.minimum.z;
    });

    criterion(12, "property suites", "coax < 1e-3 & >= 3x, scaling 1e-12, optics 1e-12, cap 1e-9, MC 3 sigma",
              [&](CriterionResult& r) {
        const double e20 = coaxial_error(20e-6), e40 = coaxial_error(40e-6);

        // Psi scales as V^2 / Omega^2.
        const auto& rf = solved().rf_unit;
        auto drive2 = rc.drive;
        drive2.amplitude *= 2;
        auto drive3 = rc.drive;
        drive3.frequency *= 2;
        const auto p1 = pseudo::pseudopotential(rf, rc.drive, rc.ion);
        const auto p2 = pseudo::pseudopotential(rf, drive2, rc.ion);
        const auto p3 = pseudo::pseudopotential(rf, drive3, rc.ion);
        double scaling = 0.0;
        for (std::size_t k = 0; k < p1.values.size(); ++k) {
            if (!(p1.values[k] > 0)) continue;
            scaling = std::max(scaling, std::abs(p2.values[k] / (4 * p1.values[k]) - 1));
            scaling = std::max(scaling, std::abs(4 * p3.values[k] / p1.values[k] - 1));
        }

        const auto [snell, mirror] = optics_invariants(rc.seed);

        // Cap from the focus to the rim, against Simpson on the polar integrand.
        const double th1 = 102.15 * c::deg;
        const int n = 20000;
        double quad = 0.0;
        const double h = (c::pi - th1) / n;
        for (int k = 0; k <= n; ++k) {
            const double t = th1 + k * h;
            const double w = (k == 0 || k == n) ? 1 : (k % 2 ? 4 : 2);
            quad += w * 0.75 * std::pow(std::sin(t), 3);
        }
        quad *= h / 3;
        const double cap = std::abs(collect::dipole_cap_fraction(0.0, th1) - quad);

        const auto g = bare_mirror(rc, R / 2);
        const auto q = collect::solid_angle(g, rc.collection.emission);
        const auto mc = collect::solid_angle_monte_carlo(g, rc.collection.emission, 1000000, rc.seed);
        const double z_geo = std::abs(mc.geometric - q.geometric) / mc.geometric_error;
        const double z_w = std::abs(mc.weighted - q.weighted) / mc.weighted_error;

        r.measured = fmt::format("coax {:.2e} (x{:.2f}), scaling {:.1e}, snell {:.1e}, reflect {:.1e}, cap {:.1e}, "
                                 "MC {:.2f}/{:.2f} sigma",
                                 e20, e40 / e20, scaling, snell, mirror, cap, z_geo, z_w);
        r.pass = e20 < 1e-3 && e40 / e20 >= 3 && scaling <= 1e-12 && snell <= 1e-12 && mirror <= 1e-12 &&
                 cap <= 1e-9 && z_geo <= 3 && z_w <= 3;
    });

    return out;
}

} // namespace tack::acceptance
