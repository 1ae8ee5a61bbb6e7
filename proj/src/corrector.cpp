#include "tack/corrector.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include <Eigen/Dense>
#include <fmt/format.h>

#include "tack/constants.hpp"
#include "tack/error.hpp"

namespace tack::corrector {

namespace c = tack::constants;

void CorrectorDesignSpec::validate() const {
    mirror.validate();
    if (!(material_index > 1.0)) fail(ErrorCode::ConfigError, "corrector index must exceed 1");
    if (design_ray_count < 8) fail(ErrorCode::ConfigError, "corrector design needs at least 8 rays");
    if (!(center_thickness > 0.0)) fail(ErrorCode::ConfigError, "corrector centre thickness must be positive");
    if (fit_degree < 2 || fit_degree % 2) fail(ErrorCode::ConfigError, "fit degree must be even and >= 2");
    if (max_emission_angle < 0.0 || max_emission_angle >= 0.5 * c::pi)
        fail(ErrorCode::ConfigError, "emission angle limit must lie in [0, 90) degrees");
    if (!(source_z > 0.0)) fail(ErrorCode::ConfigError, "source must sit above the mirror vertex");
    if (window && !(front_face_z > window->z + window->thickness))
        fail(ErrorCode::ConfigError, "corrector must sit beyond the window");
    if (!(front_face_z > source_z)) fail(ErrorCode::ConfigError, "corrector must sit above the source");
}

double CorrectorDesignSpec::emission_limit() const {
    const double a = mirror.aperture_radius();
    const double rim = std::atan2(a, source_z - mirror.sag(a));
    return max_emission_angle > 0.0 ? std::min(max_emission_angle, rim) : rim;
}

double AsphereProfile::polynomial_sag(double rr) const {
    const double r2 = rr * rr;
    double s = 0.0, p = r2;
    for (double a : coefficients) {
        s += a * p;
        p *= r2;
    }
    return z0 + s;
}

rays::TabulatedAsphere AsphereProfile::surface() const {
    rays::TabulatedAsphere t;
    t.r = r;
    t.z = z;
    t.slope = slope;
    if (face == AsphericFace::Rear) {
        t.n_before = material_index;
        t.n_after = 1.0;
    } else {
        t.n_before = 1.0;
        t.n_after = material_index;
    }
    return t;
}

namespace {

// Surfaces ahead of the asphere: mirror, window, and in rear mode the flat face.
rays::SurfaceStack pre_stack(const CorrectorDesignSpec& spec, bool with_hole) {
    rays::SurfaceStack s;
    auto m = geometry::mirror_surface(spec.mirror);
    if (!with_hole) {
        // Design rays: no hole, and a rim margin for the finite differences.
        m.r_min = 0.0;
        m.r_max *= 1.01;
    }
    s.add(m);
    if (spec.window) s.add_window(*spec.window);
    if (spec.aspheric_face == AsphericFace::Rear)
        s.add(rays::plane_surface(spec.front_face_z, 1.0, spec.material_index, 1.0));
    return s;
}

struct Meridional {
    double qx, qz;  // last point before the asphere
    double ex, ez;  // direction toward the asphere
    double opl;
};

// `side` flips the emission azimuth so that the rays land at positive x.
Meridional meridional(const CorrectorDesignSpec& spec, const rays::SurfaceStack& pre, double alpha, double side = 1.0) {
    const rays::Ray ray{{0, 0, spec.source_z}, {side * std::sin(alpha), 0.0, -std::cos(alpha)}, 0.0, true};
    const auto p = rays::trace(ray, pre);
    if (!p.ray.alive)
        fail(ErrorCode::NoRaysReachPlane,
             fmt::format("design ray at {:.4f} deg lost at surface {}", alpha / c::deg, p.failed_surface));
    return {p.ray.origin.x, p.ray.origin.z, p.ray.direction.x, p.ray.direction.z, p.ray.opl};
}

} // namespace

AsphereProfile design(const CorrectorDesignSpec& spec) {
    spec.validate();
    const auto pre = pre_stack(spec, false);
    const bool rear = spec.aspheric_face == AsphericFace::Rear;
    const double n = spec.material_index;
    const double na = rear ? n : 1.0;   // medium before the asphere
    const double nb = rear ? 1.0 : n;   // medium after, rays parallel to +z
    const double alpha_max = spec.emission_limit();
    const int steps = spec.design_ray_count;
    const double h = alpha_max / steps;
    const double fd = 1e-6;

    // dt/dalpha from the requirement that the surface normal is na e - nb z.
    double side = 1.0;
    auto rhs = [&](double alpha, double t) {
        const auto m0 = meridional(spec, pre, alpha, side);
        const auto mp = meridional(spec, pre, alpha + fd, side);
        const auto mm = meridional(spec, pre, alpha - fd, side);
        const double dqx = (mp.qx - mm.qx) / (2 * fd), dqz = (mp.qz - mm.qz) / (2 * fd);
        const double dez = (mp.ez - mm.ez) / (2 * fd);
        const double nx = na * m0.ex, nz = na * m0.ez - nb;
        return -(dqx * nx + dqz * nz - t * nb * dez) / (na - nb * m0.ez);
    };

    const auto axis = meridional(spec, pre, 0.0);
    double t = rear ? spec.center_thickness : (spec.front_face_z - axis.qz) / axis.ez;
    if (!(t > 0.0)) fail(ErrorCode::ConfigError, "asphere vertex lies behind the last surface");
    {
        const auto m = meridional(spec, pre, h);
        if (m.qx + t * m.ex < 0.0) side = -1.0;
    }

    AsphereProfile prof;
    prof.material_index = n;
    prof.face = spec.aspheric_face;
    prof.flat_z = rear ? spec.front_face_z : spec.front_face_z + spec.center_thickness;

    double last_q = -1.0;
    for (int k = 0; k <= steps; ++k) {
        const double alpha = k * h;
        const auto m = meridional(spec, pre, alpha, side);
        if (k > 0 && rear && !(m.qx > last_q))
            fail(ErrorCode::BundleNotSingleValued,
                 fmt::format("bundle radius at the front face stops growing at {:.3f} deg; move the corrector farther",
                             alpha / c::deg));
        last_q = m.qx;
        const double px = m.qx + t * m.ex, pz = m.qz + t * m.ez;
        const double nx = na * m.ex, nz = na * m.ez - nb;
        const double slope = -nx / nz;
        if (!(std::abs(slope) < std::tan(80.0 * c::deg)))
            fail(ErrorCode::SlopeUnmanufacturable,
                 fmt::format("required slope {:.1f} deg at r = {:.3f} mm", std::atan(std::abs(slope)) / c::deg, px * 1e3));
        if (k > 0 && !(px > prof.r.back()))
            fail(ErrorCode::BundleNotSingleValued,
                 fmt::format("asphere radius stops growing at {:.3f} deg emission", alpha / c::deg));
        prof.r.push_back(k == 0 ? 0.0 : px);
        prof.z.push_back(pz);
        prof.slope.push_back(k == 0 ? 0.0 : slope);
        if (k == steps) break;
        const double k1 = rhs(alpha, t);
        const double k2 = rhs(alpha + 0.5 * h, t + 0.5 * h * k1);
        const double k3 = rhs(alpha + 0.5 * h, t + 0.5 * h * k2);
        const double k4 = rhs(alpha + h, t + h * k3);
        t += h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0;
        if (!(t > 0.0)) fail(ErrorCode::SlopeUnmanufacturable, "corrector thickness collapses to zero");
    }

    // Even polynomial in normalised radius; the reference plane is fitted too.
    const int terms = spec.fit_degree / 2;
    const double rn = prof.r_max();
    Eigen::MatrixXd A(prof.r.size(), terms + 1);
    Eigen::VectorXd b(prof.r.size());
    for (std::size_t k = 0; k < prof.r.size(); ++k) {
        const double u2 = (prof.r[k] / rn) * (prof.r[k] / rn);
        A(k, 0) = 1.0;
        double p = u2;
        for (int j = 1; j <= terms; ++j, p *= u2) A(k, j) = p;
        b(k) = prof.z[k] - prof.z.front();
    }
    const Eigen::VectorXd x = A.colPivHouseholderQr().solve(b);
    prof.z0 = prof.z.front() + x(0);
    prof.coefficients.resize(terms);
    for (int j = 0; j < terms; ++j) prof.coefficients[j] = x(j + 1) / std::pow(rn, 2 * (j + 1));
    prof.fit_residual_rms = std::sqrt((A * x - b).squaredNorm() / static_cast<double>(prof.r.size()));
    return prof;
}

rays::SurfaceStack corrector_stack(const AsphereProfile& profile, const CorrectorDesignSpec& spec, bool with_hole) {
    if (profile.empty()) fail(ErrorCode::EmptyProfile, "corrector profile has no samples");
    auto s = pre_stack(spec, with_hole);
    const auto surf = profile.surface();
    if (profile.face == AsphericFace::Rear) {
        s.surfaces.back() = rays::plane_surface(profile.flat_z, 1.0, profile.material_index, profile.r_max() * 1.5);
        s.add(surf);
    } else {
        s.add(surf);
        s.add(rays::plane_surface(profile.flat_z, profile.material_index, 1.0, profile.r_max() * 1.5));
    }
    return s;
}

namespace {

double reference_plane(const AsphereProfile& profile) {
    return std::max(profile.flat_z, *std::max_element(profile.z.begin(), profile.z.end())) + 1e-3;
}

// Source to reference-plane optical path of a traced ray.
double opl_to_plane(const rays::Ray& r, double plane) { return r.opl + (plane - r.origin.z) / r.direction.z; }

} // namespace

double design_opl_spread(const AsphereProfile& profile, const CorrectorDesignSpec& spec) {
    const auto stack = corrector_stack(profile, spec, false);
    const double plane = reference_plane(profile);
    const double alpha_max = spec.emission_limit();
    double lo = 1e300, hi = -1e300;
    for (int k = 0; k <= spec.design_ray_count; ++k) {
        // Stay a hair inside the rim so the last ray lands on the table.
        const double alpha = std::min(k * alpha_max / spec.design_ray_count, alpha_max * (1 - 1e-12));
        const auto p = rays::trace(rays::Ray{{0, 0, spec.source_z}, {std::sin(alpha), 0, -std::cos(alpha)}, 0, true}, stack);
        if (!p.ray.alive) fail(ErrorCode::NoRaysReachPlane, fmt::format("design ray {} lost ({} at surface {})", k, p.status, p.failed_surface));
        const double o = opl_to_plane(p.ray, plane);
        lo = std::min(lo, o);
        hi = std::max(hi, o);
    }
    return hi - lo;
}

Verification verify(const AsphereProfile& profile, const CorrectorDesignSpec& spec, const VerifyOptions& options) {
    if (!(options.objective_na > 0.0 && options.objective_na < 1.0))
        fail(ErrorCode::ConfigError, "objective NA must lie in (0, 1)");
    auto stack = corrector_stack(profile, spec, true);
    const double plane = reference_plane(profile);

    rays::Sampling s;
    s.n_rays = options.n_rays;
    s.offset = options.offset;
    const double hole = spec.mirror.hole_radius();
    s.min_polar = hole > 0 ? std::atan2(hole, spec.source_z - spec.mirror.sag(hole)) : 0.0;
    s.max_polar = spec.emission_limit() * (1 - 1e-9);
    const auto paths = rays::trace_bundle({0, 0, spec.source_z}, stack, s);

    Verification v;
    v.rays_traced = static_cast<int>(paths.size());
    double lo = 1e300, hi = -1e300, h_max = 0.0;
    for (const auto& p : paths) {
        if (!p.ray.alive) continue;
        ++v.rays_alive;
        v.direction_spread = std::max(v.direction_spread, std::atan2(p.ray.direction.rho(), p.ray.direction.z));
        const double o = opl_to_plane(p.ray, plane);
        lo = std::min(lo, o);
        hi = std::max(hi, o);
        h_max = std::max(h_max, p.ray.origin.rho());
    }
    if (v.rays_alive == 0) fail(ErrorCode::NoRaysReachPlane, "no verification ray survives the corrector");
    v.opl_spread = hi - lo;

    // Ideal refocusing lens whose marginal ray converges at the objective NA.
    const double na = options.objective_na;
    v.focal_length = h_max * std::sqrt(1 - na * na) / na;
    stack.add(rays::IdealLens{plane, v.focal_length, 2 * h_max + 1e-3});
    std::vector<rays::Path> refocused;
    refocused.reserve(paths.size());
    for (const auto& d : rays::sample_directions(s)) refocused.push_back(rays::trace({{0, 0, spec.source_z}, d, 0, true}, stack));
    v.refocus_spot = rays::spot(refocused, plane + v.focal_length);
    v.magnification = rays::paraxial_magnification({0, 0, spec.source_z}, stack);
    v.ion_rms_radius = v.refocus_spot.rms_radius / v.magnification;
    return v;
}

void export_profile(const AsphereProfile& profile, std::ostream& out, double pitch) {
    if (profile.empty()) fail(ErrorCode::EmptyProfile, "corrector profile has no samples");
    if (!(pitch > 0.0)) fail(ErrorCode::ConfigError, "export pitch must be positive");
    const auto surf = profile.surface();
    out << fmt::format("# material_index={:.6f}\n", profile.material_index);
    out << fmt::format("# face={}\n", profile.face == AsphericFace::Rear ? "rear" : "front");
    out << fmt::format("# flat_face_z_mm={:.9f}\n", profile.flat_z * 1e3);
    out << "r_mm,sag_mm,slope\n";
    const auto count = static_cast<long>(std::floor(profile.r_max() / pitch + 1e-9));
    for (long k = 0; k <= count; ++k) {
        const double r = k * pitch;
        out << fmt::format("{:.6f},{:.9f},{:.9f}\n", r * 1e3, (surf.sag(r) - profile.z.front()) * 1e3, surf.slope_at(r));
    }
    out << fmt::format("# z0_mm={:.9f}\n", profile.z0 * 1e3);
    out << fmt::format("# fit_residual_rms_um={:.6f}\n", profile.fit_residual_rms * 1e6);
    for (std::size_t j = 0; j < profile.coefficients.size(); ++j)
        out << fmt::format("# a{}={:.12e}  (m^{})\n", 2 * (j + 1), profile.coefficients[j], 1 - 2 * static_cast<int>(j + 1));
}

} // namespace tack::corrector
