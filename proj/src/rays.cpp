#include "tack/rays.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include <fmt/format.h>

#include "tack/constants.hpp"
#include "tack/error.hpp"

namespace tack::rays {

namespace c = tack::constants;

void TabulatedAsphere::validate() const {
    if (r.size() < 2 || z.size() != r.size() || slope.size() != r.size())
        fail(ErrorCode::EmptyProfile, "tabulated asphere needs at least two (r, z, slope) samples");
    if (r.front() != 0.0) fail(ErrorCode::ConfigError, "tabulated asphere must start on the axis");
    for (std::size_t k = 1; k < r.size(); ++k)
        if (!(r[k] > r[k - 1])) fail(ErrorCode::ConfigError, "tabulated asphere radii must increase strictly");
    if (!(n_before > 0.0 && n_after > 0.0)) fail(ErrorCode::ConfigError, "refractive indices must be positive");
}

namespace {

// Hermite segment containing rr; returns index k with r[k] <= rr <= r[k+1].
std::size_t segment(const std::vector<double>& r, double rr) {
    auto it = std::upper_bound(r.begin(), r.end(), rr);
    std::size_t k = it == r.begin() ? 0 : static_cast<std::size_t>(it - r.begin()) - 1;
    return std::min(k, r.size() - 2);
}

} // namespace

double TabulatedAsphere::sag(double rr) const {
    rr = std::abs(rr);
    const std::size_t k = segment(r, rr);
    const double h = r[k + 1] - r[k];
    const double t = (rr - r[k]) / h;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * z[k] + (t3 - 2 * t2 + t) * h * slope[k] + (-2 * t3 + 3 * t2) * z[k + 1] +
           (t3 - t2) * h * slope[k + 1];
}

double TabulatedAsphere::slope_at(double rr) const {
    const double sign = rr < 0 ? -1.0 : 1.0;
    rr = std::abs(rr);
    const std::size_t k = segment(r, rr);
    const double h = r[k + 1] - r[k];
    const double t = (rr - r[k]) / h;
    const double t2 = t * t;
    const double d = (6 * t2 - 6 * t) * z[k] / h + (3 * t2 - 4 * t + 1) * slope[k] + (-6 * t2 + 6 * t) * z[k + 1] / h +
                     (3 * t2 - 2 * t) * slope[k + 1];
    return sign * d;
}

double TabulatedAsphere::z_min() const {
    double m = *std::min_element(z.begin(), z.end());
    // Hermite overshoot between samples is bounded by a quarter cell of slope.
    for (std::size_t k = 0; k + 1 < r.size(); ++k)
        m = std::min(m, std::min(z[k], z[k + 1]) - 0.25 * (r[k + 1] - r[k]) * std::max(std::abs(slope[k]), std::abs(slope[k + 1])));
    return m;
}

double TabulatedAsphere::z_max() const {
    double m = *std::max_element(z.begin(), z.end());
    for (std::size_t k = 0; k + 1 < r.size(); ++k)
        m = std::max(m, std::max(z[k], z[k + 1]) + 0.25 * (r[k + 1] - r[k]) * std::max(std::abs(slope[k]), std::abs(slope[k + 1])));
    return m;
}

ConicSurface plane_surface(double z, double n_before, double n_after, double r_max) {
    ConicSurface s;
    s.vertex_z = z;
    s.curvature = 0.0;
    s.r_min = 0.0;
    s.r_max = r_max;
    s.kind = SurfaceKind::Refracting;
    s.n_before = n_before;
    s.n_after = n_after;
    return s;
}

void SurfaceStack::add_window(const PlaneWindow& w) {
    if (!(w.thickness > 0.0) || !(w.n > 0.0)) fail(ErrorCode::ConfigError, "window needs positive thickness and index");
    add(plane_surface(w.z, 1.0, w.n, w.r_max));
    add(plane_surface(w.z + w.thickness, w.n, 1.0, w.r_max));
}

namespace {

Vec3 facing(Vec3 n, const Vec3& d) {
    n = n.normalized();
    return n.dot(d) > 0 ? -n : n;
}

} // namespace

std::optional<Hit> intersect(const Ray& ray, const ConicSurface& s) {
    if (!ray.alive) return std::nullopt;
    const Vec3& o = ray.origin;
    const Vec3& d = ray.direction;
    const double cv = s.curvature, k1 = 1.0 + s.conic_constant;
    const double ow = o.z - s.vertex_z;
    // c (x^2 + y^2) - 2 w + (1 + k) c w^2 = 0 along o + t d
    const double A = cv * (d.x * d.x + d.y * d.y) + k1 * cv * d.z * d.z;
    const double B = 2.0 * (cv * (o.x * d.x + o.y * d.y) - d.z + k1 * cv * ow * d.z);
    const double C = cv * (o.x * o.x + o.y * o.y) - 2.0 * ow + k1 * cv * ow * ow;

    double roots[2];
    int nroots = 0;
    if (A == 0.0) {
        if (B == 0.0) return std::nullopt;
        roots[nroots++] = -C / B;
    } else {
        const double disc = B * B - 4 * A * C;
        if (disc < 0) return std::nullopt;
        const double q = -0.5 * (B + std::copysign(std::sqrt(disc), B));
        roots[nroots++] = q / A;
        if (q != 0.0) roots[nroots++] = C / q;
    }
    std::sort(roots, roots + nroots);
    for (int k = 0; k < nroots; ++k) {
        const double t = roots[k];
        if (!(t > intersect_epsilon)) continue;
        const Vec3 p = o + d * t;
        const double r = p.rho();
        if (r < s.r_min || r > s.r_max) continue;
        const double w = p.z - s.vertex_z;
        // Far sheet of the quadric (beyond the sphere's equator, the other hyperboloid branch).
        if (!(k1 * cv * w < 1.0)) continue;
        const Vec3 n{2 * cv * p.x, 2 * cv * p.y, -2.0 + 2.0 * k1 * cv * w};
        return Hit{p, facing(n, d), t};
    }
    return std::nullopt;
}

std::optional<Hit> intersect(const Ray& ray, const TabulatedAsphere& s) {
    if (!ray.alive || s.r.size() < 2) return std::nullopt;
    const Vec3& o = ray.origin;
    const Vec3& d = ray.direction;
    if (std::abs(d.z) < 1e-12) return std::nullopt;
    const double margin = 1e-6;
    double ta = (s.z_min() - margin - o.z) / d.z;
    double tb = (s.z_max() + margin - o.z) / d.z;
    if (ta > tb) std::swap(ta, tb);
    ta = std::max(ta, intersect_epsilon);
    if (tb <= ta) return std::nullopt;
    auto g = [&](double t) {
        const Vec3 p = o + d * t;
        const double r = p.rho();
        // Tangent extension past the rim keeps brackets near the edge intact.
        if (r > s.r_max()) return p.z - s.z.back() - s.slope.back() * (r - s.r_max());
        return p.z - s.sag(r);
    };
    constexpr int n = 64;
    double t0 = ta, g0 = g(ta);
    for (int k = 1; k <= n; ++k) {
        const double t1 = ta + (tb - ta) * k / n;
        const double g1 = g(t1);
        if (!std::isnan(g0) && !std::isnan(g1) && (g0 == 0.0 || g0 * g1 < 0.0)) {
            double lo = t0, hi = t1, glo = g0;
            for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++it) {
                const double mid = 0.5 * (lo + hi);
                const double gm = g(mid);
                if ((gm < 0) == (glo < 0)) lo = mid, glo = gm;
                else hi = mid;
            }
            const double t = 0.5 * (lo + hi);
            const Vec3 p = o + d * t;
            const double r = p.rho();
            if (r > s.r_max() * (1 + 1e-12)) return std::nullopt;
            const double m = s.slope_at(r);
            Vec3 nrm{0, 0, 1};
            if (r > 0) nrm = Vec3{-m * p.x / r, -m * p.y / r, 1.0};
            return Hit{p, facing(nrm, d), t};
        }
        t0 = t1;
        g0 = g1;
    }
    return std::nullopt;
}

std::optional<Hit> intersect(const Ray& ray, const IdealLens& s) {
    if (!ray.alive || ray.direction.z == 0.0) return std::nullopt;
    const double t = (s.z - ray.origin.z) / ray.direction.z;
    if (!(t > intersect_epsilon)) return std::nullopt;
    const Vec3 p = ray.origin + ray.direction * t;
    if (p.rho() > s.r_max) return std::nullopt;
    return Hit{p, facing({0, 0, 1}, ray.direction), t};
}

std::optional<Hit> intersect(const Ray& ray, const Surface& s) {
    return std::visit([&](const auto& surf) { return intersect(ray, surf); }, s);
}

Ray reflect(const Ray& ray, const Hit& hit, double n_medium) {
    Ray out = ray;
    out.opl += n_medium * (hit.point - ray.origin).norm();
    out.origin = hit.point;
    const Vec3& d = ray.direction;
    out.direction = (d - hit.normal * (2.0 * d.dot(hit.normal))).normalized();
    return out;
}

std::optional<Ray> refract(const Ray& ray, const Hit& hit, double n1, double n2) {
    if (!(n1 > 0.0 && n2 > 0.0)) fail(ErrorCode::ConfigError, "refractive indices must be positive");
    const Vec3& d = ray.direction;
    const Vec3& nrm = hit.normal;  // faces the incoming ray
    const double eta = n1 / n2;
    const double cos_i = -nrm.dot(d);
    const double sin2_t = eta * eta * std::max(0.0, 1.0 - cos_i * cos_i);
    if (sin2_t > 1.0) return std::nullopt;
    const double cos_t = std::sqrt(1.0 - sin2_t);
    Ray out = ray;
    out.opl += n1 * (hit.point - ray.origin).norm();
    out.origin = hit.point;
    out.direction = (d * eta + nrm * (eta * cos_i - cos_t)).normalized();
    return out;
}

namespace {

Ray through_ideal_lens(const Ray& ray, const Hit& hit, const IdealLens& lens, double n_medium) {
    Ray out = ray;
    out.opl += n_medium * (hit.point - ray.origin).norm();
    out.origin = hit.point;
    const Vec3& d = ray.direction;
    const double f = lens.focal_length;
    const double dz = d.z > 0 ? f : -f;
    // Image point of the incoming direction in the focal plane.
    const Vec3 focus{f * d.x / std::abs(d.z), f * d.y / std::abs(d.z), lens.z + dz};
    Vec3 to = focus - hit.point;
    if (f < 0) to = -to;
    out.direction = to.normalized();
    const double h2 = (hit.point.x - focus.x) * (hit.point.x - focus.x) + (hit.point.y - focus.y) * (hit.point.y - focus.y);
    out.opl += n_medium * (std::abs(f) - std::sqrt(h2 + f * f));
    return out;
}

} // namespace

Path trace(const Ray& ray, const SurfaceStack& stack) {
    Path path;
    path.points.push_back(ray.origin);
    Ray cur = ray;
    double n = stack.n_object;
    for (std::size_t k = 0; k < stack.surfaces.size(); ++k) {
        const auto& surf = stack.surfaces[k];
        const auto hit = intersect(cur, surf);
        if (!hit) {
            cur.alive = false;
            path.failed_surface = static_cast<int>(k);
            path.status = "miss";
            break;
        }
        path.points.push_back(hit->point);
        if (const auto* cs = std::get_if<ConicSurface>(&surf)) {
            if (cs->kind == SurfaceKind::Mirror) {
                cur = reflect(cur, *hit, n);
            } else {
                auto next = refract(cur, *hit, n, cs->n_after);
                if (!next) {
                    cur.alive = false;
                    path.failed_surface = static_cast<int>(k);
                    path.status = "tir";
                    break;
                }
                cur = *next;
                n = cs->n_after;
            }
        } else if (const auto* ta = std::get_if<TabulatedAsphere>(&surf)) {
            auto next = refract(cur, *hit, n, ta->n_after);
            if (!next) {
                cur.alive = false;
                path.failed_surface = static_cast<int>(k);
                path.status = "tir";
                break;
            }
            cur = *next;
            n = ta->n_after;
        } else {
            cur = through_ideal_lens(cur, *hit, std::get<IdealLens>(surf), n);
        }
    }
    path.ray = cur;
    return path;
}

std::vector<Vec3> sample_directions(const Sampling& s) {
    if (s.n_rays < 1) fail(ErrorCode::ConfigError, "sampling needs at least one ray");
    if (!(s.max_polar >= s.min_polar) || s.min_polar < 0.0 || s.max_polar > c::pi)
        fail(ErrorCode::ConfigError, "sampling polar range must satisfy 0 <= min <= max <= pi");
    // Orthonormal frame around the axis.
    const Vec3 w = s.axis.normalized();
    const Vec3 helper = std::abs(w.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    const Vec3 u = helper.cross(w).normalized();
    const Vec3 v = w.cross(u);
    auto dir = [&](double theta, double phi) {
        return (w * std::cos(theta) + u * (std::sin(theta) * std::cos(phi)) + v * (std::sin(theta) * std::sin(phi)))
            .normalized();
    };
    std::vector<Vec3> out;
    out.reserve(s.n_rays);
    const double c_hi = std::cos(s.min_polar), c_lo = std::cos(s.max_polar);
    switch (s.pattern) {
    case Pattern::Spiral: {
        // Equal solid angle per ray, golden-angle azimuths.
        const double golden = c::pi * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < s.n_rays; ++k) {
            const double f = (k + s.offset) / s.n_rays;
            out.push_back(dir(std::acos(c_hi - f * (c_hi - c_lo)), golden * (k + s.offset)));
        }
        break;
    }
    case Pattern::Hexapolar: {
        // Rings equally spaced in polar angle, 6 k rays on ring k.
        int rings = 0;
        while (1 + 3 * rings * (rings + 1) < s.n_rays) ++rings;
        for (int k = 0; k <= rings && static_cast<int>(out.size()) < s.n_rays; ++k) {
            const double theta = s.min_polar + (s.max_polar - s.min_polar) * (rings ? double(k) / rings : 0.0);
            const int m = k == 0 ? 1 : 6 * k;
            for (int q = 0; q < m && static_cast<int>(out.size()) < s.n_rays; ++q)
                out.push_back(dir(theta, 2 * c::pi * (q + s.offset) / m));
        }
        break;
    }
    case Pattern::Meridional: {
        for (int k = 0; k < s.n_rays; ++k) {
            const double f = s.n_rays == 1 ? 0.5 : (k + s.offset) / s.n_rays;
            out.push_back(dir(s.min_polar + f * (s.max_polar - s.min_polar), 0.0));
        }
        break;
    }
    }
    return out;
}

std::vector<Path> trace_bundle(const Vec3& source, const SurfaceStack& stack, const Sampling& sampling) {
    std::vector<Path> out;
    for (const auto& d : sample_directions(sampling)) out.push_back(trace(Ray{source, d, 0.0, true}, stack));
    return out;
}

double SpotDiagram::enclosed_fraction(double radius) const {
    if (hits.empty()) return 0.0;
    std::size_t inside = 0;
    for (const auto& [x, y] : hits)
        if (std::hypot(x - centroid_x, y - centroid_y) <= radius) ++inside;
    return static_cast<double>(inside) / hits.size();
}

SpotDiagram spot(const std::vector<Path>& paths, double plane_z) {
    SpotDiagram s;
    s.plane_z = plane_z;
    for (const auto& p : paths) {
        const Ray& r = p.ray;
        if (!r.alive || r.direction.z == 0.0) continue;
        const double t = (plane_z - r.origin.z) / r.direction.z;
        if (t < 0.0) continue;
        s.hits.emplace_back(r.origin.x + t * r.direction.x, r.origin.y + t * r.direction.y);
    }
    if (s.hits.empty())
        fail(ErrorCode::NoRaysReachPlane, fmt::format("no live ray reaches z = {:.6g} mm", plane_z * 1e3));
    const double n = static_cast<double>(s.hits.size());
    for (const auto& [x, y] : s.hits) s.centroid_x += x, s.centroid_y += y;
    s.centroid_x /= n;
    s.centroid_y /= n;
    double rr = 0, xx = 0;
    for (const auto& [x, y] : s.hits) {
        const double dx = x - s.centroid_x, dy = y - s.centroid_y;
        rr += dx * dx + dy * dy;
        xx += dx * dx;
    }
    s.rms_radius = std::sqrt(rr / n);
    s.fwhm_estimate = 2.355 * std::sqrt(xx / n);
    return s;
}

SpotDiagram best_focus(const std::vector<Path>& paths, double z_lo, double z_hi, double tolerance) {
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    double a = z_lo, b = z_hi;
    double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
    double f1 = spot(paths, x1).rms_radius, f2 = spot(paths, x2).rms_radius;
    while (b - a > tolerance) {
        if (f1 < f2) {
            b = x2, x2 = x1, f2 = f1;
            x1 = b - phi * (b - a);
            f1 = spot(paths, x1).rms_radius;
        } else {
            a = x1, x1 = x2, f1 = f2;
            x2 = a + phi * (b - a);
            f2 = spot(paths, x2).rms_radius;
        }
    }
    return spot(paths, 0.5 * (a + b));
}

double paraxial_magnification(const Vec3& source, const SurfaceStack& stack, double angle) {
    SurfaceStack clear = stack;
    for (auto& s : clear.surfaces)
        if (auto* cs = std::get_if<ConicSurface>(&s)) cs->r_min = 0.0;
    // Emit toward the first surface: downward for a mirror below the source.
    double dz = -1.0;
    if (!clear.surfaces.empty())
        if (const auto* cs = std::get_if<ConicSurface>(&clear.surfaces.front()); cs && cs->vertex_z > source.z) dz = 1.0;
    const Ray ray{source, Vec3{std::sin(angle), 0.0, dz * std::cos(angle)}, 0.0, true};
    const Path p = trace(ray, clear);
    if (!p.ray.alive) fail(ErrorCode::NoRaysReachPlane, "paraxial ray lost in the stack");
    const Vec3& d = p.ray.direction;
    const double u_out = std::abs(d.x / d.z);
    if (u_out == 0.0) return std::numeric_limits<double>::infinity();
    return std::tan(angle) / u_out;
}

void write_spot_csv(const SpotDiagram& spot, std::ostream& out) {
    out << "x_m,y_m\n";
    for (const auto& [x, y] : spot.hits) out << fmt::format("{:.9e},{:.9e}\n", x, y);
}

void write_spot_svg(const SpotDiagram& spot, std::ostream& out, double scale_to, const std::string& unit) {
    double extent = 1e-300;
    for (const auto& [x, y] : spot.hits)
        extent = std::max({extent, std::abs(x - spot.centroid_x), std::abs(y - spot.centroid_y)});
    extent *= 1.1;
    const double size = 400.0, half = size / 2, k = half / extent;
    out << fmt::format("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">\n",
                       size);
    out << fmt::format("<rect width=\"{0}\" height=\"{0}\" fill=\"white\"/>\n", size);
    out << fmt::format("<text x=\"8\" y=\"18\" font-size=\"12\">z={:.4f} mm, rms {:.4g} {}, half-width {:.4g} {}</text>\n",
                       spot.plane_z * 1e3, spot.rms_radius * scale_to, unit, extent * scale_to, unit);
    for (const auto& [x, y] : spot.hits)
        out << fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1\" fill=\"black\"/>\n",
                           half + (x - spot.centroid_x) * k, half - (y - spot.centroid_y) * k);
    out << "</svg>\n";
}

void write_paths_csv(const std::vector<Path>& paths, std::ostream& out) {
    out << "ray,point,x_m,y_m,z_m,status\n";
    for (std::size_t k = 0; k < paths.size(); ++k)
        for (std::size_t q = 0; q < paths[k].points.size(); ++q) {
            const auto& p = paths[k].points[q];
            out << fmt::format("{},{},{:.9e},{:.9e},{:.9e},{}\n", k, q, p.x, p.y, p.z, paths[k].status);
        }
}

} // namespace tack::rays
