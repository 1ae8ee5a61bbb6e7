#include <doctest.h>

#include <cmath>
#include <random>

#include "support.hpp"
#include "tack/constants.hpp"
#include "tack/rays.hpp"

using namespace tack;
using namespace tack::rays;
using testing::code_of;
namespace c = tack::constants;

namespace {

double miss_distance(const Ray& r, const Vec3& p) { return (p - r.origin).cross(r.direction).norm(); }

Sampling cone(int n, double lo_deg, double hi_deg) {
    Sampling s;
    s.n_rays = n;
    s.min_polar = lo_deg * c::deg;
    s.max_polar = hi_deg * c::deg;
    return s;
}

} // namespace

TEST_SUITE("rays") {

TEST_CASE("sphere images its centre onto itself") {
    geometry::MirrorSpec m;
    SurfaceStack st;
    st.add(geometry::mirror_surface(m));
    const Vec3 C{0, 0, m.radius_of_curvature};
    const auto paths = trace_bundle(C, st, cone(500, 6, 35));
    int alive = 0;
    for (const auto& p : paths) {
        if (!p.ray.alive) continue;
        ++alive;
        CHECK(miss_distance(p.ray, C) < 1e-13);
        CHECK(p.ray.direction.norm() == doctest::Approx(1.0).epsilon(1e-14));
    }
    CHECK(alive == 500);
}

TEST_CASE("ellipsoid maps one focus onto the other") {
    const double R = 2e-3, k = -0.5;
    const double a = R / (1 + k), e = std::sqrt(-k);
    ConicSurface s{0.0, 1 / R, k, 0.0, 2.5e-3, geometry::SurfaceKind::Mirror};
    SurfaceStack st;
    st.add(s);
    const Vec3 f1{0, 0, a * (1 - e)}, f2{0, 0, a * (1 + e)};
    for (const auto& p : trace_bundle(f1, st, cone(300, 1, 50))) {
        REQUIRE(p.ray.alive);
        CHECK(miss_distance(p.ray, f2) < 1e-12);
    }
}

TEST_CASE("paraboloid focuses a collimated beam") {
    const double R = 4e-3;
    ConicSurface s{0.0, 1 / R, -1.0, 0.0, 3e-3, geometry::SurfaceKind::Mirror};
    const Vec3 F{0, 0, R / 2};
    for (double h : {0.2e-3, 1.1e-3, 2.9e-3}) {
        Ray in{{h, 0.3e-3, 10e-3}, {0, 0, -1}};
        const auto hit = intersect(in, s);
        REQUIRE(hit.has_value());
        CHECK(miss_distance(reflect(in, *hit), F) < 1e-13);
    }
}

TEST_CASE("Snell and reflection laws on random interfaces") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int k = 0; k < 2000; ++k) {
        const Vec3 n = Vec3{u(rng), u(rng), -1.0 - std::abs(u(rng))}.normalized();
        Vec3 d = Vec3{u(rng), u(rng), 1.0}.normalized();
        const Hit hit{{0, 0, 1e-3}, n, 1e-3};
        const Ray ray{{0, 0, 0}, d};
        const double n1 = 1.0 + std::abs(u(rng)), n2 = 1.0 + std::abs(u(rng));
        const double cos1 = -d.dot(n);
        const double sin1 = std::sqrt(std::max(0.0, 1 - cos1 * cos1));

        const auto r = reflect(ray, hit);
        CHECK(-r.direction.dot(n) == doctest::Approx(-cos1).epsilon(1e-12));
        CHECK(std::abs(r.direction.dot(n.cross(d))) < 1e-12);

        const auto t = refract(ray, hit, n1, n2);
        if (n1 * sin1 > n2) {
            CHECK_FALSE(t.has_value());
            continue;
        }
        REQUIRE(t.has_value());
        const double sin2 = t->direction.cross(n).norm();
        CHECK(n1 * sin1 == doctest::Approx(n2 * sin2).epsilon(1e-10));
        CHECK(std::abs(t->direction.dot(n.cross(d))) < 1e-12);
        CHECK(t->direction.norm() == doctest::Approx(1.0).epsilon(1e-14));
        CHECK(t->opl == doctest::Approx(n1 * 1e-3));
    }
}

TEST_CASE("window shift, optical path and reversibility") {
    const PlaneWindow w{5e-3, 2e-3, 1.5, 20e-3};
    SurfaceStack st;
    st.add_window(w);
    const double th = 0.3;
    const Ray in{{0, 0, 0}, {std::sin(th), 0, std::cos(th)}};
    const auto p = trace(in, st);
    REQUIRE(p.status == "ok");
    const double th2 = std::asin(std::sin(th) / w.n);
    const double x = w.z * std::tan(th) + w.thickness * std::tan(th2);
    CHECK(p.ray.origin.x == doctest::Approx(x).epsilon(1e-12));
    CHECK(p.ray.direction.x == doctest::Approx(std::sin(th)).epsilon(1e-12));
    const double opl = w.z / std::cos(th) + w.n * w.thickness / std::cos(th2);
    CHECK(p.ray.opl == doctest::Approx(opl).epsilon(1e-12));

    SurfaceStack back;
    back.add(plane_surface(w.z + w.thickness, 1.0, w.n, w.r_max));
    back.add(plane_surface(w.z, w.n, 1.0, w.r_max));
    const auto q = trace(Ray{p.ray.origin + p.ray.direction * 1e-3, -p.ray.direction}, back);
    REQUIRE(q.status == "ok");
    CHECK(std::abs(miss_distance(q.ray, {0, 0, 0})) < 1e-15);
    CHECK(q.ray.opl == doctest::Approx(1e-3 + w.n * w.thickness / std::cos(th2)).epsilon(1e-12));
}

TEST_CASE("tabulated asphere interpolates a sphere") {
    const double R = 30e-3;
    TabulatedAsphere t;
    for (int k = 0; k <= 200; ++k) {
        const double r = k * 50e-6;
        const double z = R - std::sqrt(R * R - r * r);
        t.r.push_back(r);
        t.z.push_back(z);
        t.slope.push_back(r / std::sqrt(R * R - r * r));
    }
    t.n_before = 1.5;
    for (double r : {0.0123e-3, 3.33e-3, 9.876e-3})
        CHECK(std::abs(t.sag(r) - (R - std::sqrt(R * R - r * r))) < 1e-12);
    const Ray in{{2e-3, 0, -5e-3}, {0, 0, 1}};
    const auto hit = intersect(in, t);
    REQUIRE(hit.has_value());
    CHECK(hit->point.z == doctest::Approx(R - std::sqrt(R * R - 4e-6)).epsilon(1e-9));
    CHECK(std::abs(hit->normal.cross(Vec3{-2e-3, 0, R - hit->point.z}.normalized()).norm()) < 1e-8);
    // Beyond the table the surface is absent.
    CHECK_FALSE(intersect(Ray{{10.5e-3, 0, -5e-3}, {0, 0, 1}}, t).has_value());

    TabulatedAsphere empty;
    CHECK(code_of([&] { empty.validate(); }) == ErrorCode::EmptyProfile);
}

TEST_CASE("ideal lens brings a parallel bundle to one point") {
    SurfaceStack st;
    st.add(IdealLens{0.0, 50e-3, 10e-3});
    const Vec3 d = Vec3{0.01, -0.02, 1}.normalized();
    std::vector<Path> paths;
    for (double x : {-3e-3, 0.0, 2e-3})
        for (double y : {-1e-3, 4e-3}) paths.push_back(trace(Ray{{x, y, -1e-3}, d}, st));
    const auto s = spot(paths, 50e-3);
    CHECK(s.rms_radius < 1e-12);
    CHECK(s.centroid_x == doctest::Approx(50e-3 * d.x / d.z).epsilon(1e-9));
}

TEST_CASE("sampling stays inside the requested cone") {
    for (auto pat : {Pattern::Spiral, Pattern::Hexapolar, Pattern::Meridional}) {
        auto s = cone(400, 10, 40);
        s.pattern = pat;
        const auto dirs = sample_directions(s);
        CHECK_FALSE(dirs.empty());
        for (const auto& d : dirs) {
            const double polar = std::acos(std::clamp(d.dot(s.axis), -1.0, 1.0));
            CHECK(polar >= s.min_polar - 1e-12);
            CHECK(polar <= s.max_polar + 1e-12);
            CHECK(d.norm() == doctest::Approx(1.0));
        }
    }
    CHECK(sample_directions(cone(400, 10, 40)).size() == 400);
    CHECK(code_of([] { sample_directions(cone(0, 10, 40)); }) == ErrorCode::ConfigError);
}

TEST_CASE("spot statistics") {
    std::vector<Path> paths;
    for (int k = 0; k < 4; ++k) {
        const double a = k * c::pi / 2;
        Path p;
        p.ray = Ray{{1e-3 + 2e-6 * std::cos(a), 2e-6 * std::sin(a), 0}, {0, 0, 1}};
        paths.push_back(p);
    }
    const auto s = spot(paths, 1e-3);
    CHECK(s.centroid_x == doctest::Approx(1e-3));
    CHECK(s.rms_radius == doctest::Approx(2e-6));
    CHECK(s.enclosed_fraction(2.1e-6) == 1.0);
    CHECK(s.enclosed_fraction(1e-6) == 0.0);

    std::vector<Path> dead(1);
    dead[0].ray.alive = false;
    CHECK(code_of([&] { spot(dead, 0.0); }) == ErrorCode::NoRaysReachPlane);
}

TEST_CASE("best focus of a converging bundle") {
    // Rays aimed at (0, 0, 7 mm) from a plane.
    std::vector<Path> paths;
    for (double x : {-1e-3, -0.5e-3, 0.4e-3, 1e-3}) {
        Path p;
        p.ray = Ray{{x, 0.3 * x, 0}, Vec3{-x, -0.3 * x, 7e-3}.normalized()};
        paths.push_back(p);
    }
    const auto s = best_focus(paths, 4e-3, 20e-3);
    CHECK(s.plane_z == doctest::Approx(7e-3).epsilon(1e-6));
    CHECK(s.rms_radius < 1e-9);
}

TEST_CASE("mirror magnification from the centre is unity") {
    SurfaceStack st;
    st.add(geometry::mirror_surface(geometry::MirrorSpec{}));
    CHECK(std::abs(paraxial_magnification({0, 0, 4e-3}, st)) == doctest::Approx(1.0).epsilon(1e-6));
}


TEST_CASE("worked intersections on the R = 4 mm sphere") {
    const auto s = geometry::mirror_surface([] {
        geometry::MirrorSpec m;
        m.vertex_hole_diameter = 0;
        return m;
    }());
    const auto h0 = intersect(Ray{{0, 0, 2e-3}, {0, 0, -1}}, s);
    REQUIRE(h0.has_value());
    CHECK(h0->point.norm() < 1e-15);
    CHECK(h0->normal.z == doctest::Approx(1.0));

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.1, 0.6);
    for (int k = 0; k < 50; ++k) {
        const double th = u(rng), ph = 6 * u(rng);
        const Ray r{{0, 0, 4e-3}, {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), -std::cos(th)}};
        const auto h = intersect(r, s);
        REQUIRE(h.has_value());
        CHECK(h->t == doctest::Approx(4e-3).epsilon(1e-13));
    }
    const auto h3 = intersect(Ray{{3e-3, 0, 10e-3}, {0, 0, -1}}, s);
    REQUIRE(h3.has_value());
    CHECK(h3->point.z == doctest::Approx(1.3542e-3).epsilon(1e-4));
}

TEST_CASE("worked reflections and refractions") {
    const Hit flat{{0, 0, 0}, {0, 0, 1}, 0.0};
    const auto back = reflect(Ray{{0, 0, 1e-3}, {0, 0, -1}}, flat);
    CHECK(back.direction.z == 1.0);
    const auto straight = refract(Ray{{0, 0, 1e-3}, {0, 0, -1}}, flat, 1.0, 1.7);
    REQUIRE(straight.has_value());
    CHECK(straight->direction.z == -1.0);

    const double s45 = std::sqrt(0.5);
    const auto bent = refract(Ray{{-1e-3, 0, 1e-3}, {s45, 0, -s45}}, flat, 1.0, 1.5);
    REQUIRE(bent.has_value());
    const double theta = std::asin(bent->direction.x) / c::deg;
    CHECK(theta == doctest::Approx(std::asin(s45 / 1.5) / c::deg).epsilon(1e-12));
    CHECK(std::abs(theta - 28.126) < 5e-4);
    const double s80 = std::sin(80 * c::deg);
    CHECK_FALSE(refract(Ray{{0, 0, 1e-3}, {s80, 0, -std::cos(80 * c::deg)}}, flat, 1.5, 1.0).has_value());

    // Parallel ray at h = 2 mm crosses the axis at R - R / (2 cos 30 deg).
    geometry::MirrorSpec m;
    const auto s = geometry::mirror_surface(m);
    const Ray in{{2e-3, 0, 10e-3}, {0, 0, -1}};
    const auto out = reflect(in, *intersect(in, s));
    const double z_cross = out.origin.z - out.origin.x / out.direction.x * out.direction.z;
    CHECK(z_cross == doctest::Approx(4e-3 - 2e-3 / std::cos(30 * c::deg)).epsilon(1e-12));
    CHECK(z_cross == doctest::Approx(1.6906e-3).epsilon(1e-4));
}

TEST_CASE("bundle from beyond the focus is far from collimated") {
    SurfaceStack st;
    st.add(geometry::mirror_surface(geometry::MirrorSpec{}));
    double spread = 0;
    for (const auto& p : trace_bundle({0, 0, 2.25e-3}, st, cone(400, 6, 70)))
        if (p.ray.alive) spread = std::max(spread, std::atan2(p.ray.direction.rho(), p.ray.direction.z));
    CHECK(spread > 1 * c::deg);
}

TEST_CASE("empty stack leaves rays untouched") {
    const Ray r{{1e-3, 2e-3, 0}, Vec3{0.1, 0.2, 1}.normalized(), 0.0};
    const auto p = trace(r, SurfaceStack{});
    CHECK(p.status == "ok");
    CHECK(p.ray.direction.x == r.direction.x);
    CHECK((p.ray.origin - r.origin).norm() == 0.0);
}

}
