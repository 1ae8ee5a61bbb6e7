#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tack/geometry.hpp"

using namespace tack;
using namespace tack::geometry;
using testing::code_of;

namespace {

GridSpec coarse() {
    GridSpec g;
    g.spacing = 40e-6;
    return g;
}

} // namespace

TEST_SUITE("geometry") {

TEST_CASE("conic sags against closed forms") {
    MirrorSpec sphere;
    for (double r : {0.0, 0.5e-3, 1.7e-3, 3e-3}) {
        const double R = sphere.radius_of_curvature;
        CHECK(sphere.sag(r) == doctest::Approx(R - std::sqrt(R * R - r * r)).epsilon(1e-12));
    }
    MirrorSpec para;
    para.kind = ConicKind::Paraboloid;
    para.conic_constant = -1;
    for (double r : {0.3e-3, 2.9e-3}) CHECK(para.sag(r) == doctest::Approx(r * r / (2 * para.radius_of_curvature)));

    // Ellipse x^2/b^2 + (z-a)^2/a^2 = 1 with a = R/(1+k), b^2 = R a.
    MirrorSpec ell;
    ell.kind = ConicKind::Ellipsoid;
    ell.conic_constant = -0.5;
    ell.radius_of_curvature = 2e-3;
    const double a = 2e-3 / 0.5, b2 = 2e-3 * a;
    for (double r : {0.4e-3, 1.1e-3, 2.4e-3}) {
        const double z = a - a * std::sqrt(1 - r * r / b2);
        CHECK(ell.sag(r) == doctest::Approx(z).epsilon(1e-12));
    }
}

TEST_CASE("mirror validation") {
    MirrorSpec m;
    CHECK_NOTHROW(m.validate());
    m.vertex_hole_diameter = m.aperture_diameter;
    CHECK(code_of([&] { m.validate(); }) == ErrorCode::ConfigError);
    m = MirrorSpec{};
    m.kind = ConicKind::Paraboloid;
    CHECK(code_of([&] { m.validate(); }) == ErrorCode::ConfigError);
    m = MirrorSpec{};
    m.aperture_diameter = 9e-3;  // wider than the sphere
    CHECK(code_of([&] { m.validate(); }) == ErrorCode::ConfigError);
    m = MirrorSpec{};
    m.radius_of_curvature = -1;
    CHECK(code_of([&] { m.validate(); }) == ErrorCode::ConfigError);
}

TEST_CASE("needle profile") {
    NeedleSpec n;
    CHECK(n.radius_at(n.tip_z + 1e-6) == 0.0);
    CHECK(n.radius_at(n.tip_z - 1e-4) == doctest::Approx(1e-4 * std::tan(n.taper_half_angle)));
    CHECK(n.radius_at(n.tip_z - 10 * n.cone_length()) == doctest::Approx(n.shaft_radius()));
    CHECK(n.cone_length() * std::tan(n.taper_half_angle) == doctest::Approx(n.shaft_radius()));
}

TEST_CASE("default trap rasterizes with connected electrodes") {
    const auto g = TrapGeometry::tack_default();
    const auto mask = rasterize(g, coarse());
    for (const char* name : {"mirror", "needle", "ring", "plate"}) {
        const auto id = mask.electrode_id(name);
        REQUIRE(id.has_value());
        CHECK(mask.cell_count(*id) > 0);
        CHECK(component_count(mask, *id) == 1);
    }
    // The ion region above the tip is vacuum on the axis.
    const auto& grid = mask.grid();
    const int j = static_cast<int>(std::lround((2.2e-3 - grid.z_min) / grid.spacing));
    CHECK_FALSE(mask.is_electrode(0, j));
    // The needle occupies the axis just below its tip.
    const int jt = static_cast<int>(std::lround((1.6e-3 - grid.z_min) / grid.spacing));
    CHECK(mask.at(0, jt) == *mask.electrode_id("needle"));

    CHECK(rasterize(g, coarse()) == mask);
}

TEST_CASE("rasterize reports unusable grids") {
    const auto g = TrapGeometry::tack_default();
    auto grid = coarse();
    grid.r_max = 2e-3;
    CHECK(code_of([&] { rasterize(g, grid); }) == ErrorCode::GridDoesNotCoverGeometry);
    grid = coarse();
    grid.spacing = 0.6e-3;
    CHECK(code_of([&] { rasterize(g, grid); }) == ErrorCode::GridTooCoarse);
    grid = coarse();
    grid.spacing = 0;
    CHECK(code_of([&] { rasterize(g, grid); }) == ErrorCode::ConfigError);
}

TEST_CASE("segments must not overlap") {
    auto g = TrapGeometry::tack_default();
    g.mirror_segments = {{0.0, 0.6e-3, ElectrodeRole::ground()}, {0.5e-3, 1.3e-3, ElectrodeRole::rf()}};
    CHECK(code_of([&] { g.validate(); }) == ErrorCode::GeometryOverlap);
}

TEST_CASE("surface sag honours the aperture") {
    ConicSurface s = mirror_surface(MirrorSpec{});
    CHECK(surface_sag(s, 1e-3) == doctest::Approx(MirrorSpec{}.sag(1e-3)));
    CHECK(code_of([&] { surface_sag(s, 3.5e-3); }) == ErrorCode::OutOfAperture);
}


TEST_CASE("worked sag values") {
    MirrorSpec m;
    CHECK(m.sag(0.0) == 0.0);
    CHECK(m.sag(3e-3) == doctest::Approx(4e-3 - std::sqrt(16e-6 - 9e-6)).epsilon(1e-12));
    CHECK(m.sag(3e-3) == doctest::Approx(1.3542e-3).epsilon(1e-4));
    MirrorSpec p;
    p.kind = ConicKind::Paraboloid;
    p.conic_constant = -1;
    CHECK(p.sag(2e-3) == doctest::Approx(0.5e-3).epsilon(1e-12));
}

TEST_CASE("200 um grid cannot resolve the shaft") {
    auto grid = coarse();
    grid.spacing = 200e-6;
    CHECK(code_of([&] { rasterize(TrapGeometry::tack_default(), grid); }) == ErrorCode::GridTooCoarse);
}

TEST_CASE("electrodes sharing cells overlap") {
    // Ring moved into the plate: same height, overlapping radii.
    auto g = TrapGeometry::tack_default();
    g.ring->height_z = g.plate->height_z;
    g.ring->inner_radius = 5.5e-3;
    CHECK(code_of([&] { rasterize(g, coarse()); }) == ErrorCode::GeometryOverlap);
}

}
