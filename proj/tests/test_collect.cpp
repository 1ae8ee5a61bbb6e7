#include <doctest.h>

#include <cmath>

#include "support.hpp"
#include "tack/collect.hpp"
#include "tack/constants.hpp"

using namespace tack;
using namespace tack::collect;
using testing::code_of;
namespace c = tack::constants;

namespace {

// Isotropic fraction between the hole edge and the rim seen from the ion.
double cone_fraction(const geometry::MirrorSpec& m, double ion_z) {
    auto polar = [&](double r) { return std::atan2(r, m.sag(r) - ion_z); };
    return 0.5 * (std::cos(polar(m.aperture_radius())) - std::cos(polar(m.hole_radius())));
}

// Midpoint rule over the sphere of the normalised dipole pattern.
double dipole_band_numeric(double axis_polar, double ta, double tb) {
    const Vec3 axis{std::sin(axis_polar), 0, std::cos(axis_polar)};
    const int nt = 600, np = 400;
    double sum = 0;
    for (int i = 0; i < nt; ++i) {
        const double t = ta + (i + 0.5) * (tb - ta) / nt;
        for (int j = 0; j < np; ++j) {
            const double p = (j + 0.5) * 2 * c::pi / np;
            const Vec3 d{std::sin(t) * std::cos(p), std::sin(t) * std::sin(p), std::cos(t)};
            const double ca = d.dot(axis);
            sum += 3 / (8 * c::pi) * (1 - ca * ca) * std::sin(t);
        }
    }
    return sum * (tb - ta) / nt * 2 * c::pi / np;
}

CollectionGeometry at(double z) {
    CollectionGeometry g;
    g.ion_z = z;
    return g;
}

} // namespace

TEST_SUITE("collect") {

TEST_CASE("isotropic fraction equals the cone between hole and rim") {
    for (double z : {2e-3, 2.25e-3, 4e-3, 5e-3}) {
        const auto f = solid_angle(at(z), EmissionModel::isotropic());
        CHECK(f.geometric == doctest::Approx(cone_fraction(geometry::MirrorSpec{}, z)).epsilon(1e-9));
        CHECK(f.weighted == doctest::Approx(f.geometric).epsilon(1e-12));
    }
}

TEST_CASE("hemispherical mirror seen from its centre collects half") {
    CollectionGeometry g = at(4e-3);
    g.mirror.aperture_diameter = 8e-3;
    g.mirror.vertex_hole_diameter = 0.0;
    const double f = solid_angle(g, EmissionModel::isotropic()).geometric;
    CHECK(f == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("dipole bands against direct quadrature") {
    for (double axis : {0.0, 0.4, c::pi / 2}) {
        CHECK(dipole_band_fraction(axis, 0.0, c::pi) == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(dipole_band_fraction(axis, 1.9, 2.8) == doctest::Approx(dipole_band_numeric(axis, 1.9, 2.8)).epsilon(1e-5));
    }
    // Cap to the south pole along z: (1/4)(2 + 3 cos t - cos^3 t).
    for (double t : {1.2, 102.15 * c::deg, 2.9}) {
        const double ct = std::cos(t);
        CHECK(dipole_cap_fraction(0.0, t) == doctest::Approx(0.25 * (2 + 3 * ct - ct * ct * ct)).epsilon(1e-12));
        CHECK(dipole_cap_fraction(0.0, t) == doctest::Approx(dipole_band_numeric(0.0, t, c::pi)).epsilon(1e-5));
    }
}

TEST_CASE("Monte Carlo agrees with quadrature") {
    for (auto em : {EmissionModel::isotropic(), EmissionModel::dipole(), EmissionModel::dipole({1, 0, 0})}) {
        const auto g = at(2.25e-3);
        const auto q = solid_angle(g, em);
        const auto mc = solid_angle_monte_carlo(g, em, 400000, 11);
        CHECK(std::abs(mc.geometric - q.geometric) < 4 * mc.geometric_error);
        CHECK(std::abs(mc.weighted - q.weighted) < 4 * mc.weighted_error);
    }
    const auto a = solid_angle_monte_carlo(at(2e-3), EmissionModel::dipole(), 100000, 5);
    const auto b = solid_angle_monte_carlo(at(2e-3), EmissionModel::dipole(), 100000, 5);
    CHECK(a.weighted == b.weighted);
}

TEST_CASE("larger hole collects less, needle only removes light") {
    double last = 1;
    for (double hole : {0.0, 0.5e-3, 0.75e-3, 1.5e-3, 3e-3}) {
        auto g = at(2.25e-3);
        g.mirror.vertex_hole_diameter = hole;
        const double f = solid_angle(g, EmissionModel::dipole()).weighted;
        CHECK(f < last);
        last = f;
    }
    auto g = at(2.25e-3);
    const auto bare = solid_angle(g, EmissionModel::isotropic());
    g.needle = geometry::NeedleSpec{};
    const auto shadowed = solid_angle(g, EmissionModel::isotropic());
    CHECK(shadowed.geometric <= bare.geometric);
    CHECK(shadowed.geometric > 0);
}

TEST_CASE("acceptance of single directions") {
    const auto g = at(2.25e-3);
    CHECK_FALSE(accepted(g, {0, 0, -1}));  // through the hole
    CHECK_FALSE(accepted(g, {0, 0, 1}));
    CHECK(accepted(g, Vec3{1, 0, -1}.normalized()));
    const auto bands = acceptance_bands(g);
    REQUIRE(bands.size() == 1);
    CHECK(bands[0].second > bands[0].first);
}

TEST_CASE("ion inside the needle") {
    auto g = at(1e-3);
    g.needle = geometry::NeedleSpec{};
    CHECK(code_of([&] { solid_angle(g, EmissionModel::isotropic()); }) == ErrorCode::IonInsideElectrode);
    CHECK(code_of([&] { solid_angle(at(-1e-3), EmissionModel::isotropic()); }) == ErrorCode::IonInsideElectrode);
}

TEST_CASE("photon budget is the product of the chain") {
    const auto chain = default_loss_chain();
    REQUIRE(chain.size() == 6);
    const double t[] = {0.85, 0.92, 0.92, 0.80, 0.50, 0.145};
    double product = 1;
    for (std::size_t k = 0; k < 6; ++k) {
        CHECK(chain[k].transmittance == t[k]);
        product *= t[k];
    }
    const auto b = photon_budget(0.24, chain, 1e6);
    CHECK(b.detected_per_excitation == doctest::Approx(0.24 * product).epsilon(1e-12));
    CHECK(b.expected_counts == doctest::Approx(0.24 * product * 1e6).epsilon(1e-12));
    CHECK(code_of([&] { photon_budget(1.2, chain, 1e6); }) == ErrorCode::ConfigError);
}

TEST_CASE("equivalent numerical aperture") {
    const auto e = na_equivalent(0.24);
    CHECK(e.solid_angle == doctest::Approx(4 * c::pi * 0.24));
    CHECK(e.na == doctest::Approx(std::sqrt(1 - 0.52 * 0.52)).epsilon(1e-12));
    CHECK_FALSE(e.above_hemisphere);
    const auto h = na_equivalent(0.6);
    CHECK(h.above_hemisphere);
    CHECK(h.na == 1.0);
}


TEST_CASE("worked collection fractions") {
    CHECK(solid_angle(at(2e-3), EmissionModel::isotropic()).geometric == doctest::Approx(0.386).epsilon(0.003 / 0.386));
    CHECK(solid_angle(at(2.25e-3), EmissionModel::isotropic()).geometric == doctest::Approx(0.35).epsilon(0.003 / 0.35));
    CHECK(solid_angle(at(4e-3), EmissionModel::isotropic()).geometric == doctest::Approx(0.167).epsilon(0.003));
    CHECK(dipole_cap_fraction(0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(dipole_cap_fraction(0.0, c::pi / 2) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("worked budgets") {
    const std::vector<LossElement> flat{{"everything", 0.0417}};
    CHECK(photon_budget(0.24, flat, 1e6).expected_counts == doctest::Approx(10008).epsilon(1e-9));
    CHECK(photon_budget(1.0, {}, 1e6).expected_counts == 1e6);
    CHECK(photon_budget(0.3, {{"a", 0.9}, {"b", 0.0}}, 1e6).expected_counts == 0.0);
}

TEST_CASE("NA limits") {
    CHECK(na_equivalent(0.0).na == 0.0);
    const auto h = na_equivalent(0.5);
    CHECK(h.half_angle == doctest::Approx(c::pi / 2));
    CHECK(h.na == doctest::Approx(1.0));
}

}
