#include <doctest.h>

#include <cmath>
#include <sstream>

#include "support.hpp"
#include "tack/constants.hpp"
#include "tack/crystal.hpp"

using namespace tack;
using namespace tack::crystal;
using testing::code_of;
namespace c = tack::constants;

namespace {

const auto ion = pseudo::IonSpecies::barium138();

} // namespace

TEST_SUITE("crystal") {

TEST_CASE("two ions sit at the closed-form spacing") {
    // Radially weaker trap: the pair lies in the plane, m w^2 d/2 = k q^2 / d^2.
    const auto trap = TrapModel::harmonic(420e3, 200e3);
    const auto cfg = relax(2, trap, ion);
    REQUIRE(cfg.converged);
    const double w = 2 * c::pi * 200e3;
    const double d = std::cbrt(2 * c::coulomb_constant * ion.charge * ion.charge / (ion.mass * w * w));
    CHECK((cfg.positions[0] - cfg.positions[1]).norm() == doctest::Approx(d).epsilon(1e-6));
    CHECK(std::abs(cfg.positions[0].z) < 1e-12);
    // Same along z when the axial confinement is the weak one.
    const auto axial = relax(2, TrapModel::harmonic(150e3, 600e3), ion);
    const double wz = 2 * c::pi * 150e3;
    const double dz = std::cbrt(2 * c::coulomb_constant * ion.charge * ion.charge / (ion.mass * wz * wz));
    CHECK(std::abs(axial.positions[0].z - axial.positions[1].z) == doctest::Approx(dz).epsilon(1e-6));
}

TEST_CASE("seven ions form a planar hexagon") {
    const auto cfg = relax(7, TrapModel::harmonic(420e3, 200e3), ion);
    REQUIRE(cfg.converged);
    const auto cls = classify(cfg);
    CHECK(cls.shells == std::vector<int>{1, 6});
    CHECK(cls.planarity < 1e-4);
    CHECK(cfg.positions.size() == 7);
}

TEST_CASE("single ion rests at the trap centre") {
    const auto cfg = relax(1, TrapModel::harmonic(420e3, 200e3, 2e-3), ion);
    CHECK(cfg.positions[0].norm() == doctest::Approx(2e-3).epsilon(1e-9));
    CHECK(std::abs(cfg.positions[0].z - 2e-3) < 1e-12);
}

TEST_CASE("gradient matches finite differences") {
    const auto trap = TrapModel::harmonic(420e3, 200e3);
    std::vector<Vec3> p{{3e-6, 1e-6, 0.5e-6}, {-4e-6, 2e-6, -1e-6}, {1e-6, -5e-6, 2e-6}};
    const auto g = energy_gradient(p, trap, ion);
    const double h = 1e-11;
    for (std::size_t k = 0; k < p.size(); ++k)
        for (int axis = 0; axis < 3; ++axis) {
            auto plus = p, minus = p;
            double* a = axis == 0 ? &plus[k].x : axis == 1 ? &plus[k].y : &plus[k].z;
            double* b = axis == 0 ? &minus[k].x : axis == 1 ? &minus[k].y : &minus[k].z;
            *a += h;
            *b -= h;
            const double fd = (total_energy(plus, trap, ion) - total_energy(minus, trap, ion)) / (2 * h);
            const double an = axis == 0 ? g[k].x : axis == 1 ? g[k].y : g[k].z;
            CHECK(an == doctest::Approx(fd).epsilon(1e-5));
        }
}

TEST_CASE("energy is invariant under rotation about the axis") {
    const auto trap = TrapModel::harmonic(420e3, 200e3);
    std::vector<Vec3> p{{3e-6, 1e-6, 0.5e-6}, {-4e-6, 2e-6, -1e-6}, {1e-6, -5e-6, 2e-6}};
    auto q = p;
    const double a = 0.731;
    for (auto& v : q) v = {std::cos(a) * v.x - std::sin(a) * v.y, std::sin(a) * v.x + std::cos(a) * v.y, v.z};
    CHECK(total_energy(q, trap, ion) == doctest::Approx(total_energy(p, trap, ion)).epsilon(1e-12));
}

TEST_CASE("coincident ions are rejected") {
    const auto trap = TrapModel::harmonic(420e3, 200e3);
    std::vector<Vec3> p{{1e-6, 0, 0}, {1e-6, 0, 0}};
    CHECK(code_of([&] { total_energy(p, trap, ion); }) == ErrorCode::OverlappingIons);
    CHECK(code_of([&] { TrapModel::harmonic(-1, 200e3); }) == ErrorCode::ConfigError);
    CHECK(code_of([&] { relax(0, trap, ion); }) == ErrorCode::ConfigError);
}

TEST_CASE("relaxation is reproducible for a seed") {
    const auto trap = TrapModel::harmonic(420e3, 200e3);
    RelaxOptions o;
    o.seed = 42;
    std::ostringstream a, b;
    write_csv(relax(5, trap, ion, o), a);
    write_csv(relax(5, trap, ion, o), b);
    CHECK(a.str() == b.str());
}

TEST_CASE("gridded harmonic field reproduces the harmonic crystal") {
    geometry::GridSpec g;
    g.r_max = 0.2e-3;
    g.z_min = 1.8e-3;
    g.z_max = 2.2e-3;
    g.spacing = 2e-6;
    auto psi = std::make_shared<field::ScalarField2D>();
    psi->mask = std::make_shared<const geometry::ElectrodeMask>(g, std::vector<geometry::ElectrodeInfo>{});
    psi->values.assign(static_cast<std::size_t>(g.nr()) * g.nz(), 0.0);
    const double wz = 2 * c::pi * 420e3, wr = 2 * c::pi * 200e3;
    for (int j = 0; j < g.nz(); ++j)
        for (int i = 0; i < g.nr(); ++i) {
            const double r = g.r(i), dz = g.z(j) - 2e-3;
            psi->at(i, j) = 0.5 * ion.mass * (wr * wr * r * r + wz * wz * dz * dz) / c::electron_volt;
        }
    const auto gridded = relax(2, TrapModel::gridded(psi, 2e-3), ion);
    const auto exact = relax(2, TrapModel::harmonic(420e3, 200e3, 2e-3), ion);
    const double dg = (gridded.positions[0] - gridded.positions[1]).norm();
    const double de = (exact.positions[0] - exact.positions[1]).norm();
    CHECK(dg == doctest::Approx(de).epsilon(1e-3));
}


TEST_CASE("single ion has no Coulomb term and a trivial shape") {
    const auto trap = TrapModel::harmonic(420e3, 200e3, 2e-3);
    CHECK(total_energy({{0, 0, 2e-3}}, trap, ion) == 0.0);
    const auto cls = classify(relax(1, trap, ion));
    CHECK(cls.shells == std::vector<int>{1});
    CHECK(cls.planarity == 0.0);
}

TEST_CASE("mirror image has the same energy") {
    const auto trap = TrapModel::harmonic(420e3, 200e3);
    std::vector<Vec3> p{{3e-6, 1e-6, 0.5e-6}, {-4e-6, 2e-6, -1e-6}, {1e-6, -5e-6, 2e-6}};
    auto q = p;
    for (auto& v : q) v.x = -v.x;
    CHECK(total_energy(q, trap, ion) == doctest::Approx(total_energy(p, trap, ion)).epsilon(1e-14));
}

TEST_CASE("barium pair at 200 kHz is about 10.8 um apart") {
    const auto cfg = relax(2, TrapModel::harmonic(420e3, 200e3), ion);
    CHECK((cfg.positions[0] - cfg.positions[1]).norm() == doctest::Approx(10.8e-6).epsilon(0.01));
}

TEST_CASE("24 ions form several rings") {
    const auto cfg = relax(24, TrapModel::harmonic(420e3, 200e3), ion);
    const auto cls = classify(cfg);
    CHECK(cls.shells.size() >= 2);
    int total = 0;
    for (int s : cls.shells) total += s;
    CHECK(total == 24);
    CHECK(std::isfinite(cls.planarity));
    CHECK(cls.planarity >= 0.0);
}

}
