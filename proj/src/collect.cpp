#include "tack/collect.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <fmt/format.h>

#include "tack/constants.hpp"
#include "tack/error.hpp"
#include "tack/rays.hpp"

namespace tack::collect {

namespace c = tack::constants;

EmissionModel EmissionModel::dipole(const Vec3& axis) {
    EmissionModel e;
    e.kind = Kind::Dipole;
    e.axis = axis;
    e.validate();
    e.axis = axis / axis.norm();
    return e;
}

void EmissionModel::validate() const {
    if (kind == Kind::Dipole && !(std::abs(axis.norm() - 1.0) < 1e-9))
        fail(ErrorCode::ConfigError, "dipole axis must be a unit vector");
}

double EmissionModel::density(const Vec3& d) const {
    if (kind == Kind::Isotropic) return 1.0 / (4 * c::pi);
    const double ca = d.dot(axis) / d.norm();
    return 3.0 * (1.0 - ca * ca) / (8 * c::pi);
}

namespace {

void check_ion(const CollectionGeometry& g) {
    g.mirror.validate();
    if (!(g.ion_z > 0.0))
        fail(ErrorCode::IonInsideElectrode, fmt::format("ion at z = {:.4f} mm is not above the mirror vertex", g.ion_z * 1e3));
    if (g.needle && !(g.ion_z > g.needle->tip_z))
        fail(ErrorCode::IonInsideElectrode,
             fmt::format("ion at z = {:.4f} mm is at or below the needle tip ({:.4f} mm)", g.ion_z * 1e3,
                         g.needle->tip_z * 1e3));
}

// Half-angle about -z of the needle's shadow seen from the ion.
double needle_shadow(const CollectionGeometry& g) {
    if (!g.needle) return 0.0;
    const auto& n = *g.needle;
    // Below the tip the needle widens, so the widest apparent angle sits at
    // the cone base or at the vertex plane, whichever is higher.
    const double zb = std::max(n.tip_z - n.cone_length(), 0.0);
    return std::atan2(n.radius_at(zb), g.ion_z - zb);
}

bool accepted_unchecked(const CollectionGeometry& g, const geometry::ConicSurface& m, double shadow, const Vec3& d) {
    if (shadow > 0.0 && d.z < 0.0 && std::atan2(std::hypot(d.x, d.y), -d.z) <= shadow) return false;
    return rays::intersect(rays::Ray{{0, 0, g.ion_z}, d, 0.0, true}, m).has_value();
}

Vec3 polar_direction(double theta) { return {std::sin(theta), 0.0, std::cos(theta)}; }

double isotropic_band(double ta, double tb) { return 0.5 * (std::cos(ta) - std::cos(tb)); }

} // namespace

bool accepted(const CollectionGeometry& g, const Vec3& direction) {
    check_ion(g);
    return accepted_unchecked(g, geometry::mirror_surface(g.mirror), needle_shadow(g), direction / direction.norm());
}

std::vector<std::pair<double, double>> acceptance_bands(const CollectionGeometry& g) {
    check_ion(g);
    const auto m = geometry::mirror_surface(g.mirror);
    const double shadow = needle_shadow(g);
    auto acc = [&](double th) { return accepted_unchecked(g, m, shadow, polar_direction(th)); };

    // Coarse scan, then bisect every transition.
    constexpr int n = 4096;
    std::vector<std::pair<double, double>> bands;
    double start = 0.0;
    bool prev = acc(0.0);
    double prev_t = 0.0;
    for (int k = 1; k <= n; ++k) {
        const double t = c::pi * k / n;
        const bool cur = acc(t);
        if (cur != prev) {
            double lo = prev_t, hi = t;
            for (int it = 0; it < 100 && hi - lo > 1e-15; ++it) {
                const double mid = 0.5 * (lo + hi);
                (acc(mid) == prev ? lo : hi) = mid;
            }
            const double edge = 0.5 * (lo + hi);
            if (cur) start = edge;
            else bands.emplace_back(start, edge);
        }
        prev = cur;
        prev_t = t;
    }
    if (prev) bands.emplace_back(start, c::pi);
    return bands;
}

double dipole_band_fraction(double axis_polar, double ta, double tb) {
    // Azimuthal average of the dipole pattern, integrated in u = cos(theta).
    const double s2 = std::sin(axis_polar) * std::sin(axis_polar);
    const double c2 = std::cos(axis_polar) * std::cos(axis_polar);
    auto prim = [&](double u) { return 0.75 * ((1 - 0.5 * s2) * u - (c2 - 0.5 * s2) * u * u * u / 3.0); };
    return prim(std::cos(ta)) - prim(std::cos(tb));
}

double dipole_cap_fraction(double axis_polar, double theta1) {
    if (!(theta1 >= 0.0 && theta1 <= c::pi)) fail(ErrorCode::ConfigError, "cap angle must lie in [0, pi]");
    return dipole_band_fraction(axis_polar, theta1, c::pi);
}

Fractions solid_angle(const CollectionGeometry& g, const EmissionModel& emission) {
    emission.validate();
    const double gamma = std::acos(std::clamp(emission.axis.z / emission.axis.norm(), -1.0, 1.0));
    Fractions f;
    for (const auto& [a, b] : acceptance_bands(g)) {
        f.geometric += isotropic_band(a, b);
        f.weighted += emission.kind == EmissionModel::Kind::Isotropic ? isotropic_band(a, b)
                                                                      : dipole_band_fraction(gamma, a, b);
    }
    return f;
}

Fractions solid_angle_monte_carlo(const CollectionGeometry& g, const EmissionModel& emission, long n_samples,
                                  std::uint64_t seed) {
    emission.validate();
    if (n_samples < 10000) fail(ErrorCode::ConfigError, "Monte Carlo mode needs at least 1e4 samples");
    check_ion(g);
    const auto m = geometry::mirror_surface(g.mirror);
    const double shadow = needle_shadow(g);

    // Fixed batches with their own streams, so the result does not depend on
    // how batches are scheduled.
    constexpr long batch = 65536;
    double s_g = 0, s_w = 0, s_w2 = 0;
    long hits = 0;
    for (long b0 = 0, bi = 0; b0 < n_samples; b0 += batch, ++bi) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(bi)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        const long end = std::min(n_samples, b0 + batch);
        for (long k = b0; k < end; ++k) {
            const double u = 2 * uni(rng) - 1, phi = 2 * c::pi * uni(rng);
            const double s = std::sqrt(std::max(0.0, 1 - u * u));
            const Vec3 d{s * std::cos(phi), s * std::sin(phi), u};
            if (!accepted_unchecked(g, m, shadow, d)) continue;
            ++hits;
            const double w = 4 * c::pi * emission.density(d);
            s_w += w;
            s_w2 += w * w;
        }
    }
    const double n = static_cast<double>(n_samples);
    s_g = static_cast<double>(hits);
    Fractions f;
    f.geometric = s_g / n;
    f.weighted = s_w / n;
    f.geometric_error = std::sqrt(f.geometric * (1 - f.geometric) / n);
    f.weighted_error = std::sqrt(std::max(0.0, s_w2 / n - f.weighted * f.weighted) / n);
    return f;
}

std::vector<LossElement> default_loss_chain() {
    return {{"mirror", 0.85},       {"viewport", 0.92},     {"corrector", 0.92},
            {"objective", 0.80},    {"beamsplitter", 0.50}, {"pmt_quantum_efficiency", 0.145}};
}

CollectionBudget photon_budget(double weighted_fraction, const std::vector<LossElement>& chain, double n_excitations,
                               double geometric_fraction) {
    if (!(weighted_fraction >= 0.0 && weighted_fraction <= 1.0))
        fail(ErrorCode::ConfigError, "collected fraction must lie in [0, 1]");
    if (!(n_excitations >= 0.0)) fail(ErrorCode::ConfigError, "excitation count must be non-negative");
    double t = 1.0;
    for (const auto& e : chain) {
        if (!(e.transmittance >= 0.0 && e.transmittance <= 1.0))
            fail(ErrorCode::ConfigError, fmt::format("transmittance of '{}' must lie in [0, 1]", e.name));
        t *= e.transmittance;
    }
    CollectionBudget b;
    b.geometric_fraction = geometric_fraction >= 0.0 ? geometric_fraction : weighted_fraction;
    b.weighted_fraction = weighted_fraction;
    b.loss_chain = chain;
    b.detected_per_excitation = weighted_fraction * t;
    b.expected_counts = n_excitations * b.detected_per_excitation;
    return b;
}

NaEquivalent na_equivalent(double fraction) {
    if (!(fraction >= 0.0 && fraction <= 1.0)) fail(ErrorCode::ConfigError, "fraction must lie in [0, 1]");
    NaEquivalent r;
    r.solid_angle = 4 * c::pi * fraction;
    r.half_angle = std::acos(std::clamp(1 - 2 * fraction, -1.0, 1.0));
    r.above_hemisphere = fraction > 0.5;
    r.na = r.above_hemisphere ? 1.0 : std::sin(r.half_angle);
    return r;
}

} // namespace tack::collect
