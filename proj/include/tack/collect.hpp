#pragma once

// Fraction of the ion's emission that lands on the mirror, and what survives
// the detection chain.

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tack/geometry.hpp"
#include "tack/vec3.hpp"

namespace tack::collect {

struct EmissionModel {
    enum class Kind { Isotropic, Dipole } kind = Kind::Isotropic;
    Vec3 axis{0, 0, 1};

    static EmissionModel isotropic() { return {}; }
    static EmissionModel dipole(const Vec3& axis = {0, 0, 1});
    void validate() const;
    // Probability per steradian; integrates to 1 over the sphere.
    double density(const Vec3& direction) const;
};

// Ion on the axis at ion_z. The needle, when given, shadows directions that
// graze its cone or shaft.
struct CollectionGeometry {
    double ion_z = 2.0e-3;
    geometry::MirrorSpec mirror;
    std::optional<geometry::NeedleSpec> needle;
};

struct Fractions {
    double geometric = 0.0;
    double weighted = 0.0;
    // Monte Carlo standard errors; zero for quadrature.
    double geometric_error = 0.0;
    double weighted_error = 0.0;
};

// True when a ray leaving the ion along `direction` reaches the reflective annulus.
bool accepted(const CollectionGeometry& g, const Vec3& direction);

// Accepted polar bands as [theta_a, theta_b], theta measured from +z.
std::vector<std::pair<double, double>> acceptance_bands(const CollectionGeometry& g);

Fractions solid_angle(const CollectionGeometry& g, const EmissionModel& emission);
Fractions solid_angle_monte_carlo(const CollectionGeometry& g, const EmissionModel& emission, long n_samples,
                                  std::uint64_t seed = 1);

// Dipole-weighted fraction of the band theta in [theta_a, theta_b] (from +z)
// for a dipole axis at polar angle `axis_polar` from z.
double dipole_band_fraction(double axis_polar, double theta_a, double theta_b);

// The cap theta in [theta1, pi].
double dipole_cap_fraction(double axis_polar, double theta1);

struct LossElement {
    std::string name;
    double transmittance = 1.0;
};

std::vector<LossElement> default_loss_chain();

struct CollectionBudget {
    double geometric_fraction = 0.0;
    double weighted_fraction = 0.0;
    std::vector<LossElement> loss_chain;
    double detected_per_excitation = 0.0;
    double expected_counts = 0.0;
};

CollectionBudget photon_budget(double weighted_fraction, const std::vector<LossElement>& chain, double n_excitations,
                               double geometric_fraction = -1.0);

struct NaEquivalent {
    double solid_angle = 0.0;  // sr
    double half_angle = 0.0;   // rad
    double na = 0.0;
    bool above_hemisphere = false;
};

NaEquivalent na_equivalent(double fraction);

} // namespace tack::collect
