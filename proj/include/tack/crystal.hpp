#pragma once

// Equilibrium configurations of N identical ions: trap potential plus Coulomb.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <vector>

#include "tack/field.hpp"
#include "tack/pseudo.hpp"
#include "tack/vec3.hpp"

namespace tack::crystal {

using pseudo::IonSpecies;

class TrapModel {
public:
    enum class Mode { Harmonic, Gridded };

    // U = m/2 (w_r^2 rho^2 + w_z^2 (z - center_z)^2), frequencies in Hz.
    static TrapModel harmonic(double axial_hz, double radial_hz, double center_z = 0.0);
    // U = Psi(rho, z) - Psi(0, center_z) with Psi in eV, bicubic interpolation.
    static TrapModel gridded(std::shared_ptr<const field::ScalarField2D> psi, double center_z);

    Mode mode() const { return mode_; }
    double center_z() const { return center_z_; }
    double axial_hz() const { return axial_hz_; }
    double radial_hz() const { return radial_hz_; }

    // Potential energy in J and its gradient in J/m.
    double energy(const Vec3& p, const IonSpecies& ion) const;
    Vec3 gradient(const Vec3& p, const IonSpecies& ion) const;

private:
    Mode mode_ = Mode::Harmonic;
    double axial_hz_ = 0.0;
    double radial_hz_ = 0.0;
    double center_z_ = 0.0;
    std::shared_ptr<const field::ScalarField2D> psi_;
    double psi_center_ = 0.0;

    // Psi in eV and its (r, z) derivatives.
    void sample(double r, double z, double& value, double& d_r, double& d_z) const;
};

struct CrystalConfig {
    std::vector<Vec3> positions;
    double energy = 0.0;     // J
    double max_force = 0.0;  // N, largest Cartesian force component
    bool converged = false;
};

double total_energy(const std::vector<Vec3>& positions, const TrapModel& trap, const IonSpecies& ion);
// dU/dx per ion, J/m.
std::vector<Vec3> energy_gradient(const std::vector<Vec3>& positions, const TrapModel& trap, const IonSpecies& ion);

struct RelaxOptions {
    int restarts = 8;
    double tolerance = 1e-24;  // N, max force component at convergence
    int max_iterations = 20000;
    std::uint64_t seed = 1;
};

// Best of several L-BFGS relaxations from random starts, rotated so the
// outermost ion lies on +x.
CrystalConfig relax(int n_ions, const TrapModel& trap, const IonSpecies& ion, const RelaxOptions& options = {});

struct Classification {
    double planarity = 0.0;     // z_rms / rho_rms about the centroid
    std::vector<int> shells;    // ion counts per ring, innermost first
};

Classification classify(const CrystalConfig& config);

void write_csv(const CrystalConfig& config, std::ostream& out);
// x-y projection, one circle per ion.
void write_svg(const CrystalConfig& config, std::ostream& out);

} // namespace tack::crystal
