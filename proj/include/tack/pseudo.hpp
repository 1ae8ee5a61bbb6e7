#pragma once

// Ponderomotive pseudopotential and the trap observables extracted from it.

#include <optional>
#include <string>
#include <vector>

#include "tack/field.hpp"
#include "tack/geometry.hpp"

namespace tack::pseudo {

using field::ScalarField2D;

struct RfDrive {
    double amplitude = 270.0;   // V, zero-to-peak
    double frequency = 23e6;    // Hz

    void validate() const;
    double angular_frequency() const;
};

struct IonSpecies {
    double mass = 0.0;    // kg
    double charge = 0.0;  // C

    static IonSpecies barium138();
    void validate() const;
};

// Psi = q^2 |grad phi|^2 V^2 / (4 m Omega^2) in eV, from a field solved at 1 V
// drive. A DC potential (volts) adds q * phi_dc.
ScalarField2D pseudopotential(const ScalarField2D& rf_unit, const RfDrive& drive, const IonSpecies& ion,
                              const ScalarField2D* dc = nullptr);

struct AxisWindow {
    double z_lo = -1e300;
    double z_hi = 1e300;
};

struct Minimum {
    double r = 0.0;
    double z = 0.0;
    double value = 0.0;  // eV
    int row = 0;         // nearest grid row
};

// First on-axis local minimum scanning upward from window.z_lo, refined by a
// three-point parabola.
Minimum find_minimum(const ScalarField2D& psi, const AxisWindow& window = {});

struct Depth {
    double depth = 0.0;        // eV
    double escape_level = 0.0; // eV
    double saddle_r = 0.0;
    double saddle_z = 0.0;
};

// Flood the sublevel set from the minimum; the escape level is reached when the
// set touches the outer box, a node next to an electrode, or another basin at
// least as deep as the starting one.
Depth trap_depth(const ScalarField2D& psi, const Minimum& minimum);

struct SecularFrequencies {
    double axial = 0.0;   // Hz
    double radial = 0.0;  // Hz
};

SecularFrequencies secular_frequencies(const ScalarField2D& psi, const Minimum& minimum, const IonSpecies& ion);

// Least-squares parabola over +-half_width cells around the minimum.
SecularFrequencies secular_frequencies_fit(const ScalarField2D& psi, const Minimum& minimum, const IonSpecies& ion,
                                           int half_width = 5);

struct TrapAnalysis {
    Minimum minimum;
    double tip_distance = 0.0;  // minimum.z - window.z_lo
    Depth depth;
    SecularFrequencies secular;
};

TrapAnalysis analyze(const ScalarField2D& psi, const IonSpecies& ion, const AxisWindow& window);

// Search window for a geometry: above the needle tip (or mirror vertex) and
// below the top plate.
AxisWindow axis_window(const geometry::TrapGeometry& geometry, const geometry::GridSpec& grid);

struct TrapSolution {
    ScalarField2D rf_unit;
    ScalarField2D psi;
    field::SolveReport report;
    TrapAnalysis analysis;
};

// Rasterize, solve and analyze one geometry.
TrapSolution solve_trap(const geometry::TrapGeometry& geometry, const geometry::GridSpec& grid, const RfDrive& drive,
                        const IonSpecies& ion, const field::SolveOptions& options = {});

struct ScanRow {
    double tip_z = 0.0;
    bool ok = false;
    double minimum_z = 0.0;
    double depth = 0.0;      // eV
    double axial = 0.0;      // Hz
    double radial = 0.0;     // Hz
    std::string error;
};

struct ScanResult {
    std::vector<ScanRow> rows;
    double central_lo = 0.0;
    double central_hi = 0.0;
    double slope = 0.0;           // d(minimum_z)/d(tip_z) over the central range
    double r_squared = 0.0;
    double depth_variation = 0.0; // max |depth/mean - 1| over the central range
};

ScanResult needle_scan(const geometry::TrapGeometry& geometry, const geometry::GridSpec& grid,
                       const std::vector<double>& tip_positions, const RfDrive& drive, const IonSpecies& ion,
                       const field::SolveOptions& options = {}, double central_span = 1e-3);

} // namespace tack::pseudo
