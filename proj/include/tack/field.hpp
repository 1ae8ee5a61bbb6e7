#pragma once

// Axisymmetric Laplace solver on the (r, z) node grid of an ElectrodeMask.

#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "tack/geometry.hpp"

namespace tack::field {

using geometry::ElectrodeMask;
using geometry::GridSpec;

struct ScalarField2D {
    std::shared_ptr<const ElectrodeMask> mask;
    std::vector<double> values;

    const GridSpec& grid() const { return mask->grid(); }
    int nr() const { return mask->nr(); }
    int nz() const { return mask->nz(); }
    double at(int i, int j) const { return values[mask->index(i, j)]; }
    double& at(int i, int j) { return values[mask->index(i, j)]; }
    // Bilinear interpolation, clamped to the grid; r is taken as |r|.
    double interpolate(double r, double z) const;
};

// Electric field E = -grad(phi) in V/m.
struct VectorField2D {
    std::shared_ptr<const ElectrodeMask> mask;
    std::vector<double> er;
    std::vector<double> ez;
};

struct SolveOptions {
    double tolerance = 1e-10;    // max |update| per iteration relative to the largest boundary value
    int max_iterations = 200000;
    bool multilevel = true;      // multigrid-preconditioned BiCGSTAB; false runs plain SOR
    double omega = 0.0;          // 0 selects the uniform-grid estimate
};

struct SolveReport {
    int iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
};

// Boundary value per electrode index.
std::pair<ScalarField2D, SolveReport> solve_laplace(std::shared_ptr<const ElectrodeMask> mask,
                                                    const std::vector<double>& boundary_values,
                                                    const SolveOptions& options = {});

// Boundary value per electrode name; every electrode must be named.
std::pair<ScalarField2D, SolveReport> solve_laplace(std::shared_ptr<const ElectrodeMask> mask,
                                                    const std::map<std::string, double>& boundary_values,
                                                    const SolveOptions& options = {});

// RF electrodes at 1 V, every other electrode at 0 V.
std::pair<ScalarField2D, SolveReport> solve_rf_unit(std::shared_ptr<const ElectrodeMask> mask,
                                                    const SolveOptions& options = {});

// DC electrodes at their bias, RF and ground at 0 V. A zero field when nothing
// carries a DC bias.
std::pair<ScalarField2D, SolveReport> solve_dc(std::shared_ptr<const ElectrodeMask> mask,
                                               const SolveOptions& options = {});

// One solve per electrode at 1 V with all others grounded.
std::vector<ScalarField2D> solve_unit_fields(std::shared_ptr<const ElectrodeMask> mask,
                                             const SolveOptions& options = {});

ScalarField2D superpose(const std::vector<ScalarField2D>& unit_fields, const std::vector<double>& volts);

VectorField2D gradient(const ScalarField2D& field);

// Max |residual| of the discrete cylindrical Laplacian over vacuum nodes, in V/m^2.
double laplacian_residual(const ScalarField2D& field);

void write_csv(const ScalarField2D& field, std::ostream& out, const std::string& value_name = "value");

// Binary dump: magic "TACKGRID", u32 version, u32 nr, u32 nz, f64 spacing,
// f64 r0, f64 z0, then nr*nz little-endian f64 values, row-major in z.
void write_binary(const ScalarField2D& field, std::ostream& out);

struct GridDump {
    int nr = 0;
    int nz = 0;
    double spacing = 0.0;
    double r0 = 0.0;
    double z0 = 0.0;
    std::vector<double> values;
};
GridDump read_binary(std::istream& in);

} // namespace tack::field
